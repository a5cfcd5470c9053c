"""Central configuration — resource caps come from environment variables with sane defaults."""

import os

# ------------------------------------------------------------------
# Program
# ------------------------------------------------------------------
PROGRAM_NAME = "bowditch-lab"
VERSION = "0.1.0"
DEFAULT_SEED = 0

# ------------------------------------------------------------------
# Resource caps
# ------------------------------------------------------------------
BALL_VERTEX_CAP = int(os.getenv("BOWDITCH_BALL_CAP", "1000000"))
QUADRUPLE_CAP = int(os.getenv("BOWDITCH_QUADRUPLE_CAP", "100000000"))
COSET_PAIR_CAP = int(os.getenv("BOWDITCH_COSET_PAIR_CAP", "5000"))
CYLINDER_CAP = int(os.getenv("BOWDITCH_CYLINDER_CAP", "200000"))
ELEMENT_CAP = int(os.getenv("BOWDITCH_ELEMENT_CAP", "200000"))
