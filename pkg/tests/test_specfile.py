"""
Experiment documents: parsing, validation and serialisation.
"""

from pathlib import Path

import pytest

from conftest import w
from modules.dynamics import rational_point
from modules.errors import ParseError, ValidationError
from modules.specfile import parse_point, parse_spec, serialize_spec

SPECS = Path(__file__).resolve().parent.parent / "specs"

DOCUMENT = """\
# two cyclic factors
rank = 2
seed = 5
command = quotient
subgroup H1 = a
subgroup H2 = b, ab

[quotient]
depth = 3

[collapse]
s = b
t = a
K = b, B, A
L = a, b, B
imax = 16

[conical]
point = ba(ab)
"""


def test_parse_document():
    config = parse_spec(DOCUMENT)
    assert config.group.rank == 2
    assert config.seed == 5
    assert config.command == "quotient"
    assert config.subgroups == {"H1": (w("a"),), "H2": (w("b"), w("ab"))}
    assert config.params() == {"depth": 3}
    collapse = config.params("collapse")
    assert collapse["t"] == w("a")
    assert collapse["K"] == [w("b"), w("B"), w("A")]
    assert collapse["imax"] == 16
    assert config.params("conical")["point"] == rational_point(w("ba"), w("ab"))


def test_round_trip():
    config = parse_spec(DOCUMENT)
    assert parse_spec(serialize_spec(config)) == config


@pytest.mark.parametrize("path", sorted(SPECS.glob("*.spec")), ids=lambda p: p.name)
def test_sample_documents_parse(path):
    config = parse_spec(path.read_text(encoding="utf-8"))
    assert config.subgroups
    assert parse_spec(serialize_spec(config)) == config


def test_rank_one_is_rejected():
    with pytest.raises(ValidationError) as exc:
        parse_spec("rank = 1\nsubgroup H = a\n")
    assert exc.value.code == "VALIDATION_ERROR"
    assert exc.value.exit_status == 1


def test_missing_rank():
    with pytest.raises(ValidationError):
        parse_spec("subgroup H = a\n")


def test_bad_integer_reports_line():
    with pytest.raises(ParseError) as exc:
        parse_spec("rank = 2\nsubgroup H = a\n[quotient]\ndepth = two\n")
    assert exc.value.line == 4
    assert exc.value.field == "depth"


def test_unknown_letter_reports_field():
    with pytest.raises(ParseError) as exc:
        parse_spec("rank = 2\nsubgroup H = ac\n")
    assert exc.value.line == 2
    assert exc.value.field == "H"


def test_duplicate_subgroup():
    with pytest.raises(ParseError):
        parse_spec("rank = 2\nsubgroup H = a\nsubgroup H = b\n")


def test_trivial_subgroup_line():
    with pytest.raises(ValidationError):
        parse_spec("rank = 2\nsubgroup H = aA\n")


@pytest.mark.parametrize(
    "text",
    ["rank = 2\n[frobnicate]\n", "rank = 2\ncommand = frobnicate\n"],
)
def test_unknown_command(text):
    with pytest.raises(ValidationError):
        parse_spec(text)


def test_unknown_parameter():
    with pytest.raises(ParseError) as exc:
        parse_spec("rank = 2\n[bci]\nwidth = 3\n")
    assert exc.value.field == "width"


def test_subgroups_after_block():
    with pytest.raises(ParseError):
        parse_spec("rank = 2\n[bci]\nsubgroup H = a\n")


def test_parse_point():
    assert parse_point("b(a)", 2) == rational_point(w("b"), w("a"))
    assert parse_point("1(ab)", 2) == parse_point("(ab)", 2)
    with pytest.raises(ValidationError):
        parse_point("ab", 2)
