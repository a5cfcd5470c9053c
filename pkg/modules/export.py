"""DOT and CSV sidecars."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

from modules.quotient import CylinderPartition
from modules.stallings import CoreGraph
from modules.words import letter_name


def _quote(text: str) -> str:
    return '"' + text.replace('"', '\\"') + '"'


def core_to_dot(core: CoreGraph) -> str:
    lines = [f"digraph {_quote(core.name)} {{", "  rankdir=LR;"]
    for v in range(len(core)):
        shape = "doublecircle" if v == 0 else "circle"
        lines.append(f"  {v} [shape={shape}];")
    for u, x, v in core.edges:
        lines.append(f"  {u} -> {v} [label={_quote(letter_name(x))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def partition_to_dot(partition: CylinderPartition) -> str:
    """Class nerve: one node per class, an edge when two classes share a length-(n-1) prefix."""
    lines = [f"digraph {_quote(f'depth {partition.depth}')} {{", "  edge [dir=none];"]
    for i, cls in enumerate(partition.classes):
        label = f"{cls.kind}\\n" + " ".join(str(w) for w in cls.cylinders)
        shape = "box" if cls.kind == "PARABOLIC" else "ellipse"
        lines.append(f"  {i} [shape={shape}, label={_quote(label)}];")
    for i, j in partition.nerve_edges():
        lines.append(f"  {i} -> {j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(obj: CoreGraph | CylinderPartition) -> str:
    if isinstance(obj, CoreGraph):
        return core_to_dot(obj)
    if isinstance(obj, CylinderPartition):
        return partition_to_dot(obj)
    raise TypeError(f"no DOT export for {type(obj).__name__}")


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write rows under header; returns the row count."""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    return count
