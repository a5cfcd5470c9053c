"""
Experiment documents: parse_spec / serialize_spec.

A document is a list of key = value lines. Top-level settings give the
group and the run; `subgroup NAME = w1, w2` lines name generator lists;
`[command]` opens a block whose settings are that command's parameters:

    rank = 2
    seed = 7
    command = quotient
    subgroup H1 = a

    [quotient]
    depth = 2

Words use the a/A convention, `1` is the identity, rational points are
written head(period), e.g. b(a) for b·a^∞. Lines starting with # are
comments.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from modules.dynamics import RationalBoundaryPoint, rational_point
from modules.errors import BoundaryError, ParseError, ValidationError
from modules.words import GroupSpec, ReducedWord, parse_word

COMMANDS = (
    "delta",
    "fold",
    "malnormal",
    "bci",
    "quotient",
    "refine",
    "collapse",
    "conical",
    "parabolic",
    "classify",
)

INT_KEYS = {"depth", "deeper", "radius", "R", "imax", "ball_cap", "ball_radius", "count", "steps"}
WORD_KEYS = {"s", "t", "g"}
POINT_KEYS = {"point"}
CYLINDER_KEYS = {"K", "L"}
TEXT_KEYS = {"subgroup", "graph"}
PARAM_KEYS = INT_KEYS | WORD_KEYS | POINT_KEYS | CYLINDER_KEYS | TEXT_KEYS

_SETTING = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_SUBGROUP = re.compile(r"^subgroup\s+([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*)$")
_BLOCK = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_POINT = re.compile(r"^([A-Za-z1]*)\(([A-Za-z]+)\)$")


@dataclass
class ExperimentConfig:
    group: GroupSpec
    subgroups: dict[str, tuple[ReducedWord, ...]] = field(default_factory=dict)
    command: str | None = None
    seed: int = 0
    blocks: dict[str, dict[str, Any]] = field(default_factory=dict)

    def params(self, command: str | None = None) -> dict[str, Any]:
        return dict(self.blocks.get(command or self.command or "", {}))

    def to_dict(self) -> dict:
        return {
            "group": self.group.to_dict(),
            "subgroups": {name: [str(w) for w in words] for name, words in self.subgroups.items()},
            "command": self.command,
            "seed": self.seed,
            "blocks": {cmd: {k: format_value(k, v) for k, v in ps.items()} for cmd, ps in self.blocks.items()},
        }


def parse_point(text: str, rank: int) -> RationalBoundaryPoint:
    m = _POINT.match(text.replace(" ", ""))
    if not m:
        raise ValidationError(f"expected head(period), got {text!r}", field="point")
    return rational_point(parse_word(m.group(1), rank), parse_word(m.group(2), rank))


def _parse_int(text: str, line: int, key: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{key} must be an integer, got {text!r}", line=line, field=key) from None


def _parse_value(key: str, text: str, rank: int, line: int) -> Any:
    try:
        if key in INT_KEYS:
            return _parse_int(text, line, key)
        if key in WORD_KEYS:
            return parse_word(text, rank)
        if key in POINT_KEYS:
            return parse_point(text, rank)
        if key in CYLINDER_KEYS:
            return [parse_word(w, rank) for w in text.split(",") if w.strip()]
        return text
    except ParseError:
        raise
    except BoundaryError as e:
        raise ParseError(e.message, line=line, field=key) from e


def format_value(key: str, value: Any) -> str:
    if key in CYLINDER_KEYS:
        return ", ".join(str(w) for w in value)
    return str(value)


def parse_spec(text: str) -> ExperimentConfig:
    entries: list[tuple[int, str, str, str | None]] = []  # (line, kind, payload, block)
    rank: int | None = None
    block: str | None = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _BLOCK.match(line):
            block = m.group(1)
            if block not in COMMANDS:
                raise ValidationError(f"line {lineno}: unknown command block [{block}]", field="command")
            entries.append((lineno, "block", block, None))
            continue
        if m := _SUBGROUP.match(line):
            if block is not None:
                raise ParseError("subgroup lines belong before the first block", line=lineno, field="subgroup")
            entries.append((lineno, "subgroup", line, None))
            continue
        m = _SETTING.match(line)
        if not m:
            raise ParseError(f"cannot read {line!r}", line=lineno)
        key, value = m.group(1), m.group(2).strip()
        if block is None and key == "rank":
            if rank is not None:
                raise ParseError("rank given twice", line=lineno, field="rank")
            rank = _parse_int(value, lineno, "rank")
        entries.append((lineno, "setting", line, block))

    if rank is None:
        raise ValidationError("document does not set the rank", field="rank")
    config = ExperimentConfig(GroupSpec(rank))

    for lineno, kind, payload, owner in entries:
        if kind == "block":
            config.blocks.setdefault(payload, {})
            continue
        if kind == "subgroup":
            m = _SUBGROUP.match(payload)
            name = m.group(1)
            if name in config.subgroups:
                raise ParseError(f"subgroup {name} defined twice", line=lineno, field=name)
            try:
                words = tuple(parse_word(w, rank) for w in m.group(2).split(",") if w.strip())
            except BoundaryError as e:
                raise ParseError(e.message, line=lineno, field=name) from e
            if not any(words):
                raise ValidationError(f"line {lineno}: subgroup {name} has no nontrivial generator", field=name)
            config.subgroups[name] = words
            continue
        m = _SETTING.match(payload)
        key, value = m.group(1), m.group(2).strip()
        if owner is None:
            if key == "rank":
                continue
            if key == "seed":
                config.seed = _parse_int(value, lineno, "seed")
            elif key == "command":
                if value not in COMMANDS:
                    raise ValidationError(f"line {lineno}: unknown command {value!r}", field="command")
                config.command = value
            else:
                raise ParseError(f"unknown setting {key!r}", line=lineno, field=key)
            continue
        if key not in PARAM_KEYS:
            raise ParseError(f"unknown parameter {key!r} in [{owner}]", line=lineno, field=key)
        config.blocks[owner][key] = _parse_value(key, value, rank, lineno)
    return config


def serialize_spec(config: ExperimentConfig) -> str:
    lines = [f"rank = {config.group.rank}", f"seed = {config.seed}"]
    if config.command:
        lines.append(f"command = {config.command}")
    for name, words in config.subgroups.items():
        lines.append(f"subgroup {name} = " + ", ".join(str(w) for w in words))
    for cmd, params in config.blocks.items():
        lines.append("")
        lines.append(f"[{cmd}]")
        for key, value in params.items():
            lines.append(f"{key} = {format_value(key, value)}")
    return "\n".join(lines) + "\n"
