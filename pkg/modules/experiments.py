"""
Experiment orchestration.

run_experiment folds the configured subgroups, dispatches to the named
command and wraps the payload in a Report. Library errors become the
report's error block; the exit status comes from the error class (or from
a negative verdict, for commands that decide a hypothesis).

Commands registered:
  delta      — four-point δ of a tree ball or an imported graph
  fold       — core graphs, λ and index flags per subgroup
  malnormal  — exact almost-malnormality verdict with witness
  bci        — coset-intersection diameters and D_emp (with N+2 recheck)
  quotient   — depth-n cylinder partition of the decomposition space
  refine     — refinement map, perfectness and USC proxies between depths
  collapse   — violation set of g_i = s·t^i on cylinder sets K, L
  conical    — conical certificate for one rational point
  parabolic  — bounded parabolic certificate for one coset
  classify   — parabolic/conical dichotomy for one point or a seeded batch
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from config import BALL_VERTEX_CAP, DEFAULT_SEED, VERSION
from modules.dynamics import (
    CONICAL,
    PARABOLIC_POINT,
    UNCLASSIFIED,
    classify_point,
    collapsing_check,
    conical_certificate,
    parabolic_certificate,
    perfectness_witness,
    random_rational_point,
)
from modules.errors import EXIT_HYPOTHESIS, EXIT_OK, BoundaryError, ValidationError
from modules.export import export_dot
from modules.malnormal import bci_report, is_almost_malnormal
from modules.quotient import PARABOLIC, decomposition_partition, refine_and_check
from modules.specfile import COMMANDS, ExperimentConfig, format_value, serialize_spec
from modules.stallings import CoreGraph, coset, fold
from modules.words import IDENTITY, build_ball, four_point_delta, load_graph

log = logging.getLogger(__name__)

# refine reports carry witnesses for at most this many parabolic classes
WITNESS_LIMIT = 5


@dataclass
class CommandResult:
    payload: dict
    status: int = EXIT_OK
    dot: str | None = None


@dataclass
class Report:
    command: str
    seed: int
    config: dict
    results: dict | None = None
    error: dict | None = None
    timing_seconds: float = 0.0
    exit_status: int = EXIT_OK
    version: str = VERSION
    dot: str | None = field(default=None, repr=False)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "config": self.config,
            "results": self.results,
            "error": self.error,
        }
        if timing:
            out["timing_seconds"] = round(self.timing_seconds, 6)
        return out

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, ensure_ascii=False)


Handler = Callable[[ExperimentConfig, dict, list[CoreGraph]], CommandResult]
_HANDLERS: dict[str, Handler] = {}


def command(name: str) -> Callable[[Handler], Handler]:
    def decorator(fn: Handler) -> Handler:
        if name not in COMMANDS:
            raise ValueError(f"{name} is not a known command")
        _HANDLERS[name] = fn
        return fn

    return decorator


def fold_collection(config: ExperimentConfig) -> list[CoreGraph]:
    return [fold(words, config.group.rank, name) for name, words in config.subgroups.items()]


def _require(params: dict, key: str, cmd: str) -> Any:
    if key not in params:
        raise ValidationError(f"{cmd} needs the parameter {key!r}", field=key)
    return params[key]


def _subgroup(collection: list[CoreGraph], params: dict) -> CoreGraph:
    if not collection:
        raise ValidationError("no subgroups defined", field="subgroup")
    name = params.get("subgroup")
    if name is None:
        return collection[0]
    for core in collection:
        if core.name == name:
            return core
    raise ValidationError(f"unknown subgroup {name!r}", field="subgroup")


# ── Commands ─────────────────────────────────────────────────────────────────

@command("delta")
def _delta(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    if "graph" in params:
        try:
            text = Path(params["graph"]).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read graph {params['graph']}: {exc}", field="graph") from exc
        graph = load_graph(text)
        backend = "imported"
    else:
        graph = build_ball(config.group, params.get("radius", 3), params.get("ball_cap", BALL_VERTEX_CAP))
        backend = "free"
    estimate = four_point_delta(graph, seed=config.seed)
    return CommandResult({"backend": backend, "graph": graph.to_dict(), "estimate": estimate.to_dict()})


@command("fold")
def _fold(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    dot = "".join(export_dot(core) for core in collection) or None
    return CommandResult({"subgroups": [core.to_dict() for core in collection]}, dot=dot)


@command("malnormal")
def _malnormal(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    cert = is_almost_malnormal(collection)
    payload = {
        "subgroups": [core.name for core in collection],
        "certificate": cert.to_dict(),
        "witness_checks": cert.check(collection),
    }
    return CommandResult(payload, EXIT_OK if cert.verdict else EXIT_HYPOTHESIS)


@command("bci")
def _bci(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    R = params.get("R", 1)
    radius = params.get("radius", params.get("ball_radius", 6))
    report = bci_report(collection, R, radius)
    recheck = bci_report(collection, R, radius + 2)
    payload = report.to_dict()
    payload["stabilization"] = {
        "radii": [radius, radius + 2],
        "D_emp": [report.D_emp, recheck.D_emp],
        "stable": report.D_emp == recheck.D_emp,
    }
    return CommandResult(payload)


@command("quotient")
def _quotient(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    partition = decomposition_partition(collection, params.get("depth", 2), config.group.rank)
    return CommandResult(partition.to_dict(), dot=export_dot(partition))


@command("refine")
def _refine(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    n = params.get("depth", 1)
    m = params.get("deeper", n + 1)
    report = refine_and_check(collection, n, m, config.group.rank)
    payload = report.to_dict()
    coarse, fine = report.coarse, report.fine
    parabolic = [i for i, cls in enumerate(coarse.classes) if cls.kind == PARABOLIC][:WITNESS_LIMIT]
    payload["perfectness_witness"] = [
        w for w in (perfectness_witness(coarse, fine, i) for i in parabolic) if w is not None
    ]
    return CommandResult(payload)


@command("collapse")
def _collapse(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    K = _require(params, "K", "collapse")
    L = _require(params, "L", "collapse")
    depth = params.get("depth", len(K[0]) if K else 0)
    report = collapsing_check(
        params.get("s", IDENTITY),
        _require(params, "t", "collapse"),
        K,
        L,
        depth,
        params.get("imax", 32),
        config.group.rank,
        collection or None,
    )
    return CommandResult(report.to_dict())


@command("conical")
def _conical(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    cert = conical_certificate(
        _require(params, "point", "conical"),
        collection,
        params.get("imax", 8),
        params.get("depth", 32),
        params.get("ball_radius"),
    )
    return CommandResult(cert.to_dict())


@command("parabolic")
def _parabolic(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    core = _subgroup(collection, params)
    R = params.get("R", 2 * core.lam + 1)
    cert = parabolic_certificate(coset(core, params.get("g", IDENTITY)), R, params.get("depth", 2 * R))
    return CommandResult(cert.to_dict(), EXIT_OK if cert.covered else EXIT_HYPOTHESIS)


@command("classify")
def _classify(config: ExperimentConfig, params: dict, collection: list[CoreGraph]) -> CommandResult:
    if "point" in params:
        points = [params["point"]]
    else:
        rng = np.random.default_rng(config.seed)
        points = [random_rational_point(rng, config.group.rank) for _ in range(params.get("count", 50))]
    results = [
        classify_point(x, collection, params.get("imax", 8), params.get("depth", 32)) for x in points
    ]
    summary = {kind: sum(1 for r in results if r.kind == kind) for kind in (CONICAL, PARABOLIC_POINT, UNCLASSIFIED)}
    payload = {"summary": summary, "points": [r.to_dict() for r in results]}
    return CommandResult(payload, EXIT_HYPOTHESIS if summary[UNCLASSIFIED] else EXIT_OK)


# ── Dispatch ─────────────────────────────────────────────────────────────────

def run_experiment(config: ExperimentConfig, name: str | None = None, overrides: dict | None = None) -> Report:
    name = name or config.command
    if name not in _HANDLERS:
        raise ValidationError(f"unknown command {name!r}", field="command")
    params = config.params(name)
    params.update({k: v for k, v in (overrides or {}).items() if v is not None})
    report = Report(
        command=name,
        seed=config.seed,
        config={"spec": serialize_spec(config), "parameters": {k: format_value(k, v) for k, v in sorted(params.items())}},
    )
    started = time.perf_counter()
    try:
        collection = fold_collection(config)
        result = _HANDLERS[name](config, params, collection)
        report.results = result.payload
        report.exit_status = result.status
        report.dot = result.dot
    except BoundaryError as e:
        log.error("%s failed: %s", name, e.message)
        report.error = e.to_dict()
        report.exit_status = e.exit_status
    report.timing_seconds = time.perf_counter() - started
    return report


def failure_report(name: str, error: BoundaryError, seed: int = DEFAULT_SEED) -> Report:
    """Report for a run that failed before its document could be parsed."""
    return Report(
        command=name,
        seed=seed,
        config={"spec": None, "parameters": {}},
        error=error.to_dict(),
        exit_status=error.exit_status,
    )


def register(subparsers) -> None:  # noqa: ANN001
    """Add one sub-command per registered experiment."""
    for name in COMMANDS:
        sub = subparsers.add_parser(name, help=f"run the {name} experiment")
        sub.add_argument("--spec", required=True, help="experiment document")
        sub.add_argument("--out", help="write the JSON report here instead of stdout")
        sub.add_argument("--seed", type=int, help="override the document's seed")
        sub.add_argument("--depth", type=int)
        sub.add_argument("--deeper", type=int)
        sub.add_argument("--radius", type=int)
        sub.add_argument("--R", type=int, dest="R")
        sub.add_argument("--imax", type=int)
        sub.add_argument("--dot", help="write a DOT sidecar here")
        if name == "delta":
            sub.add_argument("--ball-cap", type=int, dest="ball_cap", help="vertex cap for the built ball")
            sub.add_argument("--graph", help="adjacency-list graph to estimate instead of a ball")
        sub.set_defaults(command=name)
