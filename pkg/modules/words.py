"""
Free-group word arithmetic and finite metric graphs.

Letters are non-zero integers: generator x_i is +i and its inverse is -i.
Externally words use the a/A convention (a = x_1, A = x_1^-1, b = x_2, ...),
and the identity is written "1".

Shortlex order ranks letters a < A < b < B < ...; it is the order used for
canonical coset representatives, sphere enumeration and every sorted report.

The Cayley graph of the free basis is a tree, so distances and Gromov
products reduce to common-prefix lengths. MetricBallGraph is the generic
backend: any finite connected graph (a ball, or an imported graph) with a
BFS distance table, on which four_point_delta estimates δ.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Hashable, Iterable, Iterator

import networkx as nx
import numpy as np

from config import BALL_VERTEX_CAP, QUADRUPLE_CAP
from modules.errors import ResourceLimitError, UnknownLetterError, ValidationError

log = logging.getLogger(__name__)

Letter = int

MAX_RANK = len(string.ascii_lowercase)

# quadruples drawn when the exhaustive scan is over budget
SAMPLE_QUADRUPLES = 1_000_000
_SAMPLE_BATCH = 100_000


# ── Letters ──────────────────────────────────────────────────────────────────

def letter_name(x: Letter) -> str:
    ch = string.ascii_lowercase[abs(x) - 1]
    return ch if x > 0 else ch.upper()


def letter_key(x: Letter) -> int:
    """Shortlex rank of a letter: a=0, A=1, b=2, B=3, ..."""
    return 2 * (abs(x) - 1) + (1 if x < 0 else 0)


def alphabet(rank: int) -> tuple[Letter, ...]:
    """All 2r letters in shortlex order."""
    return tuple(x for i in range(1, rank + 1) for x in (i, -i))


# ── Group and words ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class GroupSpec:
    """F_r with its free basis; delta is the hyperbolicity constant of the Cayley graph."""

    rank: int
    delta: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if not 2 <= self.rank <= MAX_RANK:
            raise ValidationError(
                f"rank must be between 2 and {MAX_RANK} (nonelementary free group), got {self.rank}",
                field="rank",
            )
        if self.delta != 0:
            raise ValidationError("the free Cayley tree is 0-hyperbolic; delta must be 0", field="delta")

    @property
    def alphabet(self) -> tuple[Letter, ...]:
        return alphabet(self.rank)

    def to_dict(self) -> dict:
        return {"rank": self.rank, "delta": str(self.delta), "generating_set": "free basis"}


@dataclass(frozen=True)
class ReducedWord:
    """
    A freely reduced word. Build through reduce(), parse_word() or the
    arithmetic below; the constructor trusts its input.
    """

    letters: tuple[Letter, ...] = ()

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return ReducedWord(self.letters[item])
        return self.letters[item]

    def __bool__(self) -> bool:
        return bool(self.letters)

    def __mul__(self, other: ReducedWord) -> ReducedWord:
        return multiply(self, other)

    def __pow__(self, n: int) -> ReducedWord:
        base = self if n >= 0 else self.inverse()
        out = IDENTITY
        for _ in range(abs(n)):
            out = multiply(out, base)
        return out

    def __lt__(self, other: ReducedWord) -> bool:
        return self.shortlex_key < other.shortlex_key

    def __str__(self) -> str:
        return "".join(letter_name(x) for x in self.letters) or "1"

    def __repr__(self) -> str:
        return f"ReducedWord({str(self)!r})"

    @property
    def shortlex_key(self) -> tuple[int, tuple[int, ...]]:
        return (len(self.letters), tuple(letter_key(x) for x in self.letters))

    def inverse(self) -> ReducedWord:
        return ReducedWord(tuple(-x for x in reversed(self.letters)))

    def max_generator(self) -> int:
        return max((abs(x) for x in self.letters), default=0)


IDENTITY = ReducedWord()


def reduce(raw: Iterable[Letter], rank: int | None = None) -> ReducedWord:
    """Free reduction; idempotent. Letters outside the rank-r alphabet raise UNKNOWN_LETTER."""
    stack: list[Letter] = []
    for x in raw:
        if not isinstance(x, int) or x == 0 or (rank is not None and abs(x) > rank):
            raise UnknownLetterError(f"letter {x!r} is outside the rank-{rank} alphabet", letter=x)
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return ReducedWord(tuple(stack))


def parse_word(text: str, rank: int) -> ReducedWord:
    """Parse the a/A text form and reduce it. "1" and "" are the identity."""
    text = text.strip()
    if text in ("", "1"):
        return IDENTITY
    letters: list[Letter] = []
    for ch in text:
        if ch.isspace():
            continue
        if ch not in string.ascii_letters:
            raise UnknownLetterError(f"unknown symbol {ch!r} in word {text!r}", letter=ch)
        index = string.ascii_lowercase.index(ch.lower()) + 1
        if index > rank:
            raise UnknownLetterError(f"letter {ch!r} is outside the rank-{rank} alphabet", letter=ch)
        letters.append(index if ch.islower() else -index)
    return reduce(letters, rank)


def common_prefix_length(x: ReducedWord, y: ReducedWord) -> int:
    n = 0
    for a, b in zip(x.letters, y.letters):
        if a != b:
            break
        n += 1
    return n


def multiply(x: ReducedWord, y: ReducedWord) -> ReducedWord:
    xl, yl = x.letters, y.letters
    i, j = len(xl), 0
    while i > 0 and j < len(yl) and xl[i - 1] == -yl[j]:
        i -= 1
        j += 1
    return ReducedWord(xl[:i] + yl[j:])


def distance(x: ReducedWord, y: ReducedWord) -> int:
    """|x^-1 y|; in the tree this is |x| + |y| - 2·(common prefix)."""
    return len(x) + len(y) - 2 * common_prefix_length(x, y)


def gromov_product(x: ReducedWord, y: ReducedWord, base: ReducedWord = IDENTITY) -> Fraction:
    return Fraction(distance(base, x) + distance(base, y) - distance(x, y), 2)


# ── Cyclic words ─────────────────────────────────────────────────────────────

def is_cyclically_reduced(w: ReducedWord) -> bool:
    return len(w) <= 1 or w.letters[0] != -w.letters[-1]


def cyclic_reduction(w: ReducedWord) -> tuple[ReducedWord, ReducedWord]:
    """Split w = c·t·c^-1 with t cyclically reduced."""
    letters = w.letters
    k = 0
    while 2 * k + 1 < len(letters) and letters[k] == -letters[len(letters) - 1 - k]:
        k += 1
    return ReducedWord(letters[:k]), ReducedWord(letters[k:len(letters) - k])


def primitive_root(t: ReducedWord) -> ReducedWord:
    """Shortest p with t = p^k."""
    n = len(t)
    for d in range(1, n + 1):
        if n % d == 0 and t.letters == t.letters[:d] * (n // d):
            return ReducedWord(t.letters[:d])
    return t


def rotate(t: ReducedWord, k: int) -> ReducedWord:
    if not t:
        return t
    k %= len(t)
    return ReducedWord(t.letters[k:] + t.letters[:k])


# ── Spheres and balls ────────────────────────────────────────────────────────

def sphere_size(rank: int, k: int) -> int:
    return 1 if k == 0 else 2 * rank * (2 * rank - 1) ** (k - 1)


def ball_size(rank: int, radius: int) -> int:
    return sum(sphere_size(rank, k) for k in range(radius + 1))


def extensions(w: ReducedWord, rank: int) -> Iterator[ReducedWord]:
    """One-letter reduced extensions of w, in shortlex order."""
    last = w.letters[-1] if w.letters else 0
    for x in alphabet(rank):
        if x != -last:
            yield ReducedWord(w.letters + (x,))


def iter_sphere(rank: int, k: int) -> Iterator[ReducedWord]:
    """Reduced words of length exactly k, shortlex order."""
    if k == 0:
        yield IDENTITY
        return
    for w in iter_sphere(rank, k - 1):
        yield from extensions(w, rank)


def iter_ball(rank: int, radius: int) -> Iterator[ReducedWord]:
    """Reduced words of length <= radius, shortlex order."""
    layer = [IDENTITY]
    for k in range(radius + 1):
        yield from layer
        if k < radius:
            layer = [v for w in layer for v in extensions(w, rank)]


# ── Generic finite metric graphs ─────────────────────────────────────────────

class MetricBallGraph:
    """A finite connected graph with a basepoint and a lazily built distance table."""

    def __init__(self, graph: nx.Graph, basepoint: Hashable) -> None:
        if basepoint not in graph:
            raise ValidationError(f"basepoint {basepoint!r} is not a vertex", field="basepoint")
        if not nx.is_connected(graph):
            raise ValidationError("metric graph must be connected", field="edges")
        self.graph = graph
        self.basepoint = basepoint
        self.vertices: list[Hashable] = [basepoint] + [v for v in graph.nodes if v != basepoint]
        self.index = {v: i for i, v in enumerate(self.vertices)}

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    def is_tree(self) -> bool:
        return nx.is_tree(self.graph)

    @cached_property
    def distances(self) -> np.ndarray:
        n = len(self.vertices)
        table = np.zeros((n, n), dtype=np.int64)
        for v, lengths in nx.all_pairs_shortest_path_length(self.graph):
            row = table[self.index[v]]
            for u, d in lengths.items():
                row[self.index[u]] = d
        return table

    def distance(self, u: Hashable, v: Hashable) -> int:
        return int(self.distances[self.index[u], self.index[v]])

    def to_dict(self) -> dict:
        return {
            "vertices": len(self.vertices),
            "edges": self.edge_count,
            "basepoint": str(self.basepoint),
            "tree": self.is_tree(),
        }


def build_ball(spec: GroupSpec, radius: int, cap: int | None = None) -> MetricBallGraph:
    """Ball of the given radius in the Cayley tree of F_r, as a MetricBallGraph on ReducedWords."""
    if radius < 0:
        raise ValidationError("radius must be non-negative", field="radius")
    cap = BALL_VERTEX_CAP if cap is None else cap
    projected = ball_size(spec.rank, radius)
    if projected > cap:
        raise ResourceLimitError(
            f"ball of radius {radius} has {projected:,} vertices (cap {cap:,})",
            projected=projected,
            cap=cap,
        )
    log.info("building rank-%d ball of radius %d (%d vertices)", spec.rank, radius, projected)
    graph = nx.Graph()
    graph.add_node(IDENTITY)
    for w in iter_ball(spec.rank, radius):
        if w:
            graph.add_edge(w[:-1], w, letter=letter_name(w.letters[-1]))
    return MetricBallGraph(graph, IDENTITY)


def load_graph(text: str) -> MetricBallGraph:
    """
    Adjacency-list import: the first non-comment line is the basepoint id,
    every further line is one edge "u v".
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    numbered = [(i + 1, ln) for i, ln in enumerate(lines) if ln]
    if not numbered:
        raise ValidationError("graph file is empty", field="basepoint")
    basepoint = numbered[0][1]
    graph = nx.Graph()
    graph.add_node(basepoint)
    for lineno, ln in numbered[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValidationError(f"line {lineno}: expected 'u v', got {ln!r}", field="edges")
        graph.add_edge(parts[0], parts[1])
    return MetricBallGraph(graph, basepoint)


# ── Four-point δ ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class DeltaEstimate:
    value: Fraction
    exact: bool
    quadruples: int
    method: str

    def to_dict(self) -> dict:
        return {
            "delta": str(self.value),
            "exact": self.exact,
            "lower_bound": not self.exact,
            "quadruples": self.quadruples,
            "method": self.method,
        }


def _exhaustive_twice_delta(dist: np.ndarray) -> int:
    """max over (w,x,y,z) of min((x|z)_w, (z|y)_w) - (x|y)_w, doubled so it stays integral."""
    n = len(dist)
    chunk = max(1, 4_000_000 // max(1, n * n))
    best = 0
    for w in range(n):
        g = dist[w][:, None] + dist[w][None, :] - dist
        for start in range(0, n, chunk):
            rows = g[start:start + chunk]
            block = np.minimum(rows[:, :, None], g[None, :, :])
            best = max(best, int((block.max(axis=1) - rows).max()))
    return best


def _sampled_twice_delta(dist: np.ndarray, samples: int, seed: int) -> int:
    rng = np.random.default_rng(seed)
    n = len(dist)
    best = 0
    remaining = samples
    while remaining > 0:
        size = min(_SAMPLE_BATCH, remaining)
        q = rng.integers(0, n, size=(size, 4))
        x, y, z, w = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
        sums = np.stack(
            [dist[x, y] + dist[z, w], dist[x, z] + dist[y, w], dist[x, w] + dist[y, z]],
            axis=1,
        )
        sums.sort(axis=1)
        best = max(best, int((sums[:, 2] - sums[:, 1]).max()))
        remaining -= size
    return best


def four_point_delta(
    graph: MetricBallGraph,
    budget: int | None = None,
    seed: int = 0,
    allow_sampling: bool = True,
    shortcut_trees: bool = True,
) -> DeltaEstimate:
    """
    Four-point δ: the least δ with (x|y)_w >= min((x|z)_w, (z|y)_w) - δ for
    every quadruple. Exact when the quadruple count fits the budget; trees
    are 0-hyperbolic and need no scan. Over budget the estimate is a sampled
    lower bound, or RESOURCE_LIMIT when sampling is disallowed.
    """
    n = len(graph)
    budget = QUADRUPLE_CAP if budget is None else budget
    if n <= 1 or (shortcut_trees and graph.is_tree()):
        return DeltaEstimate(Fraction(0), True, 0, "tree")
    quadruples = n ** 4
    if quadruples <= budget:
        log.info("exhaustive four-point scan over %d quadruples", quadruples)
        return DeltaEstimate(Fraction(_exhaustive_twice_delta(graph.distances), 2), True, quadruples, "exhaustive")
    if not allow_sampling:
        raise ResourceLimitError(
            f"{quadruples:,} quadruples exceed the budget of {budget:,}",
            quadruples=quadruples,
            cap=budget,
        )
    samples = min(budget, SAMPLE_QUADRUPLES)
    log.warning("quadruple budget exceeded; sampling %d quadruples (lower bound)", samples)
    return DeltaEstimate(Fraction(_sampled_twice_delta(graph.distances, samples, seed), 2), False, samples, "sampled")
