"""
Stallings core graphs of finitely generated subgroups of F_r.

A subgroup H = <w_1, ..., w_k> is represented by its folded core graph:
vertex 0 is the basepoint, and the reduced words labelling closed paths at
the basepoint are exactly the elements of H. Every query below is a walk in
that graph:

  membership                 does w close up at the basepoint
  coset_min_rep              shortlex-least element of w·H
  quasiconvexity_constant    λ, the basepoint eccentricity
  limit_prefix_extends       does the cylinder [w] meet Λ(H)

Left cosets gH are handled by "hanging" g off the graph: reading g^-1
backwards from the basepoint cancels as much of g as the graph allows; what
is left (the hanging word) is a path glued onto the core at a junction
vertex. The canonical representative is the hanging word followed by the
shortlex-least geodesic from the junction back to the basepoint, and the
translated limit set gΛ(H) is read off the same picture.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable

from networkx.utils import UnionFind

from config import ELEMENT_CAP
from modules.errors import NotProperError, ResourceLimitError, TrivialSubgroupError
from modules.words import IDENTITY, Letter, ReducedWord, alphabet, letter_name, multiply, reduce

log = logging.getLogger(__name__)

Edge = tuple[int, Letter, int]


class CoreGraph:
    """Folded core graph; immutable after fold()."""

    def __init__(self, rank: int, generators: tuple[ReducedWord, ...], transitions: list[dict[Letter, int]], name: str = "") -> None:
        self.rank = rank
        self.generators = generators
        self.transitions = transitions
        self.name = name or "<" + ", ".join(str(g) for g in generators) + ">"

        self.depth, self.paths_from_base = self._bfs_from_base()
        self.paths_to_base = [self._geodesic_to_base(v) for v in range(len(transitions))]
        self.lam = max(self.depth)
        self.finite_index = all(len(out) == 2 * rank for out in transitions)
        self.proper = not self.finite_index
        self.alive = _alive_states(transitions)

    def __len__(self) -> int:
        return len(self.transitions)

    def __repr__(self) -> str:
        return f"CoreGraph({self.name}, vertices={len(self)}, lambda={self.lam})"

    @property
    def canonical_key(self) -> tuple:
        """Rank and the relabelled transition table; equal iff the subgroups are equal."""
        return (self.rank, tuple(tuple(sorted(out.items())) for out in self.transitions))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CoreGraph):
            return NotImplemented
        return self.canonical_key == other.canonical_key

    def __hash__(self) -> int:
        return hash(self.canonical_key)

    @property
    def edges(self) -> list[Edge]:
        """Positively labelled edges, sorted."""
        return sorted(
            (v, x, t) for v, out in enumerate(self.transitions) for x, t in out.items() if x > 0
        )

    def step(self, v: int, x: Letter) -> int | None:
        return self.transitions[v].get(x)

    def can_continue(self, v: int, arrival: Letter = 0) -> bool:
        """Is there an infinite reduced path leaving v that does not start with arrival^-1."""
        return any((t, y) in self.alive for y, t in self.transitions[v].items() if y != -arrival)

    def alive_moves(self, v: int, arrival: Letter = 0) -> list[tuple[Letter, int]]:
        """Moves out of v that start some infinite reduced path, shortlex order of the letter."""
        return [
            (y, self.transitions[v][y])
            for y in alphabet(self.rank)
            if y != -arrival and y in self.transitions[v] and (self.transitions[v][y], y) in self.alive
        ]

    def _bfs_from_base(self) -> tuple[list[int], list[ReducedWord]]:
        n = len(self.transitions)
        depth = [-1] * n
        paths: list[ReducedWord] = [IDENTITY] * n
        depth[0] = 0
        queue = deque([0])
        while queue:
            v = queue.popleft()
            for x in alphabet(self.rank):
                t = self.transitions[v].get(x)
                if t is not None and depth[t] < 0:
                    depth[t] = depth[v] + 1
                    paths[t] = ReducedWord(paths[v].letters + (x,))
                    queue.append(t)
        return depth, paths

    def _geodesic_to_base(self, v: int) -> ReducedWord:
        letters: list[Letter] = []
        while v != 0:
            for x in alphabet(self.rank):
                t = self.transitions[v].get(x)
                if t is not None and self.depth[t] == self.depth[v] - 1:
                    letters.append(x)
                    v = t
                    break
        return ReducedWord(tuple(letters))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "generators": [str(g) for g in self.generators],
            "vertices": len(self),
            "edges": [[u, letter_name(x), v] for u, x, v in self.edges],
            "lambda": self.lam,
            "proper": self.proper,
            "finite_index": self.finite_index,
            "generating_set": "free basis",
        }


@dataclass(frozen=True)
class CosetRef:
    """A left coset rep·H with rep the shortlex-least element. Build through coset()."""

    rep: ReducedWord
    core: CoreGraph

    def __str__(self) -> str:
        return f"{self.rep}·{self.core.name}" if self.rep else self.core.name

    @property
    def sort_key(self) -> tuple:
        return (self.rep.shortlex_key, self.core.name)

    def to_dict(self) -> dict:
        return {"rep": str(self.rep), "subgroup": self.core.name}


# ── Folding ──────────────────────────────────────────────────────────────────

def _oriented(u: int, x: Letter, v: int) -> Edge:
    return (u, x, v) if x > 0 else (v, -x, u)


def _fold_edges(edges: Iterable[Edge], n_vertices: int, rank: int) -> list[dict[Letter, int]]:
    """Fold, trim hanging trees away from vertex 0, relabel by shortlex BFS from vertex 0."""
    uf = UnionFind(range(n_vertices))
    current = set(edges)
    while True:
        merged = False
        out: dict[tuple[int, Letter], int] = {}
        for u, x, v in current:
            u, v = uf[u], uf[v]
            for s, label, t in ((u, x, v), (v, -x, u)):
                prev = out.get((s, label))
                if prev is None:
                    out[(s, label)] = t
                elif uf[prev] != uf[t]:
                    uf.union(prev, t)
                    merged = True
        current = {(uf[u], x, uf[v]) for u, x, v in current}
        if not merged:
            break

    base = uf[0]
    while True:
        degree: dict[int, int] = {}
        for u, _, v in current:
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
        leaves = {v for v, d in degree.items() if d <= 1 and v != base}
        if not leaves:
            break
        current = {(u, x, v) for u, x, v in current if u not in leaves and v not in leaves}

    adjacency: dict[int, dict[Letter, int]] = {base: {}}
    for u, x, v in current:
        adjacency.setdefault(u, {})[x] = v
        adjacency.setdefault(v, {})[-x] = u

    order = {base: 0}
    queue = deque([base])
    while queue:
        v = queue.popleft()
        for x in alphabet(rank):
            t = adjacency[v].get(x)
            if t is not None and t not in order:
                order[t] = len(order)
                queue.append(t)

    transitions: list[dict[Letter, int]] = [{} for _ in order]
    for v, out_edges in adjacency.items():
        for x, t in out_edges.items():
            transitions[order[v]][x] = order[t]
    return transitions


def _alive_states(transitions: list[dict[Letter, int]]) -> frozenset[tuple[int, Letter]]:
    """
    States (vertex, arrival letter) from which an infinite reduced path
    continues: the greatest set closed under "has a non-backtracking move
    into the set".
    """
    states = {(t, y) for out in transitions for y, t in out.items()}
    changed = True
    while changed:
        changed = False
        for t, y in list(states):
            if not any((t2, y2) in states for y2, t2 in transitions[t].items() if y2 != -y):
                states.discard((t, y))
                changed = True
    return frozenset(states)


def fold(generators: Iterable[ReducedWord], rank: int, name: str = "") -> CoreGraph:
    """
    Stallings folding of the bouquet of generator loops.

    Raises TRIVIAL_SUBGROUP when every generator is the identity and
    NOT_PROPER when the folded graph is a complete automaton (finite index).
    """
    words = tuple(reduce(g.letters, rank) for g in generators)
    words = tuple(w for w in words if w)
    if not words:
        raise TrivialSubgroupError(f"subgroup {name or '<>'} is trivial", subgroup=name)

    edges: list[Edge] = []
    n_vertices = 1
    for w in words:
        prev = 0
        for i, x in enumerate(w.letters):
            if i == len(w) - 1:
                nxt = 0
            else:
                nxt = n_vertices
                n_vertices += 1
            edges.append(_oriented(prev, x, nxt))
            prev = nxt

    core = CoreGraph(rank, words, _fold_edges(edges, n_vertices, rank), name)
    log.debug("folded %s: %d vertices, lambda %d", core.name, len(core), core.lam)
    if core.finite_index:
        raise NotProperError(
            f"subgroup {core.name} has finite index {len(core)}; its limit set is all of the boundary",
            subgroup=core.name,
            index=len(core),
        )
    return core


def conjugate_core(core: CoreGraph, g: ReducedWord) -> CoreGraph:
    """Core graph of g·H·g^-1."""
    gi = g.inverse()
    gens = [multiply(multiply(g, h), gi) for h in core.generators]
    name = core.name if not g else f"{g}{core.name}{gi}"
    return fold(gens, core.rank, name)


# ── Queries ──────────────────────────────────────────────────────────────────

def read(core: CoreGraph, w: ReducedWord, start: int = 0) -> int | None:
    """End vertex of the path labelled w from start, or None if it falls off the graph."""
    v: int | None = start
    for x in w.letters:
        v = core.transitions[v].get(x)
        if v is None:
            return None
    return v


def membership(core: CoreGraph, w: ReducedWord) -> bool:
    return read(core, w) == 0


def hanging_split(core: CoreGraph, w: ReducedWord) -> tuple[ReducedWord, int]:
    """
    Split w·H into (hanging word, junction vertex): cancel the longest suffix
    s of w whose inverse reads from the basepoint; the rest hangs off the
    vertex where that reading stops.
    """
    v = 0
    k = len(w)
    while k > 0:
        t = core.transitions[v].get(-w.letters[k - 1])
        if t is None:
            break
        v = t
        k -= 1
    return w[:k], v


def coset_min_rep(core: CoreGraph, w: ReducedWord) -> ReducedWord:
    hanging, v = hanging_split(core, w)
    return multiply(hanging, core.paths_to_base[v])


def coset(core: CoreGraph, w: ReducedWord) -> CosetRef:
    return CosetRef(coset_min_rep(core, w), core)


def coset_distance(c: CosetRef, x: ReducedWord) -> int:
    """Exact word distance d(x, gH) = |shortlex-least element of x^-1·g·H|."""
    return len(coset_min_rep(c.core, multiply(x.inverse(), c.rep)))


def quasiconvexity_constant(core: CoreGraph) -> int:
    return core.lam


def limit_prefix_extends(core: CoreGraph, w: ReducedWord) -> bool:
    """True iff w is a prefix of some point of Λ(H)."""
    v = read(core, w)
    if v is None:
        return False
    return core.can_continue(v, w.letters[-1] if w else 0)


def enumerate_elements(core: CoreGraph, max_length: int, cap: int | None = None) -> list[ReducedWord]:
    """Elements of H of length <= max_length, shortlex order."""
    cap = ELEMENT_CAP if cap is None else cap
    found = [IDENTITY]
    explored = 0
    stack: list[tuple[int, Letter, tuple[Letter, ...]]] = [(0, 0, ())]
    while stack:
        v, arrival, letters = stack.pop()
        if len(letters) == max_length:
            continue
        for y, t in core.transitions[v].items():
            if y == -arrival:
                continue
            explored += 1
            if explored > cap:
                raise ResourceLimitError(
                    f"more than {cap:,} paths while enumerating {core.name} up to length {max_length}",
                    cap=cap,
                )
            path = letters + (y,)
            if t == 0:
                found.append(ReducedWord(path))
            stack.append((t, y, path))
    return sorted(set(found))

