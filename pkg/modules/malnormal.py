"""
Almost malnormality and bounded coset intersections.

A collection {H_i} of subgroups of F_r is almost malnormal when
H_i ∩ g^-1 H_j g is infinite only for i = j and g ∈ H_i. F_r is torsion
free, so "infinite" is "nontrivial", and the question is decided exactly
by fiber products: every cycle in a component of core(H_i) × core(H_j)
reads an element of H_i conjugated into H_j. The component holding the
basepoint pair of core(H_i) × core(H_i) is the exempt g ∈ H_i case.

The finite-scale side measures diam(N_R(gH) ∩ N_R(g'H')) inside a ball of
radius N. For a malnormal collection the largest value stabilises as N
grows; for a non-malnormal one it grows with N.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import networkx as nx

from config import COSET_PAIR_CAP
from modules.errors import CosetEqualError, EmptyCollectionError, ValidationError
from modules.stallings import CoreGraph, CosetRef, coset, coset_distance, coset_min_rep, membership
from modules.words import IDENTITY, Letter, ReducedWord, alphabet, distance, iter_ball, multiply, reduce

log = logging.getLogger(__name__)

EMPTY = "EMPTY"

Pair = tuple[int, int]


# ── Fiber products ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class FiberComponent:
    vertices: frozenset[Pair]
    has_basepoint_pair: bool
    betti: int
    cycle: ReducedWord | None
    # (u, v) the cycle is based at
    anchor: Pair | None = None

    def to_dict(self) -> dict:
        return {
            "vertices": sorted(list(p) for p in self.vertices),
            "has_basepoint_pair": self.has_basepoint_pair,
            "betti": self.betti,
            "cycle": str(self.cycle) if self.cycle is not None else None,
            "anchor": list(self.anchor) if self.anchor is not None else None,
        }


def _product_graph(core1: CoreGraph, core2: CoreGraph) -> nx.MultiGraph:
    graph = nx.MultiGraph()
    for u in range(len(core1)):
        for v in range(len(core2)):
            graph.add_node((u, v))
    for u, x, u2 in core1.edges:
        for v, out in enumerate(core2.transitions):
            v2 = out.get(x)
            if v2 is not None:
                graph.add_edge((u, v), (u2, v2), key=(u, v, x), letter=x)
    return graph


def _trim(graph: nx.MultiGraph) -> nx.MultiGraph:
    graph = graph.copy()
    while True:
        leaves = [n for n, d in graph.degree() if d <= 1]
        if not leaves:
            return graph
        graph.remove_nodes_from(leaves)


def _sample_cycle(core1: CoreGraph, core2: CoreGraph, nodes: set[Pair], anchor: Pair) -> ReducedWord:
    """Label of a nontrivial closed path at anchor: tree path, a positively read non-tree edge, tree path back."""
    rank = core1.rank
    paths: dict[Pair, tuple[Letter, ...]] = {anchor: ()}
    tree: set[tuple[Pair, Letter]] = set()
    queue = deque([anchor])
    while queue:
        u, v = queue.popleft()
        for x in alphabet(rank):
            t1, t2 = core1.step(u, x), core2.step(v, x)
            if t1 is None or t2 is None or (t1, t2) not in nodes or (t1, t2) in paths:
                continue
            paths[(t1, t2)] = paths[(u, v)] + (x,)
            tree.add(((u, v), x))
            tree.add(((t1, t2), -x))
            queue.append((t1, t2))
    for p in sorted(nodes):
        for x in range(1, rank + 1):
            t1, t2 = core1.step(p[0], x), core2.step(p[1], x)
            if t1 is None or t2 is None or (t1, t2) not in nodes or (p, x) in tree:
                continue
            back = ReducedWord(paths[(t1, t2)]).inverse()
            return reduce(paths[p] + (x,) + back.letters)
    raise AssertionError("component with positive Betti number has no non-tree edge")


def fiber_product(core1: CoreGraph, core2: CoreGraph) -> list[FiberComponent]:
    """
    Components of the product automaton. Cyclic components are trimmed to
    their cores and carry a sample cycle based at the vertex closest to the
    basepoints; acyclic ones keep their full vertex set.
    """
    graph = _product_graph(core1, core2)
    components = []
    for nodes in nx.connected_components(graph):
        sub = graph.subgraph(nodes)
        betti = sub.number_of_edges() - sub.number_of_nodes() + 1
        has_base = (0, 0) in nodes
        if betti == 0:
            components.append(FiberComponent(frozenset(nodes), has_base, 0, None))
            continue
        kept = set(_trim(sub).nodes)
        anchor = min(kept, key=lambda p: (core1.depth[p[0]] + core2.depth[p[1]], p))
        cycle = _sample_cycle(core1, core2, kept, anchor)
        components.append(FiberComponent(frozenset(kept), has_base, betti, cycle, anchor))
    components.sort(key=lambda c: (not c.has_basepoint_pair, min(c.vertices)))
    log.debug(
        "fiber product %s x %s: %d components, %d cyclic",
        core1.name, core2.name, len(components), sum(1 for c in components if c.betti),
    )
    return components


# ── Malnormality ─────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class MalnormalWitness:
    """element ≠ 1 in H_i with g·element·g^-1 in H_j, and not (i = j and g in H_i)."""

    g: ReducedWord
    i: int
    j: int
    element: ReducedWord

    def to_dict(self) -> dict:
        return {"g": str(self.g), "i": self.i, "j": self.j, "element": str(self.element)}


@dataclass(frozen=True)
class MalnormalityCertificate:
    verdict: bool
    witness: MalnormalWitness | None = None
    # infinite intersection; in a torsion-free group, nontrivial
    condition: str = "H_i ∩ g^-1 H_j g infinite"

    def check(self, collection: list[CoreGraph]) -> bool:
        """Re-verify a negative verdict by direct word arithmetic."""
        if self.verdict:
            return self.witness is None
        w = self.witness
        if w is None or not w.element:
            return False
        hi, hj = collection[w.i], collection[w.j]
        conjugated = multiply(multiply(w.g, w.element), w.g.inverse())
        exempt = w.i == w.j and membership(hi, w.g)
        return membership(hi, w.element) and membership(hj, conjugated) and not exempt

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "condition": self.condition,
            "witness": self.witness.to_dict() if self.witness else None,
        }


def is_almost_malnormal(collection: list[CoreGraph]) -> MalnormalityCertificate:
    if not collection:
        raise EmptyCollectionError("malnormality of an empty collection is undefined")
    for i, j in product(range(len(collection)), repeat=2):
        hi, hj = collection[i], collection[j]
        for comp in fiber_product(hi, hj):
            if comp.betti == 0 or (i == j and comp.has_basepoint_pair):
                continue
            u, v = comp.anchor
            p, q = hi.paths_from_base[u], hj.paths_from_base[v]
            element = multiply(multiply(p, comp.cycle), p.inverse())
            g = multiply(q, p.inverse())
            witness = MalnormalWitness(g, i, j, element)
            log.info("not malnormal: %s conjugates %s from %s into %s", g, element, hi.name, hj.name)
            return MalnormalityCertificate(False, witness)
    return MalnormalityCertificate(True)


# ── Bounded coset intersections ──────────────────────────────────────────────

def _tree_diameter(points: list[ReducedWord]) -> int:
    """Double sweep; exact for finite subsets of a tree."""
    far = max(points, key=lambda w: (distance(points[0], w), w.shortlex_key))
    return max(distance(far, w) for w in points)


def coset_intersection_diameter(c1: CosetRef, c2: CosetRef, R: int, ball_radius: int) -> int | str:
    """diam of {w : |w| <= ball_radius, d(w, c1) <= R, d(w, c2) <= R}, or EMPTY."""
    if c1 == c2:
        raise CosetEqualError(f"cosets {c1} and {c2} coincide", coset=c1.to_dict())
    if R < 0 or ball_radius < R:
        raise ValidationError("need 0 <= R <= ball_radius", field="R")
    points = [
        w for w in iter_ball(c1.core.rank, ball_radius)
        if coset_distance(c1, w) <= R and coset_distance(c2, w) <= R
    ]
    return _tree_diameter(points) if points else EMPTY


@dataclass
class BciSample:
    first: CosetRef
    second: CosetRef
    diameter: int | str

    def to_dict(self) -> dict:
        return {"pair": [self.first.to_dict(), self.second.to_dict()], "diameter": self.diameter}


@dataclass
class BciReport:
    R: int
    ball_radius: int
    samples: list[BciSample] = field(default_factory=list)
    empty_pairs: int = 0
    truncated: bool = False

    @property
    def max_diameter(self) -> int | None:
        values = [s.diameter for s in self.samples if s.diameter != EMPTY]
        return max(values) if values else None

    @property
    def D_emp(self) -> int:
        observed = self.max_diameter
        return 1 if observed is None else observed + 1

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "ball_radius": self.ball_radius,
            "generating_set": "free basis",
            "D_emp": self.D_emp,
            "max_diameter": self.max_diameter,
            "nonempty_pairs": len(self.samples),
            "empty_pairs": self.empty_pairs,
            "truncated": self.truncated,
            "samples": [s.to_dict() for s in self.samples],
        }


def _neighbourhood(core: CoreGraph, R: int, ball_radius: int) -> list[ReducedWord]:
    """Ball words within R of H itself."""
    return [w for w in iter_ball(core.rank, ball_radius) if len(coset_min_rep(core, w.inverse())) <= R]


def _canonical_cosets(core: CoreGraph, max_rep: int) -> int:
    return sum(1 for w in iter_ball(core.rank, max_rep) if coset_min_rep(core, w) == w)


def bci_report(collection: list[CoreGraph], R: int, ball_radius: int, cap: int | None = None) -> BciReport:
    """
    Diameters of N_R(H_i) ∩ N_R(gH_j) ∩ B(ball_radius) over every pair
    with |g| <= ball_radius - R, pairs translated so the first coset is H_i.
    Only pairs whose intersection is non-empty are listed; the others are
    counted in empty_pairs.
    """
    if not collection:
        raise EmptyCollectionError("bci needs at least one subgroup")
    if R < 0 or ball_radius < R:
        raise ValidationError("need 0 <= R <= ball_radius", field="R")
    cap = COSET_PAIR_CAP if cap is None else cap
    rank = collection[0].rank
    max_rep = ball_radius - R
    near_u = list(iter_ball(rank, R))
    report = BciReport(R, ball_radius)
    log.info("bci scan: %d subgroups, R=%d, ball radius %d", len(collection), R, ball_radius)

    total_pairs = 0
    for i, hi in enumerate(collection):
        base = coset(hi, IDENTITY)
        near = _neighbourhood(hi, R, ball_radius)
        for j, hj in enumerate(collection):
            count = _canonical_cosets(hj, max_rep)
            total_pairs += count - (1 if i == j else 0)
            candidates = {coset(hj, multiply(w, u)) for w in near for u in near_u}
            candidates = sorted(
                (c for c in candidates if len(c.rep) <= max_rep and not (i == j and not c.rep)),
                key=lambda c: c.sort_key,
            )
            for c in candidates:
                points = [w for w in near if coset_distance(c, w) <= R]
                if not points:
                    continue
                if len(report.samples) >= cap:
                    report.truncated = True
                    break
                report.samples.append(BciSample(base, c, _tree_diameter(points)))
    report.empty_pairs = total_pairs - len(report.samples) if not report.truncated else 0
    log.info("bci: %d non-empty pairs, D_emp %d", len(report.samples), report.D_emp)
    return report
