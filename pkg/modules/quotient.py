"""
Depth-n approximations of the decomposition space M = ∂F_r / 𝒞.

∂F_r is the Cantor set of infinite reduced words; its depth-n cylinders
[w] (|w| = n) are the clopen pieces at scale n. M collapses every
translated limit set gΛ(H_i) to a point, so at depth n the picture is a
partition of the cylinders: union the cylinders met by each translate
that meets at least two of them (a "separating" coset); everything else
stays a singleton. Refinement maps between depths form the inverse system
standing in for M itself.

A translate gΛ(H) is read from the hanging split of g (see stallings):
points of gΛ(H) are w1·ξ with w1 the hanging word and ξ an infinite
reduced path leaving the junction vertex. It meets two depth-n cylinders
only if |w1| < n, which bounds the enumeration of separating cosets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator

from networkx.utils import UnionFind

from config import CYLINDER_CAP, ELEMENT_CAP
from modules.errors import NotMalnormalError, ResourceLimitError, ValidationError
from modules.malnormal import MalnormalityCertificate, is_almost_malnormal
from modules.stallings import CoreGraph, CosetRef, coset, hanging_split
from modules.words import IDENTITY, ReducedWord, common_prefix_length, iter_sphere, sphere_size

log = logging.getLogger(__name__)

PARABOLIC = "PARABOLIC"
SINGLETON = "SINGLETON"


# ── Translates and cylinders ─────────────────────────────────────────────────

def translate_meets_cylinder(c: CosetRef, w: ReducedWord) -> bool:
    """[w] ∩ gΛ(H) ≠ ∅ for c = gH."""
    core = c.core
    hanging, v = hanging_split(core, c.rep)
    arrival = hanging.letters[-1] if hanging else 0
    k = common_prefix_length(hanging, w)
    if k == len(w):
        return core.can_continue(v, arrival)
    if k < len(hanging):
        return False
    for x in w.letters[len(hanging):]:
        t = core.step(v, x)
        if t is None:
            return False
        v, arrival = t, x
    return core.can_continue(v, arrival)


def cylinders_met(c: CosetRef, n: int, limit: int | None = None) -> list[ReducedWord]:
    """Depth-n cylinders meeting gΛ(H), shortlex order; stops early after `limit` of them."""
    core = c.core
    hanging, v = hanging_split(core, c.rep)
    arrival = hanging.letters[-1] if hanging else 0
    if not core.can_continue(v, arrival):
        return []
    if n <= len(hanging):
        return [hanging[:n]]
    found: list[ReducedWord] = []
    stack = [(v, arrival, hanging.letters)]
    while stack:
        u, last, letters = stack.pop()
        if len(letters) == n:
            found.append(ReducedWord(letters))
            if limit is not None and len(found) >= limit:
                break
            if len(found) > CYLINDER_CAP:
                raise ResourceLimitError(f"{c} meets more than {CYLINDER_CAP:,} cylinders", cap=CYLINDER_CAP)
            continue
        # reversed so the stack pops in shortlex order
        for y, t in reversed(core.alive_moves(u, last)):
            stack.append((t, y, letters + (y,)))
    return found


def separates(c: CosetRef, n: int) -> bool:
    return len(cylinders_met(c, n, limit=2)) >= 2


def _paths_from_base(core: CoreGraph, max_length: int) -> Iterator[ReducedWord]:
    """Labels of reduced paths from the basepoint of length <= max_length."""
    stack: list[tuple[int, int, tuple[int, ...]]] = [(0, 0, ())]
    produced = 0
    while stack:
        v, arrival, letters = stack.pop()
        yield ReducedWord(letters)
        produced += 1
        if produced > ELEMENT_CAP:
            raise ResourceLimitError(
                f"more than {ELEMENT_CAP:,} paths in {core.name} up to length {max_length}",
                cap=ELEMENT_CAP,
            )
        if len(letters) < max_length:
            for y, t in core.transitions[v].items():
                if y != -arrival:
                    stack.append((t, y, letters + (y,)))


def _candidate_words(core: CoreGraph, n: int, lengths: set[int]) -> Iterator[ReducedWord]:
    """
    Every reduced g with |g| in lengths whose hanging word is shorter than n:
    g = w1·s with |w1| < n and s^-1 a path from the basepoint.
    """
    top = max(lengths)
    for path in _paths_from_base(core, top):
        s = path.inverse()
        for k in range(n):
            if k + len(s) not in lengths:
                continue
            for w1 in iter_sphere(core.rank, k):
                if w1 and path and w1.letters[-1] == path.letters[-1]:
                    continue
                yield ReducedWord(w1.letters + s.letters)


def enumeration_bound(collection: list[CoreGraph], n: int) -> int:
    lam = max((core.lam for core in collection), default=0)
    return n + 2 * lam + 2


def _scan(collection: list[CoreGraph], n: int, lengths: set[int]) -> dict[tuple, tuple[int, CosetRef]]:
    found: dict[tuple, tuple[int, CosetRef]] = {}
    for index, core in enumerate(collection):
        seen: set[ReducedWord] = set()
        for g in _candidate_words(core, n, lengths):
            c = coset(core, g)
            if c.rep in seen:
                continue
            seen.add(c.rep)
            if separates(c, n):
                found[(c.rep.shortlex_key, index)] = (index, c)
    return found


@dataclass
class SeparatingCosets:
    depth: int
    bound: int
    cosets: list[CosetRef]
    subgroup_index: list[int]
    # lengths bound+1 and bound+2 rechecked; any coset found there but not below is listed
    missed: list[CosetRef] = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return not self.missed

    def __len__(self) -> int:
        return len(self.cosets)

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "enumeration_bound": self.bound,
            "count": len(self.cosets),
            "cosets": [c.to_dict() for c in self.cosets],
            "completeness": {
                "checked_lengths": [self.bound + 1, self.bound + 2],
                "complete": self.complete,
                "missed": [c.to_dict() for c in self.missed],
            },
        }


def find_separating_cosets(collection: list[CoreGraph], n: int, check: bool = True) -> SeparatingCosets:
    """
    Cosets gH_i whose limit set meets at least two depth-n cylinders, with
    canonical reps up to n + 2λ_max + 2, then rechecked at the next two
    lengths.
    """
    if n < 1:
        raise ValidationError("depth must be at least 1", field="depth")
    bound = enumeration_bound(collection, n)
    log.info("separating cosets at depth %d: %d subgroups, reps up to length %d", n, len(collection), bound)
    found = _scan(collection, n, set(range(bound + 1)))
    keys = sorted(found)
    result = SeparatingCosets(n, bound, [found[k][1] for k in keys], [found[k][0] for k in keys])
    if check and collection:
        extra = _scan(collection, n, {bound + 1, bound + 2})
        result.missed = [extra[k][1] for k in sorted(extra) if k not in found]
        if result.missed:
            log.warning("separating coset enumeration incomplete at depth %d: %d missed", n, len(result.missed))
    return result


def separating_cosets(collection: list[CoreGraph], n: int) -> list[CosetRef]:
    return find_separating_cosets(collection, n).cosets


# ── Partitions ───────────────────────────────────────────────────────────────

@dataclass
class PartitionClass:
    cylinders: tuple[ReducedWord, ...]
    kind: str
    coset: CosetRef | None = None
    # every separating coset merged into this class
    cosets: tuple[CosetRef, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "coset": self.coset.to_dict() if self.coset else None,
            "cylinders": [str(w) for w in self.cylinders],
            "merged_cosets": len(self.cosets),
        }


@dataclass
class CylinderPartition:
    rank: int
    depth: int
    classes: list[PartitionClass]
    separating: SeparatingCosets
    malnormality: MalnormalityCertificate | None = None
    _index: dict[ReducedWord, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._index = {w: i for i, cls in enumerate(self.classes) for w in cls.cylinders}

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def cylinders(self) -> list[ReducedWord]:
        return sorted(self._index)

    def class_of(self, w: ReducedWord) -> int:
        """Class index of the depth-n cylinder containing w (|w| >= depth)."""
        return self._index[w[:self.depth]]

    @property
    def parabolic_count(self) -> int:
        return sum(1 for c in self.classes if c.kind == PARABOLIC)

    @property
    def singleton_count(self) -> int:
        return sum(1 for c in self.classes if c.kind == SINGLETON)

    @property
    def coalesced(self) -> list[int]:
        """Classes formed by more than one separating coset."""
        return [i for i, c in enumerate(self.classes) if len(c.cosets) > 1]

    def nerve_edges(self) -> list[tuple[int, int]]:
        """Pairs of classes holding cylinders with a common length-(n-1) prefix."""
        by_prefix: dict[ReducedWord, set[int]] = {}
        for w, i in self._index.items():
            by_prefix.setdefault(w[:-1], set()).add(i)
        edges = {pair for members in by_prefix.values() for pair in combinations(sorted(members), 2)}
        return sorted(edges)

    def countability(self) -> dict:
        return {"parabolic": self.parabolic_count, "singleton": self.singleton_count}

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "cylinders": len(self._index),
            "class_count": len(self.classes),
            "countability": self.countability(),
            "coalesced_classes": self.coalesced,
            "separating": self.separating.to_dict(),
            "classes": [c.to_dict() for c in self.classes],
        }


def require_malnormal(collection: list[CoreGraph]) -> MalnormalityCertificate | None:
    if not collection:
        return None
    cert = is_almost_malnormal(collection)
    if not cert.verdict:
        w = cert.witness
        raise NotMalnormalError(
            f"collection is not almost malnormal: {w.g}·{w.element}·{w.g}^-1 lies in "
            f"{collection[w.j].name} with {w.element} in {collection[w.i].name}",
            certificate=cert,
        )
    return cert


def decomposition_partition(collection: list[CoreGraph], n: int, rank: int | None = None) -> CylinderPartition:
    rank = collection[0].rank if collection else rank
    if rank is None:
        raise ValidationError("rank is required for an empty collection", field="rank")
    if n < 1:
        raise ValidationError("depth must be at least 1", field="depth")
    if sphere_size(rank, n) > CYLINDER_CAP:
        raise ResourceLimitError(
            f"depth {n} has {sphere_size(rank, n):,} cylinders (cap {CYLINDER_CAP:,})",
            cap=CYLINDER_CAP,
        )
    cert = require_malnormal(collection)

    cylinders = list(iter_sphere(rank, n))
    uf = UnionFind(cylinders)
    seps = find_separating_cosets(collection, n)
    owners: dict[ReducedWord, list[CosetRef]] = {}
    for c in seps.cosets:
        met = cylinders_met(c, n)
        for w in met[1:]:
            uf.union(met[0], w)
        owners.setdefault(met[0], []).append(c)

    # Λ(H_i) inside a single cylinder still marks that cylinder
    limit_owner: dict[ReducedWord, CosetRef] = {}
    for core in collection:
        home = coset(core, IDENTITY)
        met = cylinders_met(home, n, limit=2)
        if len(met) == 1:
            limit_owner.setdefault(met[0], home)

    merged_by: dict = {}
    for w, cs in owners.items():
        merged_by.setdefault(uf[w], []).extend(cs)

    classes = []
    for group in list(uf.to_sets()):
        members = tuple(sorted(group))
        cs = tuple(sorted(merged_by.get(uf[members[0]], []), key=lambda c: c.sort_key))
        if cs:
            classes.append(PartitionClass(members, PARABOLIC, cs[0], cs))
        elif members[0] in limit_owner:
            classes.append(PartitionClass(members, PARABOLIC, limit_owner[members[0]], ()))
        else:
            classes.append(PartitionClass(members, SINGLETON))
    classes.sort(key=lambda c: c.cylinders[0].shortlex_key)

    partition = CylinderPartition(rank, n, classes, seps, cert)
    if partition.coalesced:
        log.warning("depth %d: %d classes formed by more than one coset", n, len(partition.coalesced))
    log.info("depth %d partition: %d cylinders, %d classes", n, len(cylinders), len(classes))
    return partition


# ── Refinement ───────────────────────────────────────────────────────────────

def refinement_map(coarse: CylinderPartition, fine: CylinderPartition) -> tuple[list[int], bool]:
    """Fine class index -> coarse class index; the flag says every fine class has a single image."""
    if fine.depth < coarse.depth:
        raise ValidationError("refinement goes from a shallower to a deeper partition", field="deeper")
    mapping: list[int] = []
    well_defined = True
    for cls in fine.classes:
        images = {coarse.class_of(w) for w in cls.cylinders}
        if len(images) > 1:
            well_defined = False
        mapping.append(min(images))
    return mapping, well_defined


def compose_maps(first: list[int], second: list[int]) -> list[int]:
    """first: mid -> coarse, second: fine -> mid; returns fine -> coarse."""
    return [first[k] for k in second]


@dataclass
class RefinementReport:
    depth: int
    deeper: int
    coarse_classes: int
    fine_classes: int
    mapping: list[int]
    well_defined: bool
    surjective: bool
    children: list[int]
    usc: dict
    countability: dict
    coarse: CylinderPartition | None = field(default=None, repr=False)
    fine: CylinderPartition | None = field(default=None, repr=False)

    @property
    def perfect(self) -> bool:
        return all(k >= 2 for k in self.children)

    @property
    def unsplit(self) -> list[int]:
        return [i for i, k in enumerate(self.children) if k < 2]

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "deeper": self.deeper,
            "class_counts": [self.coarse_classes, self.fine_classes],
            "well_defined": self.well_defined,
            "surjective": self.surjective,
            "perfect": self.perfect,
            "unsplit_classes": self.unsplit,
            "children_per_class": self.children,
            "mapping": self.mapping,
            "usc": self.usc,
            "countability": self.countability,
        }


def _usc_proxy(coarse: CylinderPartition, fine: CylinderPartition) -> dict:
    """
    Deep separating cosets that separate two coarse cylinders must already be
    coarse separating cosets; per coarse cylinder pair, count how many there are.
    """
    shallow = {(c.rep, c.core.name) for c in coarse.separating.cosets}
    per_pair: dict[tuple[ReducedWord, ReducedWord], int] = {}
    outside = []
    for c in fine.separating.cosets:
        met = sorted({w[:coarse.depth] for w in cylinders_met(c, fine.depth)})
        if len(met) < 2:
            continue
        if (c.rep, c.core.name) not in shallow:
            outside.append(c.to_dict())
        for pair in combinations(met, 2):
            per_pair[pair] = per_pair.get(pair, 0) + 1
    return {
        "separating_coarse": len(coarse.separating),
        "separating_fine": len(fine.separating),
        "finite": coarse.separating.complete and fine.separating.complete,
        "max_cosets_per_pair": max(per_pair.values(), default=0),
        "cosets_outside_coarse_list": outside,
        "ok": not outside,
    }


def refine_and_check(collection: list[CoreGraph], n: int, m: int, rank: int | None = None) -> RefinementReport:
    if not n < m:
        raise ValidationError(f"deeper depth {m} must exceed depth {n}", field="deeper")
    coarse = decomposition_partition(collection, n, rank)
    fine = decomposition_partition(collection, m, rank)
    mapping, well_defined = refinement_map(coarse, fine)
    children = [0] * len(coarse)
    for k in mapping:
        children[k] += 1
    return RefinementReport(
        depth=n,
        deeper=m,
        coarse_classes=len(coarse),
        fine_classes=len(fine),
        mapping=mapping,
        well_defined=well_defined,
        surjective=all(k > 0 for k in children),
        children=children,
        usc=_usc_proxy(coarse, fine),
        countability={str(n): coarse.countability(), str(m): fine.countability()},
        coarse=coarse,
        fine=fine,
    )
