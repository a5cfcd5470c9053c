"""
Dynamical certificates on rational boundary points.

∂F_r is uncountable, so every dynamical statement is checked on rational
(eventually periodic) points u·v^∞ and on cylinder sets, with "all but
finitely many i" replaced by "the violation set does not change when the
horizon doubles".

Certificates built here:

  collapsing_check       finite violation sets for g_i = s·t^i
  conical_certificate    the increasing sequence n_i along the ray of x
  parabolic_certificate  stabilizer coverage of the complement of gΛ(H)
  classify_point         one of the two, for every rational point
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from modules.errors import (
    BadCompactsError,
    BadRError,
    HorizonError,
    NotConicalCandidateError,
    ValidationError,
)
from modules.malnormal import bci_report
from modules.quotient import CylinderPartition, decomposition_partition, require_malnormal
from modules.stallings import (
    CoreGraph,
    CosetRef,
    conjugate_core,
    coset,
    coset_distance,
    coset_min_rep,
    enumerate_elements,
    limit_prefix_extends,
    read,
)
from modules.words import (
    IDENTITY,
    ReducedWord,
    alphabet,
    common_prefix_length,
    cyclic_reduction,
    extensions,
    is_cyclically_reduced,
    iter_ball,
    iter_sphere,
    multiply,
    primitive_root,
    reduce,
    rotate,
)

log = logging.getLogger(__name__)

# the free Cayley tree
DELTA = 0


# ── Rational points ──────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RationalBoundaryPoint:
    """head·period^∞ in normal form; build through rational_point()."""

    head: ReducedWord
    period: ReducedWord

    def __str__(self) -> str:
        head = str(self.head) if self.head else ""
        return f"{head}({self.period})"

    def prefix(self, n: int) -> ReducedWord:
        letters = list(self.head.letters[:n])
        while len(letters) < n:
            letters.extend(self.period.letters[: n - len(letters)])
        return ReducedWord(tuple(letters))

    def phase(self, n: int) -> int | None:
        """Offset into the period after n letters, None while still inside the head."""
        if n < len(self.head):
            return None
        return (n - len(self.head)) % len(self.period)

    def tail(self, n: int) -> RationalBoundaryPoint:
        """The point with the first n letters removed."""
        if n <= len(self.head):
            return rational_point(self.head[n:], self.period)
        return rational_point(IDENTITY, rotate(self.period, self.phase(n)))

    def to_dict(self) -> dict:
        return {"head": str(self.head), "period": str(self.period), "text": str(self)}


def rational_point(u: ReducedWord, v: ReducedWord) -> RationalBoundaryPoint:
    """Normal form of u·v^∞."""
    v = reduce(v.letters)
    if not v:
        raise ValidationError("period of a boundary point must be nontrivial", field="period")
    c, t = cyclic_reduction(v)
    head = multiply(u, c)
    while head and head.letters[-1] == -t.letters[0]:
        head = head[:-1]
        t = rotate(t, 1)
    t = primitive_root(t)
    while head and head.letters[-1] == t.letters[-1]:
        head = head[:-1]
        t = rotate(t, -1)
    return RationalBoundaryPoint(head, t)


def act_on_point(g: ReducedWord, x: RationalBoundaryPoint) -> RationalBoundaryPoint:
    return rational_point(multiply(g, x.head), x.period)


def random_rational_point(rng: np.random.Generator, rank: int, max_head: int = 3, max_period: int = 3) -> RationalBoundaryPoint:
    letters = alphabet(rank)

    def random_word(length: int) -> ReducedWord:
        out: list[int] = []
        while len(out) < length:
            x = letters[int(rng.integers(len(letters)))]
            if not out or x != -out[-1]:
                out.append(x)
        return ReducedWord(tuple(out))

    head = random_word(int(rng.integers(max_head + 1)))
    while True:
        period = random_word(int(rng.integers(1, max_period + 1)))
        if is_cyclically_reduced(period):
            return rational_point(head, period)


def containing_translate(x: RationalBoundaryPoint, collection: list[CoreGraph]) -> tuple[int, CosetRef] | None:
    """
    (index, gH_i) with x in gΛ(H_i), or None. x = u·t^∞ lies in a translate
    of Λ(H) iff reading t is a cycle somewhere in core(H).
    """
    for index, core in enumerate(collection):
        step = {v: read(core, x.period, v) for v in range(len(core))}
        on_cycle = []
        for v in range(len(core)):
            w: int | None = v
            for _ in range(len(core)):
                w = step[w] if w is not None else None
                if w is None:
                    break
                if w == v:
                    on_cycle.append(v)
                    break
        if on_cycle:
            p = core.paths_from_base[min(on_cycle)]
            return index, coset(core, multiply(x.head, p.inverse()))
    return None


# ── Collapsing sequences ─────────────────────────────────────────────────────

@dataclass
class CollapseReport:
    s: ReducedWord
    t: ReducedWord
    depth: int
    i_max: int
    attractor: RationalBoundaryPoint
    repeller: RationalBoundaryPoint
    K: list[ReducedWord]
    L: list[ReducedWord]
    violation_indices: list[int]
    stable: bool
    quotient: dict | None = None

    def to_dict(self) -> dict:
        return {
            "sequence": {"s": str(self.s), "t": str(self.t), "form": "g_i = s·t^i"},
            "depth": self.depth,
            "i_max": self.i_max,
            "attractor": self.attractor.to_dict(),
            "repeller": self.repeller.to_dict(),
            "K": [str(w) for w in self.K],
            "L": [str(w) for w in self.L],
            "violation_indices": self.violation_indices,
            "stable": self.stable,
            "quotient": self.quotient,
        }


def _representatives(w: ReducedWord, rank: int) -> list[RationalBoundaryPoint]:
    """w·x^∞ for each letter x that may follow w."""
    return [rational_point(w, ReducedWord((e.letters[-1],))) for e in extensions(w, rank)]


def _violations(s: ReducedWord, t: ReducedWord, K: set[ReducedWord], L: list[ReducedWord], depth: int, i_max: int, rank: int) -> list[int]:
    """i such that g_i carries a representative point of L into K."""
    reps = [p for w in L for p in _representatives(w, rank)]
    out = []
    g = s
    for i in range(i_max + 1):
        if any(act_on_point(g, p).prefix(depth) in K for p in reps):
            out.append(i)
        g = multiply(g, t)
    return out


def expand_cylinders(words: list[ReducedWord], depth: int, rank: int, name: str = "cylinders") -> list[ReducedWord]:
    """Depth-d cylinders covering the given ones; shorter words stand for all their extensions."""
    if not words:
        raise ValidationError(f"{name} must be a nonempty cylinder set", field=name)
    out: set[ReducedWord] = set()
    for w in words:
        if len(w) > depth:
            raise ValidationError(f"cylinder {w} in {name} is deeper than {depth}", field=name)
        layer = [w]
        while len(layer[0]) < depth:
            layer = [e for u in layer for e in extensions(u, rank)]
        out.update(layer)
    return sorted(out)


def collapsing_check(
    s: ReducedWord,
    t: ReducedWord,
    K: list[ReducedWord],
    L: list[ReducedWord],
    depth: int,
    i_max: int,
    rank: int,
    collection: list[CoreGraph] | None = None,
) -> CollapseReport:
    """
    g_i = s·t^i pushes every point but the repeller t^-∞ toward the
    attractor s·t^∞. K must avoid the attractor's depth-d cylinder and L
    the repeller's; i is a violation when g_i carries a point of L into K.
    The violation set is finite for a collapsing sequence; stable means it
    is the same when the horizon is doubled.

    With a collection, K and L are also saturated by the depth-d partition
    classes and the check is repeated on the quotient.
    """
    if not t or not is_cyclically_reduced(t):
        raise ValidationError(f"t = {t} must be nontrivial and cyclically reduced", field="t")
    K = expand_cylinders(K, depth, rank, "K")
    L = expand_cylinders(L, depth, rank, "L")
    attractor = act_on_point(s, rational_point(IDENTITY, t))
    repeller = rational_point(IDENTITY, t.inverse())
    a_cyl, r_cyl = attractor.prefix(depth), repeller.prefix(depth)
    if a_cyl in K or r_cyl in L:
        raise BadCompactsError(
            f"K must avoid [{a_cyl}] and L must avoid [{r_cyl}]",
            attractor_cylinder=str(a_cyl),
            repeller_cylinder=str(r_cyl),
        )

    violations = _violations(s, t, set(K), L, depth, i_max, rank)
    doubled = _violations(s, t, set(K), L, depth, 2 * i_max, rank)
    report = CollapseReport(s, t, depth, i_max, attractor, repeller, K, L, violations, violations == doubled)
    if collection is not None:
        report.quotient = _quotient_collapse(report, collection, rank)
    log.info("collapsing check s=%s t=%s: %d violations, stable=%s", s, t, len(violations), report.stable)
    return report


def _quotient_collapse(report: CollapseReport, collection: list[CoreGraph], rank: int) -> dict:
    partition = decomposition_partition(collection, report.depth, rank)
    a_class = partition.class_of(report.attractor.prefix(report.depth))
    r_class = partition.class_of(report.repeller.prefix(report.depth))

    def saturate(words: list[ReducedWord]) -> list[ReducedWord]:
        members = {partition.class_of(w) for w in words}
        return sorted(w for k in members for w in partition.classes[k].cylinders)

    K_bar, L_bar = saturate(report.K), saturate(report.L)
    out = {"same_class": a_class == r_class, "attractor_class": a_class, "repeller_class": r_class}
    if a_class in {partition.class_of(w) for w in K_bar} or r_class in {partition.class_of(w) for w in L_bar}:
        out.update(checked=False, reason="saturated K or L meets the attractor or repeller class")
        return out
    v1 = _violations(report.s, report.t, set(K_bar), L_bar, report.depth, report.i_max, rank)
    v2 = _violations(report.s, report.t, set(K_bar), L_bar, report.depth, 2 * report.i_max, rank)
    out.update(checked=True, violation_indices=v1, stable=v1 == v2)
    return out


# ── Conical limit points ─────────────────────────────────────────────────────

@dataclass
class ConicalCertificate:
    point: RationalBoundaryPoint
    C: int
    chi: int
    R: int
    D_emp: int
    ns: list[int]
    checked_depth: int
    inflated: bool = False
    choices: list[str] = field(default_factory=list)
    # widest N_C(gH) ∩ γ([n_i, depth]) seen at each n_i
    widths: list[int] = field(default_factory=list)
    collapse: dict | None = None

    def to_dict(self) -> dict:
        return {
            "point": self.point.to_dict(),
            "C": self.C,
            "chi": self.chi,
            "R": self.R,
            "D_emp": self.D_emp,
            "ns": self.ns,
            "checked_depth": self.checked_depth,
            "inflated": self.inflated,
            "choices": self.choices,
            "widths": self.widths,
            "collapse": self.collapse,
            "generating_set": "free basis",
        }


def _segment_width(c: CosetRef, ray: list[ReducedWord], start: int, C: int) -> int:
    """diam of N_C(gH) ∩ γ([start, end]); the intersection is an interval through start."""
    j = start
    while j + 1 < len(ray) and coset_distance(c, ray[j + 1]) <= C:
        j += 1
    return j - start


@lru_cache(maxsize=64)
def _small_ball(rank: int, radius: int) -> tuple[ReducedWord, ...]:
    return tuple(iter_ball(rank, radius))


def cosets_near(collection: list[CoreGraph], w: ReducedWord, C: int) -> list[CosetRef]:
    """Every coset gH_i with d(w, gH_i) <= C: the cosets of w·u, |u| <= C."""
    out = []
    for core in collection:
        reps = {coset_min_rep(core, multiply(w, u)) for u in _small_ball(core.rank, C)}
        out.extend(CosetRef(rep, core) for rep in sorted(reps))
    return out


def _width_at(collection: list[CoreGraph], ray: list[ReducedWord], k: int, C: int) -> int:
    """Widest segment over every coset within C of γ(k)."""
    return max((_segment_width(c, ray, k, C) for c in cosets_near(collection, ray[k], C)), default=0)


def _place_indices(collection, ray, C, chi, i_max, checked_depth) -> tuple[list[int], list[str], list[int]] | None:
    ns: list[int] = []
    choices: list[str] = []
    widths: list[int] = []
    limit = checked_depth - chi
    k = 0
    while len(ns) < i_max:
        if k > limit:
            return None
        width = _width_at(collection, ray, k, C)
        if width < chi:
            ns.append(k)
            choices.append("greedy")
            widths.append(width)
            k += 1
            continue
        # the segment blocking k ends at s = k + width; try s - chi/2
        proof = max(k + 1, k + width - chi // 2)
        if proof <= limit:
            w2 = _width_at(collection, ray, proof, C)
            if w2 < chi:
                ns.append(proof)
                choices.append("proof")
                widths.append(w2)
                k = proof + 1
                continue
        k += 1
    return ns, choices, widths


def _ray_collapse(x: RationalBoundaryPoint, ns: list[int], depth: int, rank: int) -> dict | None:
    """
    Along the n_i sharing one phase of the period, γ(n_i)^-1 sends x to a
    fixed point a and a test point y to points converging on b.
    """
    by_phase: dict[int, list[int]] = {}
    for n in ns:
        ph = x.phase(n)
        if ph is not None:
            by_phase.setdefault(ph, []).append(n)
    if not by_phase:
        return None
    phase, sub = max(by_phase.items(), key=lambda kv: (len(kv[1]), -kv[0]))
    first = x.prefix(1).letters[0]
    y = rational_point(IDENTITY, ReducedWord((next(z for z in alphabet(rank) if z != first),)))
    a = x.tail(sub[0])
    b = rational_point(x.period[:phase].inverse(), x.period.inverse())
    images_x = [act_on_point(x.prefix(n).inverse(), x) for n in sub]
    images_y = [act_on_point(x.prefix(n).inverse(), y) for n in sub]
    agreement = [common_prefix_length(p.prefix(depth), b.prefix(depth)) for p in images_y]
    return {
        "phase": phase,
        "indices": sub,
        "a": str(a),
        "b": str(b),
        "test_point": str(y),
        "x_images_fixed": all(p == a for p in images_x),
        "y_agreement": agreement,
        "y_converges": agreement == sorted(agreement) and (len(agreement) < 2 or agreement[-1] > agreement[0]),
    }


def conical_certificate(
    x: RationalBoundaryPoint,
    collection: list[CoreGraph],
    i_max: int,
    checked_depth: int,
    ball_radius: int | None = None,
) -> ConicalCertificate:
    if collection:
        require_malnormal(collection)
        found = containing_translate(x, collection)
        if found is not None:
            index, c = found
            raise NotConicalCandidateError(f"{x} lies in the limit set of {c}", coset=c.to_dict(), subgroup_index=index)

    lam = max((core.lam for core in collection), default=0)
    C = lam + 6 * DELTA
    R = C + lam + 2 * DELTA
    ray = [x.prefix(k) for k in range(checked_depth + 1)]

    inflated = False
    for attempt in range(2):
        radius = ball_radius if ball_radius is not None else R + 2 * lam + 4
        D_emp = bci_report(collection, R, max(radius, R)).D_emp if collection else 1
        chi = 2 * D_emp
        placed = _place_indices(collection, ray, C, chi, i_max, checked_depth)
        if placed is not None:
            break
        log.info("no room for %d indices at R=%d; inflating", i_max, R)
        R += 1
        inflated = True
    else:
        raise HorizonError(
            f"checked depth {checked_depth} cannot hold {i_max} indices for {x}",
            checked_depth=checked_depth,
            i_max=i_max,
        )

    ns, choices, widths = placed
    rank = collection[0].rank if collection else max(2, x.head.max_generator(), x.period.max_generator())
    cert = ConicalCertificate(x, C, chi, R, D_emp, ns, checked_depth, inflated, choices, widths)
    cert.collapse = _ray_collapse(x, ns, checked_depth, rank)
    log.info("conical certificate for %s: C=%d chi=%d, %d indices", x, C, chi, len(ns))
    return cert


# ── Bounded parabolic points ─────────────────────────────────────────────────

@dataclass
class ParabolicCertificate:
    coset: CosetRef
    translator: ReducedWord
    stabilizer: CoreGraph
    lam: int
    R: int
    frontier_ball: int
    depth: int
    frontier_truncated: bool
    frontier: list[ReducedWord]
    E: list[ReducedWord]
    covered: bool
    uncovered: list[ReducedWord]
    e_outside_limit: bool
    stabilizer_radius: int

    def to_dict(self) -> dict:
        return {
            "coset": self.coset.to_dict(),
            "stabilizer": self.stabilizer.name,
            "stabilizer_generators": [str(g) for g in self.stabilizer.generators],
            "translator": str(self.translator),
            "lambda": self.lam,
            "R": self.R,
            "frontier_ball": self.frontier_ball,
            "depth": self.depth,
            "frontier_truncated": self.frontier_truncated,
            "frontier_size": len(self.frontier),
            "E_size": len(self.E),
            "E_outside_limit_set": self.e_outside_limit,
            "stabilizer_radius": self.stabilizer_radius,
            "covered": self.covered,
            "uncovered": [str(w) for w in self.uncovered[:50]],
            "generating_set": "free basis",
        }


def parabolic_certificate(c: CosetRef, R: int, depth: int) -> ParabolicCertificate:
    """
    Certify the image of gΛ(H) through its orbit representative Λ(H): the
    stabilizer gHg^-1 is conjugate to H by the translator g.
    """
    core = c.core
    lam = core.lam
    if R <= 2 * lam + 10 * DELTA:
        raise BadRError(f"R = {R} must exceed 2λ + 10δ = {2 * lam + 10 * DELTA}", R=R, lam=lam)
    frontier_ball = 2 * R + 100 * DELTA
    if depth < 1:
        raise ValidationError(f"depth must be positive, got {depth}", field="depth")
    # cylinders only see prefixes up to depth
    reach = min(frontier_ball, depth)

    def dist_h(w: ReducedWord) -> int:
        return len(coset_min_rep(core, w.inverse()))

    frontier = [w for k in range(reach + 1) for w in iter_sphere(core.rank, k) if dist_h(w) == R]
    frontier_set = set(frontier)

    def in_e(w: ReducedWord) -> bool:
        return any(w[:k] in frontier_set for k in range(min(len(w), reach) + 1))

    cylinders = list(iter_sphere(core.rank, depth))
    E = [w for w in cylinders if in_e(w)]
    E_set = set(E)
    e_outside = not any(limit_prefix_extends(core, w) for w in E)

    @lru_cache(maxsize=None)
    def inside_e(q: ReducedWord) -> bool:
        if len(q) >= depth:
            return q[:depth] in E_set
        if in_e(q):
            return True
        return all(inside_e(e) for e in extensions(q, core.rank))

    stabilizer_radius = depth + R
    elements = enumerate_elements(core, stabilizer_radius)
    uncovered = []
    for w in cylinders:
        if limit_prefix_extends(core, w):
            continue
        for p in elements:
            q = multiply(p.inverse(), w)
            # p^-1·[w] is the cylinder [q] only if w is not swallowed
            if len(p) + len(w) - len(q) >= 2 * len(w):
                continue
            if inside_e(q):
                break
        else:
            uncovered.append(w)

    cert = ParabolicCertificate(
        coset=c,
        translator=c.rep,
        stabilizer=conjugate_core(core, c.rep),
        lam=lam,
        R=R,
        frontier_ball=frontier_ball,
        depth=depth,
        frontier_truncated=reach < frontier_ball,
        frontier=frontier,
        E=E,
        covered=not uncovered,
        uncovered=uncovered,
        e_outside_limit=e_outside,
        stabilizer_radius=stabilizer_radius,
    )
    log.info("parabolic certificate for %s: |E|=%d, covered=%s", c, len(E), cert.covered)
    return cert


# ── Dichotomy ────────────────────────────────────────────────────────────────

CONICAL = "CONICAL"
PARABOLIC_POINT = "PARABOLIC"
UNCLASSIFIED = "UNCLASSIFIED"


@dataclass
class Classification:
    point: RationalBoundaryPoint
    kind: str
    certificate: ConicalCertificate | ParabolicCertificate | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "point": str(self.point),
            "kind": self.kind,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "reason": self.reason,
        }


def classify_point(
    x: RationalBoundaryPoint,
    collection: list[CoreGraph],
    i_max: int = 8,
    checked_depth: int = 32,
    depth: int | None = None,
) -> Classification:
    """A rational point is either in a translated limit set (parabolic) or conical."""
    found = containing_translate(x, collection)
    if found is not None:
        _, c = found
        R = 2 * c.core.lam + 10 * DELTA + 1
        cert = parabolic_certificate(c, R, max(depth or 0, 2 * R))
        if cert.covered:
            return Classification(x, PARABOLIC_POINT, cert)
        return Classification(x, UNCLASSIFIED, cert, "stabilizer coverage failed")
    try:
        return Classification(x, CONICAL, conical_certificate(x, collection, i_max, checked_depth))
    except HorizonError as e:
        return Classification(x, UNCLASSIFIED, None, e.message)


def perfectness_witness(coarse: CylinderPartition, fine: CylinderPartition, class_index: int, steps: int = 6) -> dict | None:
    """
    For a parabolic class from gH: with h in gHg^-1 and x off gΛ(H), the
    points h^i·x are distinct, fall into fine classes, and approach the class.
    """
    cls = coarse.classes[class_index]
    if cls.coset is None:
        return None
    c = cls.coset
    core = c.core
    h = multiply(multiply(c.rep, core.generators[0]), c.rep.inverse())
    x = None
    for y in alphabet(core.rank):
        candidate = rational_point(IDENTITY, ReducedWord((y,)))
        found = containing_translate(candidate, [core])
        if found is None or found[1] != c:
            x = candidate
            break
    if x is None:
        return None
    images = []
    g = IDENTITY
    for _ in range(steps):
        g = multiply(g, h)
        images.append(act_on_point(g, x))
    coarse_classes = [coarse.class_of(p.prefix(coarse.depth)) for p in images]
    fine_classes = [fine.class_of(p.prefix(fine.depth)) for p in images]
    return {
        "class": class_index,
        "h": str(h),
        "x": str(x),
        "images": [str(p) for p in images],
        "distinct": len(set(images)) == len(images),
        "fine_classes": fine_classes,
        "approaches_class": coarse_classes[-1] == class_index,
    }
