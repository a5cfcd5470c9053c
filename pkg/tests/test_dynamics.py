"""
Rational boundary points and the dynamical certificates.

    - the action on u·v^∞ normal forms satisfies g·(h·x) = (gh)·x
    - collapsing violation sets for s·t^i are finite and stable
    - conical sequences along rays, checked by direct word arithmetic
    - stabilizer coverage for bounded parabolic points
    - every sampled rational point is classified
"""

import numpy as np
import pytest

from conftest import RANK, sub, w
from modules.dynamics import (
    CONICAL,
    PARABOLIC_POINT,
    act_on_point,
    classify_point,
    collapsing_check,
    conical_certificate,
    containing_translate,
    expand_cylinders,
    parabolic_certificate,
    perfectness_witness,
    random_rational_point,
    rational_point,
)
from modules.errors import BadCompactsError, BadRError, HorizonError, NotConicalCandidateError, ValidationError
from modules.quotient import PARABOLIC, decomposition_partition
from modules.stallings import coset, coset_min_rep, membership
from modules.words import IDENTITY, cyclic_reduction, iter_ball, iter_sphere, multiply


def _point(text):
    head, period = text.rstrip(")").split("(")
    return rational_point(w(head), w(period))


# -- Rational points ---------------------------------------------------------

@pytest.mark.parametrize(
    "head, period, normal",
    [
        ("", "a", "(a)"),
        ("a", "a", "(a)"),
        ("", "abab", "(ab)"),
        ("ba", "a", "b(a)"),
        ("AB", "ba", "(ba)"),
        ("", "abA", "a(b)"),
        ("b", "aBA", "ba(B)"),
    ],
)
def test_normal_form(head, period, normal):
    assert str(rational_point(w(head), w(period))) == normal


def test_identity_period_is_rejected():
    with pytest.raises(ValidationError):
        rational_point(w("a"), IDENTITY)


@pytest.mark.parametrize(
    "g, x, image",
    [("b", "(a)", "b(a)"), ("A", "(a)", "(a)"), ("B", "b(a)", "(a)"), ("ab", "(BA)", "(BA)"), ("ab", "(b)", "a(b)")],
)
def test_action_examples(g, x, image):
    assert str(act_on_point(w(g), _point(x))) == image


def test_action_law():
    rng = np.random.default_rng(11)
    words = list(iter_ball(RANK, 3))
    for _ in range(50):
        g = words[int(rng.integers(len(words)))]
        h = words[int(rng.integers(len(words)))]
        x = random_rational_point(rng, RANK)
        assert act_on_point(g, act_on_point(h, x)) == act_on_point(multiply(g, h), x)


def test_prefix_and_tail():
    x = _point("ba(ab)")
    assert x.prefix(5) == w("baaba")
    assert x.tail(2) == _point("(ab)")
    assert x.tail(3) == _point("(ba)")
    assert x.phase(1) is None
    assert x.phase(3) == 1


@pytest.mark.parametrize("t", ["a", "ab", "aab", "abAB"])
def test_loxodromic_fixes_only_its_endpoints(t):
    t = w(t)
    plus, minus = rational_point(IDENTITY, t), rational_point(IDENTITY, t.inverse())
    assert act_on_point(t, plus) == plus
    assert act_on_point(t, minus) == minus
    fixed = set()
    for head in iter_ball(RANK, 2):
        for k in (1, 2, 3):
            for period in iter_sphere(RANK, k):
                if cyclic_reduction(period)[0]:
                    continue
                x = rational_point(head, period)
                if act_on_point(t, x) == x:
                    fixed.add(x)
    assert fixed <= {plus, minus}


def test_containing_translate(cyclic_a):
    assert containing_translate(_point("b(a)"), [cyclic_a]) == (0, coset(cyclic_a, w("b")))
    assert containing_translate(_point("(A)"), [cyclic_a]) == (0, coset(cyclic_a, IDENTITY))
    assert containing_translate(_point("(ab)"), [cyclic_a]) is None


def test_containing_translate_conjugate(conjugate_b):
    found = containing_translate(_point("ab(b)"), [conjugate_b])
    assert found == (0, coset(conjugate_b, IDENTITY))
    found = containing_translate(_point("(B)"), [conjugate_b])
    assert found == (0, coset(conjugate_b, w("A")))


# -- Collapsing --------------------------------------------------------------

def test_powers_of_a_collapse():
    report = collapsing_check(IDENTITY, w("a"), [w("b"), w("B"), w("A")], [w("a"), w("b"), w("B")], 3, 32, RANK)
    assert report.violation_indices == [0]
    assert report.stable
    assert str(report.attractor) == "(a)"
    assert str(report.repeller) == "(A)"


def test_powers_of_ba_collapse():
    K = [x for x in iter_sphere(RANK, 4) if x != w("baba")]
    L = [x for x in iter_sphere(RANK, 4) if x != w("ABAB")]
    report = collapsing_check(IDENTITY, w("ba"), K, L, 4, 32, RANK)
    assert report.stable
    assert report.violation_indices
    assert max(report.violation_indices) < 8


def test_shifted_sequence_collapses():
    report = collapsing_check(w("b"), w("a"), [w("a"), w("A"), w("B")], [w("a"), w("b"), w("B")], 3, 16, RANK)
    assert str(report.attractor) == "b(a)"
    assert report.stable


@pytest.mark.parametrize(
    "K, L",
    [
        (["aaa", "b"], ["b"]),
        (["b"], ["AAA", "b"]),
        (["a"], ["b"]),
    ],
)
def test_compacts_must_avoid_fixed_points(K, L):
    with pytest.raises(BadCompactsError) as exc:
        collapsing_check(IDENTITY, w("a"), [w(x) for x in K], [w(x) for x in L], 3, 8, RANK)
    assert exc.value.exit_status == 2


def test_t_must_be_cyclically_reduced():
    with pytest.raises(ValidationError):
        collapsing_check(IDENTITY, w("abA"), [w("b")], [w("b")], 3, 8, RANK)


def test_expand_cylinders():
    assert expand_cylinders([w("b")], 2, RANK) == [w("ba"), w("bA"), w("bb")]
    with pytest.raises(ValidationError):
        expand_cylinders([w("bab")], 2, RANK)
    with pytest.raises(ValidationError):
        expand_cylinders([], 2, RANK)


def test_collapse_on_quotient(cyclic_b):
    report = collapsing_check(
        IDENTITY, w("a"), [w("B"), w("A")], [w("a"), w("B")], 3, 16, RANK, collection=[cyclic_b]
    )
    assert report.quotient is not None
    assert report.quotient["same_class"] is False


# -- Conical -----------------------------------------------------------------

def _independent_width(x, n, depth):
    """Longest run of a-letters after position n: the ray stays on γ(n)<a> that long."""
    letters = x.prefix(depth).letters
    j = n
    while j < depth and abs(letters[j]) == 1:
        j += 1
    return j - n


def test_conical_ray_of_ab(cyclic_a):
    x = _point("(ab)")
    cert = conical_certificate(x, [cyclic_a], 8, 64)
    assert cert.C == 0
    assert cert.chi == 2
    assert cert.ns == list(range(8))
    assert not cert.inflated
    for n in cert.ns:
        assert _independent_width(x, n, 64) < cert.chi
    assert cert.collapse["x_images_fixed"]


def test_limit_point_is_not_conical(cyclic_a):
    with pytest.raises(NotConicalCandidateError):
        conical_certificate(_point("(a)"), [cyclic_a], 8, 64)
    with pytest.raises(NotConicalCandidateError):
        conical_certificate(_point("bb(A)"), [cyclic_a], 8, 64)


def test_conical_without_subgroups():
    cert = conical_certificate(_point("(ab)"), [], 8, 16)
    assert cert.ns == list(range(8))
    assert cert.chi == 2


def test_conical_horizon(cyclic_a):
    with pytest.raises(HorizonError) as exc:
        conical_certificate(_point("(ab)"), [cyclic_a], 8, 8)
    assert exc.value.exit_status == 3


def test_conical_skips_long_runs(cyclic_a):
    x = _point("(aab)")
    cert = conical_certificate(x, [cyclic_a], 6, 48)
    assert cert.ns == sorted(set(cert.ns))
    for n in cert.ns:
        assert _independent_width(x, n, 48) < cert.chi


def _ball_scan_widths(x, core, n, C, depth):
    """
    For every coset u·H with u in the C-ball around γ(n), the spread of
    {j in [n, depth] : d(γ(j), uH) <= C}, found by membership tests only.
    """
    ball = list(iter_ball(RANK, C))
    ray = [x.prefix(j) for j in range(depth + 1)]
    widths = []
    for z in ball:
        u = multiply(ray[n], z)
        near = [
            j for j in range(n, depth + 1)
            if any(membership(core, multiply(u.inverse(), multiply(ray[j], y))) for y in ball)
        ]
        widths.append(max(near) - min(near))
    return widths


@pytest.mark.parametrize(
    "subgroup, point, lam",
    [("cyclic_a", "(ab)", 0), ("cyclic_a", "(aab)", 0), ("conjugate_b", "(ab)", 1), ("conjugate_b", "(aab)", 1)],
)
def test_conical_segments_against_ball_scan(request, subgroup, point, lam):
    core = request.getfixturevalue(subgroup)
    x = _point(point)
    depth = 24
    cert = conical_certificate(x, [core], 8, depth)
    assert cert.C == lam
    assert len(cert.ns) == 8
    assert max(cert.ns) <= depth - cert.chi
    for n in cert.ns:
        assert max(_ball_scan_widths(x, core, n, cert.C, depth)) < cert.chi


# -- Parabolic ---------------------------------------------------------------

@pytest.mark.parametrize("depth", [4, 6, 8])
def test_cyclic_axis_is_bounded_parabolic(cyclic_a, depth):
    cert = parabolic_certificate(coset(cyclic_a, IDENTITY), 1, depth)
    assert cert.covered
    assert cert.e_outside_limit
    assert cert.uncovered == []


def test_conjugate_axis_is_bounded_parabolic(conjugate_b):
    cert = parabolic_certificate(coset(conjugate_b, IDENTITY), 3, 6)
    assert cert.lam == 1
    assert cert.covered


def test_translated_coset_uses_translator(cyclic_a):
    cert = parabolic_certificate(coset(cyclic_a, w("b")), 1, 4)
    assert cert.translator == w("b")
    assert cert.covered
    assert cert.to_dict()["stabilizer"].startswith("b")
    assert cert.stabilizer == sub("baB")
    assert cert.to_dict()["stabilizer_generators"] == ["baB"]
    for g in cert.stabilizer.generators:
        assert act_on_point(g, _point("b(a)")) == _point("b(a)")


@pytest.mark.parametrize("gens, R", [(("a",), 0), (("abA",), 2)])
def test_R_must_exceed_twice_lambda(gens, R):
    with pytest.raises(BadRError):
        parabolic_certificate(coset(sub(*gens), IDENTITY), R, 2 * R + 2)


def test_shallow_depth_clips_the_frontier(conjugate_b):
    cert = parabolic_certificate(coset(conjugate_b, IDENTITY), 3, 4)
    assert cert.frontier_ball == 6
    assert cert.frontier_truncated
    assert cert.to_dict()["frontier_truncated"] is True
    assert all(len(f) <= 4 for f in cert.frontier)
    assert cert.covered == (cert.uncovered == [])

    def distance_to_h(x):
        return len(coset_min_rep(conjugate_b, x.inverse()))

    expected = [x for x in iter_sphere(RANK, 4) if any(distance_to_h(x[:k]) == 3 for k in range(5))]
    assert sorted(cert.E) == sorted(expected)


def test_frontier_is_whole_when_depth_allows(cyclic_a):
    assert not parabolic_certificate(coset(cyclic_a, IDENTITY), 1, 4).frontier_truncated


def test_depth_must_be_positive(cyclic_a):
    with pytest.raises(ValidationError):
        parabolic_certificate(coset(cyclic_a, IDENTITY), 1, 0)


# -- Dichotomy ---------------------------------------------------------------

def test_classify_examples(cyclic_a):
    assert classify_point(_point("(a)"), [cyclic_a]).kind == PARABOLIC_POINT
    assert classify_point(_point("b(A)"), [cyclic_a]).kind == PARABOLIC_POINT
    assert classify_point(_point("(ab)"), [cyclic_a]).kind == CONICAL


def test_every_sampled_point_is_classified(cyclic_a):
    rng = np.random.default_rng(0)
    points = [random_rational_point(rng, RANK) for _ in range(50)]
    kinds = [classify_point(x, [cyclic_a]).kind for x in points]
    assert set(kinds) <= {CONICAL, PARABOLIC_POINT}


def test_perfectness_witness(cyclic_a):
    coarse = decomposition_partition([cyclic_a], 1)
    fine = decomposition_partition([cyclic_a], 2)
    index = coarse.class_of(w("a"))
    assert coarse.classes[index].kind == PARABOLIC
    witness = perfectness_witness(coarse, fine, index)
    assert witness["distinct"]
    assert witness["approaches_class"]
    assert witness["x"] == "(b)"
