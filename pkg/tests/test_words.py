"""
Reduced words, the Cayley tree metric and the four-point δ.

    - parsing and free reduction, shortlex order on a < A < b < B
    - tree distances and Gromov products; metric axioms, associativity and
      the four-point condition on random samples
    - sphere and ball sizes against enumeration
    - δ = 0 on tree balls; δ = 2 on the 8-cycle; budget handling
"""

from fractions import Fraction

import numpy as np
import pytest

from conftest import w
from modules.errors import ResourceLimitError, UnknownLetterError, ValidationError
from modules.words import (
    IDENTITY,
    GroupSpec,
    ball_size,
    build_ball,
    common_prefix_length,
    cyclic_reduction,
    distance,
    four_point_delta,
    gromov_product,
    is_cyclically_reduced,
    iter_ball,
    iter_sphere,
    load_graph,
    multiply,
    parse_word,
    primitive_root,
    reduce,
    rotate,
)

CYCLE_8 = "0\n" + "\n".join(f"{i} {(i + 1) % 8}" for i in range(8)) + "\n"


# -- Words -------------------------------------------------------------------

@pytest.mark.parametrize(
    "text, expected",
    [("aA", "1"), ("abBa", "aa"), ("1", "1"), ("", "1"), ("abAB", "abAB"), ("bAaB", "1")],
)
def test_parse_reduces(text, expected):
    assert str(parse_word(text, 2)) == expected


def test_identity_prints_as_one():
    assert str(IDENTITY) == "1"
    assert not IDENTITY


@pytest.mark.parametrize("text", ["c", "aC", "a1", "a-b"])
def test_unknown_letters_raise(text):
    with pytest.raises(UnknownLetterError) as exc:
        parse_word(text, 2)
    assert exc.value.code == "UNKNOWN_LETTER"


def test_reduce_rejects_letters_past_rank():
    with pytest.raises(UnknownLetterError):
        reduce([1, 3], rank=2)


def test_reduce_is_idempotent():
    for word in iter_ball(2, 4):
        assert reduce(word.letters) == word


def test_shortlex_order():
    words = [w("aa"), w("b"), w("A"), w("a"), w("B"), IDENTITY]
    assert [str(x) for x in sorted(words)] == ["1", "a", "A", "b", "B", "aa"]


def test_product_and_inverse():
    x = w("abA")
    assert x * x.inverse() == IDENTITY
    assert x ** 3 == w("abbbA")
    assert x ** -1 == w("aBA")


def test_tree_distance():
    assert distance(w("a"), w("b")) == 2
    assert distance(w("ab"), w("aB")) == 2
    assert distance(w("abab"), w("ab")) == 2
    assert distance(IDENTITY, w("bAAb")) == 4


def test_gromov_product():
    assert gromov_product(w("ab"), w("aB")) == 1
    assert gromov_product(w("ab"), w("ba")) == 0
    assert gromov_product(w("abab"), w("abaa")) == 3
    assert gromov_product(w("ab"), w("aB"), base=w("a")) == 0


@pytest.mark.parametrize("x, y, product", [("ab", "Ba", "aa"), ("a", "A", "1"), ("b", "a", "ba")])
def test_multiply_examples(x, y, product):
    assert str(multiply(w(x), w(y))) == product


@pytest.mark.parametrize("x, y, d", [("ab", "a", 1), ("1", "aaaaa", 5), ("ab", "ba", 4)])
def test_distance_examples(x, y, d):
    assert distance(w(x), w(y)) == d


@pytest.mark.parametrize("x, y, product", [("a", "a", 1), ("a", "A", 0), ("ab", "aB", 1)])
def test_gromov_product_examples(x, y, product):
    assert gromov_product(w(x), w(y), IDENTITY) == product


def _sample(rng, words, k):
    return [words[int(i)] for i in rng.integers(len(words), size=k)]


def test_metric_axioms_on_random_triples():
    rng = np.random.default_rng(5)
    words = list(iter_ball(2, 5))
    for _ in range(300):
        x, y, z = _sample(rng, words, 3)
        assert distance(x, y) == distance(y, x) == len(multiply(x.inverse(), y))
        assert distance(x, z) <= distance(x, y) + distance(y, z)
        assert (distance(x, y) == 0) == (x == y)


def test_multiply_is_associative():
    rng = np.random.default_rng(6)
    words = list(iter_ball(2, 4))
    for _ in range(300):
        x, y, z = _sample(rng, words, 3)
        assert multiply(multiply(x, y), z) == multiply(x, multiply(y, z))
        assert multiply(x, x.inverse()) == IDENTITY


def test_tree_four_point_condition():
    rng = np.random.default_rng(7)
    words = list(iter_ball(2, 5))
    for _ in range(500):
        x, y, z, base = _sample(rng, words, 4)
        assert gromov_product(x, y, base) >= min(gromov_product(x, z, base), gromov_product(z, y, base))
        bi = base.inverse()
        assert gromov_product(x, y, base) == common_prefix_length(multiply(bi, x), multiply(bi, y))


def test_cyclic_words():
    assert cyclic_reduction(w("abA")) == (w("a"), w("b"))
    assert is_cyclically_reduced(w("ab"))
    assert not is_cyclically_reduced(w("abA"))
    assert primitive_root(w("abab")) == w("ab")
    assert primitive_root(w("aab")) == w("aab")
    assert rotate(w("ab"), 1) == w("ba")


# -- Spheres and balls -------------------------------------------------------

@pytest.mark.parametrize("radius", range(9))
def test_ball_size_closed_form(radius):
    assert ball_size(2, radius) == 2 * 3 ** radius - 1


@pytest.mark.parametrize("radius", range(6))
def test_ball_enumeration_matches_count(radius):
    words = list(iter_ball(2, radius))
    assert len(words) == ball_size(2, radius)
    assert len(set(words)) == len(words)
    assert words == sorted(words)


def test_sphere_is_reduced_and_exact():
    for word in iter_sphere(3, 3):
        assert len(word) == 3
        assert reduce(word.letters) == word
    assert len(list(iter_sphere(3, 3))) == 6 * 5 * 5


@pytest.mark.parametrize("rank", [1, 0, 27])
def test_group_rank_bounds(rank):
    with pytest.raises(ValidationError):
        GroupSpec(rank)


def test_group_delta_is_zero():
    with pytest.raises(ValidationError):
        GroupSpec(2, Fraction(1, 2))


# -- Four-point δ ------------------------------------------------------------

@pytest.mark.parametrize("radius", range(6))
def test_tree_balls_are_zero_hyperbolic(spec, radius):
    ball = build_ball(spec, radius)
    assert len(ball) == ball_size(2, radius)
    assert ball.is_tree()
    estimate = four_point_delta(ball)
    assert estimate.value == 0
    assert estimate.exact


def test_exhaustive_scan_on_tree_ball(spec):
    estimate = four_point_delta(build_ball(spec, 2), shortcut_trees=False)
    assert estimate.method == "exhaustive"
    assert estimate.quadruples == 17 ** 4
    assert estimate.value == 0


def test_ball_distances_are_word_distances(spec):
    ball = build_ball(spec, 3)
    words = list(iter_ball(2, 3))
    for x in words[::7]:
        for y in words[::5]:
            assert ball.distance(x, y) == distance(x, y)


def test_eight_cycle_delta():
    estimate = four_point_delta(load_graph(CYCLE_8))
    assert estimate.exact
    assert estimate.value == 2
    assert estimate.to_dict()["delta"] == "2"


def test_sampling_gives_lower_bound():
    estimate = four_point_delta(load_graph(CYCLE_8), budget=1000, seed=3)
    assert not estimate.exact
    assert estimate.to_dict()["lower_bound"]
    assert 0 <= estimate.value <= 2


def test_budget_without_sampling_raises():
    with pytest.raises(ResourceLimitError) as exc:
        four_point_delta(load_graph(CYCLE_8), budget=1000, allow_sampling=False)
    assert exc.value.exit_status == 3


def test_ball_cap(spec):
    with pytest.raises(ResourceLimitError):
        build_ball(spec, 8, cap=1000)


@pytest.mark.parametrize("text", ["", "# only a comment\n", "0\n0 1 2\n", "0\n1 2\n"])
def test_bad_graph_files(text):
    with pytest.raises(ValidationError):
        load_graph(text)
