import pytest

from modules.stallings import CoreGraph, fold
from modules.words import GroupSpec, ReducedWord, parse_word

RANK = 2


def w(text: str) -> ReducedWord:
    return parse_word(text, RANK)


def sub(*gens: str, name: str = "") -> CoreGraph:
    return fold([w(g) for g in gens], RANK, name)


@pytest.fixture
def spec() -> GroupSpec:
    return GroupSpec(RANK)


@pytest.fixture
def cyclic_a() -> CoreGraph:
    return sub("a", name="H")


@pytest.fixture
def cyclic_b() -> CoreGraph:
    return sub("b", name="K")


@pytest.fixture
def conjugate_b() -> CoreGraph:
    """<a b a^-1>, λ = 1."""
    return sub("abA", name="J")


@pytest.fixture
def squares() -> CoreGraph:
    """<a^2, b^2>: quasiconvex, not malnormal."""
    return sub("aa", "bb", name="S")
