from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from riesz_lab import tree_kernels as K
from riesz_lab.tree_core import End, Vertex, level_vertices


def test_green_at_root():
    assert K.green(Vertex(), Vertex(), 2) == 2
    assert K.green(Vertex(), Vertex(), 3) == Fraction(3, 2)


def test_green_is_first_passage_times_diagonal():
    x, y = Vertex((0, 1, 1)), Vertex((1, 0))
    for q in (2, 3):
        assert K.green(x, y, q) == K.first_passage(x, y, q) * K.green(y, y, q)


def test_martin_and_busemann():
    xi = End.parse("0:(0)", 2)
    assert K.busemann(Vertex((0, 0)), xi) == -2
    assert K.busemann(Vertex((1,)), xi) == 1
    assert K.martin(Vertex((1,)), xi, 2) == Fraction(1, 2)


@pytest.mark.parametrize("q", [2, 3])
def test_martin_kernel_is_the_green_ratio_limit(q):
    xi = End.parse("1:(0/1)", q)
    for x in [Vertex(), Vertex((1, 0)), Vertex((0, 1, 1))]:
        # the ratio is constant once y_n is below x ^ xi
        assert K.martin_limit(x, xi, q, len(x) + 2) == K.martin(x, xi, q)


@pytest.mark.parametrize("q", [2, 3, 5])
def test_cylinder_of_own_vertex(q):
    for y in [Vertex((0,)), Vertex((1, 0, 1))]:
        assert K.harmonic_measure_cylinder(y, y, q) == Fraction(q, q + 1)


def test_cylinder_examples():
    y = Vertex((0, 1, 0, 1, 1))
    assert K.harmonic_measure_cylinder(y.parent, y, 2) == Fraction(1, 3)
    assert K.harmonic_measure_cylinder(Vertex(), Vertex((1,)), 2) == Fraction(1, 3)


@given(st.sampled_from([2, 3]), st.lists(st.integers(0, 1), max_size=4), st.integers(1, 3))
def test_cylinder_measures_partition(q, word, n):
    x = Vertex(tuple(word))
    total = sum(K.harmonic_measure_cylinder(x, y, q) for y in level_vertices(q, n))
    assert total == 1
