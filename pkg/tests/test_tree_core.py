from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from riesz_lab.errors import EmptySet, EqualEnds, InvalidAddress
from riesz_lab.tree_core import (
    CantorRule,
    End,
    FiniteEnds,
    Vertex,
    ball,
    confluent,
    confluent_depth,
    cylinder_measure,
    dist_to_boundary,
    dist_to_set,
    graph_distance,
    level_size,
    level_vertices,
    parse_boundary_set,
    parse_point,
    ultra_metric,
    vertex_from_index,
    vertex_index,
)


@st.composite
def vertices(draw, q, max_depth=6):
    n = draw(st.integers(0, max_depth))
    if n == 0:
        return Vertex()
    first = draw(st.integers(0, q))
    rest = draw(st.lists(st.integers(0, q - 1), min_size=n - 1, max_size=n - 1))
    return Vertex((first, *rest))


def test_parse_and_print_round_trip():
    v = Vertex.parse("2/0/1", 2)
    assert v.word == (2, 0, 1)
    assert str(v) == "2/0/1"
    assert Vertex.parse("o") == Vertex()
    assert str(End.parse("0:(1)", 2)) == "0:(1)"


def test_first_label_may_use_q_but_later_labels_may_not():
    Vertex((2,)).validate(2)
    with pytest.raises(InvalidAddress):
        Vertex((0, 2)).validate(2)
    with pytest.raises(InvalidAddress):
        End.parse("0:(2)", 2)


def test_end_normal_form():
    assert End.parse("0:(0)", 2) == End.parse(":(0)", 2)
    assert End((1, 0, 1), (0, 1)) == End((1,), (0, 1))
    assert End((), (0, 0)) == End((), (0,))


def test_confluent_examples():
    a, b = Vertex((0, 1, 1)), Vertex((0, 1, 0, 1))
    assert confluent(a, b) == Vertex((0, 1))
    assert graph_distance(a, b) == 3
    xi = End.parse("0/1:(0)", 2)
    assert confluent_depth(Vertex((0, 1, 0, 0, 1)), xi) == 4
    with pytest.raises(EqualEnds):
        confluent_depth(End.parse("0:(0)", 2), End.parse(":(0)", 2))


def test_ultra_metric_values():
    q = 3
    assert ultra_metric(Vertex((0, 1)), Vertex((0, 2)), q) == Fraction(1, 3)
    assert ultra_metric(Vertex((0,)), Vertex((0,)), q) == 0
    assert dist_to_boundary(Vertex((1, 1, 1)), q) == Fraction(1, 27)


@given(st.data())
def test_ultrametric_inequality(data):
    q = data.draw(st.sampled_from([2, 3]))
    x, y, z = (data.draw(vertices(q)) for _ in range(3))
    assert ultra_metric(x, z, q) <= max(ultra_metric(x, y, q), ultra_metric(y, z, q))


@given(st.data())
def test_index_round_trip(data):
    q = data.draw(st.sampled_from([2, 3, 5]))
    v = data.draw(vertices(q))
    assert vertex_from_index(len(v), vertex_index(v, q), q) == v


def test_level_sizes_and_ball():
    for q in (2, 3):
        for n in range(5):
            assert len(list(level_vertices(q, n))) == level_size(q, n)
        assert len(list(ball(q, 4))) == sum(level_size(q, n) for n in range(5))
    assert level_size(2, 3) == 12


@pytest.mark.parametrize("q", [2, 3, 4])
def test_cylinder_measures_sum_to_one(q):
    for n in range(4):
        assert sum(cylinder_measure(y, q) for y in level_vertices(q, n)) == 1


def test_finite_ends_levels():
    E = parse_boundary_set("0:(0);1:(1)", 2)
    assert isinstance(E, FiniteEnds)
    assert E.gamma(1) == (Vertex((0,)), Vertex((1,)))
    assert E.lambda_level(1) == Fraction(2, 3)
    assert E.measure == 0
    assert dist_to_set(Vertex((0, 0, 1)), E) == Fraction(1, 4)
    assert dist_to_set(Vertex((2,)), E) == 1


def test_cantor_rule_counts():
    E = parse_boundary_set("cantor:o:0,1", 3)
    assert isinstance(E, CantorRule)
    # two first labels, then two of three at every later level
    assert [E.count(j) for j in range(5)] == [1, 2, 4, 8, 16]
    assert E.ratio == Fraction(2, 3)
    assert E.measure == 0
    full = CantorRule(2, Vertex(), frozenset({0, 1}))
    assert full.measure > 0


def test_parse_point_dispatch():
    assert isinstance(parse_point("0/1", 2), Vertex)
    assert isinstance(parse_point("0:(1)", 2), End)


def test_empty_set_distance_raises():
    with pytest.raises(EmptySet):
        dist_to_set(Vertex(), FiniteEnds(2, ()))
