from __future__ import annotations

import io
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from riesz_lab import tree_kernels as K
from riesz_lab.errors import InvalidAddress, NotTransient
from riesz_lab.tree_core import Vertex, ball, ultra_metric
from riesz_lab.weighted_tree import (
    ConductanceTree,
    boundary_metric_weighted,
    green_weighted,
    solve_f,
    solve_f_iterative,
)

BIASED = ConductanceTree.homogeneous(2, 1, {Vertex((0,)): 10})


@pytest.mark.parametrize("q", [2, 3])
def test_unit_conductances_reproduce_the_homogeneous_tree(q):
    tree = ConductanceTree.homogeneous(q, 2)
    f = solve_f(tree)
    assert set(f.up.values()) | set(f.down.values()) == {Fraction(1, q)}
    verts = list(ball(q, 3))
    for x in verts[:12]:
        for y in verts[:12]:
            assert green_weighted(tree, f, x, y) == K.green(x, y, q)
            assert boundary_metric_weighted(tree, f, x, y) == (0 if x == y else ultra_metric(x, y, q))


def test_biased_edge_values():
    # derived by hand: F(c, o) = 10/11, F(o, c) = 10/11, G(o, o) = 44/7
    f = solve_f(BIASED)
    c = Vertex((0,))
    assert f.upward(c) == Fraction(10, 11)
    assert f.downward(c) == Fraction(10, 11)
    assert f.upward(Vertex((1,))) == Fraction(1, 2)
    assert green_weighted(BIASED, f, Vertex(), Vertex()) == Fraction(44, 7)
    assert f.delta == Fraction(10, 11)


def test_biased_transition_probabilities():
    o, c = Vertex(), Vertex((0,))
    assert BIASED.m(o) == 12
    assert BIASED.p(o, c) == Fraction(5, 6)
    assert BIASED.p(c, o) == Fraction(10, 12)
    assert BIASED.realized_constants()["m0"] == 3
    assert BIASED.realized_constants()["M0"] == 12


def random_tree(seed):
    rng = random.Random(seed)
    q = rng.choice([2, 3])
    over = {v: Fraction(rng.randint(1, 6), rng.randint(1, 6)) for v in ball(q, 2) if len(v) and rng.random() < 0.5}
    return ConductanceTree.homogeneous(q, 2, over)


@given(st.integers(0, 2**32))
def test_exact_solve_has_zero_residual(seed):
    tree = random_tree(seed)
    f = solve_f(tree)
    for x, y in f.directed_edges():
        assert f.residual(x, y) == 0


@given(st.integers(0, 2**32))
def test_exact_solve_agrees_with_iteration(seed):
    tree = random_tree(seed)
    f = solve_f(tree)
    it = solve_f_iterative(tree, sweeps=400)
    for c in tree.edges:
        assert abs(float(f.upward(c)) - it["up"][c]) < 1e-9
        assert abs(float(f.downward(c)) - it["down"][c]) < 1e-9


@given(st.integers(0, 2**32))
def test_green_is_path_product_and_symmetric_under_reversibility(seed):
    tree = random_tree(seed)
    f = solve_f(tree)
    verts = sorted(tree.core)[:8]
    for x in verts:
        for y in verts:
            gxy = green_weighted(tree, f, x, y)
            gyx = green_weighted(tree, f, y, x)
            # m(x) G(x, y) = m(y) G(y, x) for a reversible walk
            assert tree.m(x) * gxy == tree.m(y) * gyx


@given(st.integers(0, 2**32))
def test_weighted_metric_is_an_ultrametric(seed):
    tree = random_tree(seed)
    f = solve_f(tree)
    verts = sorted(tree.core)
    rng = random.Random(seed)
    for _ in range(20):
        a, b, c = (rng.choice(verts) for _ in range(3))
        rho = lambda u, v: boundary_metric_weighted(tree, f, u, v)  # noqa: E731
        assert rho(a, c) <= max(rho(a, b), rho(b, c))


def test_csv_round_trip():
    buf = io.StringIO()
    BIASED.to_csv(buf)
    buf.seek(0)
    again = ConductanceTree.from_csv(buf, 2)
    assert again.edges == BIASED.edges


def test_recurrent_exterior_is_rejected():
    tree = ConductanceTree.homogeneous(1, 1)
    with pytest.raises(NotTransient):
        solve_f(tree)


def test_core_must_be_connected():
    with pytest.raises(InvalidAddress):
        ConductanceTree(2, {Vertex((0, 1)): 1})
    with pytest.raises(ValueError):
        ConductanceTree(2, {Vertex((0,)): 0})
