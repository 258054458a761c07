from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from riesz_lab import tree_kernels as K
from riesz_lab.errors import OutOfRange, OutsideDomain
from riesz_lab.tree_core import End, FiniteEnds, Vertex, parse_boundary_set
from riesz_lab.truncation import (
    bareiss_solve,
    build_truncation,
    domain_vertices,
    escape_probability,
    level_of,
    solve_hitting,
    truncated_green,
    verify_green_bound,
)


def random_ends(q, count, rng):
    ends = []
    for _ in range(count):
        pre = tuple([rng.randint(0, q)] + [rng.randint(0, q - 1) for _ in range(rng.randint(0, 3))])
        per = tuple(rng.randint(0, q - 1) for _ in range(rng.randint(1, 2)))
        ends.append(End(pre, per))
    return FiniteEnds(q, tuple(ends))


def test_level_of():
    assert level_of(Fraction(1, 2), 2) == 1
    assert level_of(Fraction(1, 3), 2) == 2
    assert level_of(Fraction(1, 9), 3) == 2
    with pytest.raises(OutOfRange):
        level_of(1, 2)


def test_single_end_truncation_values():
    E = parse_boundary_set("0:(0)", 2)
    tr = build_truncation(E, Fraction(1, 4))
    assert tr.k == 2
    assert tr.gamma == (Vertex((0, 0)),)
    assert tr.lambda_Et == Fraction(1, 6)
    assert truncated_green(tr, Vertex()) == Fraction(15, 8)
    assert truncated_green(tr, Vertex((0, 0))) == 0
    with pytest.raises(OutsideDomain):
        solve_hitting(tr, Vertex((0, 0, 1)))


def test_bareiss_against_fractions():
    A = [[2, 1, 0], [1, 3, 1], [0, 1, 4]]
    B = [[1], [2], [3]]
    X = bareiss_solve(A, B)
    for i in range(3):
        assert sum(A[i][j] * X[j][0] for j in range(3)) == B[i][0]


@given(st.sampled_from([2, 3]), st.integers(0, 2**32), st.integers(1, 3))
def test_hitting_plus_escape_is_one(q, seed, level):
    rng = random.Random(seed)
    E = random_ends(q, rng.randint(1, 3), rng)
    tr = build_truncation(E, Fraction(1, q**level))
    for x in list(domain_vertices(tr, level + 2))[:20]:
        assert solve_hitting(tr, x).total + escape_probability(tr, x) == 1


@given(st.sampled_from([2, 3]), st.integers(0, 2**32), st.integers(1, 4))
def test_green_bound_holds(q, seed, level):
    rng = random.Random(seed)
    tr = build_truncation(random_ends(q, rng.randint(1, 4), rng), Fraction(1, q**level))
    rep = verify_green_bound(tr, tr.k + 3)
    assert rep.passed
    assert rep.min_ratio >= Fraction(q - 1, q)


def test_green_bound_matches_brute_force():
    q = 2
    tr = build_truncation(parse_boundary_set("0:(1);2:(0)", q), Fraction(1, 8))
    rep = verify_green_bound(tr, tr.k + 2)
    brute = min(truncated_green(tr, x) / K.green(x, Vertex(), q) for x in domain_vertices(tr, tr.k + 2))
    assert rep.min_ratio == brute
    assert rep.checked == sum(1 for _ in domain_vertices(tr, tr.k + 2))


def test_truncated_green_is_harmonic_off_root():
    q = 3
    tr = build_truncation(parse_boundary_set("1:(2)", q), Fraction(1, 9))
    for x in domain_vertices(tr, 3):
        if x == Vertex() or x in tr.gamma_set:
            continue
        avg = sum(truncated_green(tr, y) for y in x.neighbours(q)) / (q + 1)
        assert avg == truncated_green(tr, x)
