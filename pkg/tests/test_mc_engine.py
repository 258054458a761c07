from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from riesz_lab import mc_engine as mc
from riesz_lab import tree_kernels as K
from riesz_lab.tree_core import Vertex, parse_boundary_set
from riesz_lab.truncation import build_truncation, truncated_green
from riesz_lab.weighted_tree import ConductanceTree, green_weighted, solve_f

SMALL = mc.McConfig(seed=11, replicas=4, paths=10_000)


def test_ci99_formula():
    est = mc.McEstimate(0.5, 10_000, 0.25)
    assert math.isclose(est.ci99, 2.576 * 0.005)
    assert est.agrees(0.5 + 2 * est.ci99)
    assert not est.agrees(0.5 + 4 * est.ci99)


def test_run_replicas_merges_in_order():
    def job(rng, n):
        return rng.random(n), 0

    a = mc.run_replicas(SMALL, job)
    b = mc.run_replicas(SMALL, job)
    assert a == b
    assert a.n == SMALL.total_paths
    streams = [np.random.Generator(np.random.PCG64(s)).random(SMALL.paths)
               for s in np.random.SeedSequence(SMALL.seed).spawn(SMALL.replicas)]
    assert math.isclose(a.mean, float(np.concatenate(streams).mean()))


def test_thread_count_does_not_change_estimates(monkeypatch):
    monkeypatch.setenv("RIESZ_LAB_THREADS", "1")
    one = mc.srw_cylinder_measure(Vertex(), Vertex((0,)), 2, SMALL)
    monkeypatch.setenv("RIESZ_LAB_THREADS", "4")
    four = mc.srw_cylinder_measure(Vertex(), Vertex((0,)), 2, SMALL)
    assert one == four


def test_cylinder_estimate_matches_exact():
    for q, x, y in [(2, Vertex(), Vertex((0,))), (3, Vertex((1,)), Vertex((1, 2))), (2, Vertex((0, 1)), Vertex((1,)))]:
        est = mc.srw_cylinder_measure(x, y, q, SMALL)
        assert est.agrees(K.harmonic_measure_cylinder(x, y, q))


def test_visit_estimate_matches_exact():
    for q, x, y in [(2, Vertex(), Vertex()), (3, Vertex((0, 1)), Vertex((2,)))]:
        est = mc.srw_expected_visits(x, y, q, SMALL)
        assert est.agrees(K.green(x, y, q))


def test_truncated_visits_match_exact():
    tr = build_truncation(parse_boundary_set("0:(0)", 2), Fraction(1, 4))
    for x in [Vertex(), Vertex((0,)), Vertex((1, 1))]:
        est = mc.srw_expected_visits(x, Vertex(), 2, SMALL, truncation=tr)
        assert est.agrees(truncated_green(tr, x))


def test_chopped_targets_are_never_visited():
    tr = build_truncation(parse_boundary_set("0:(0)", 2), Fraction(1, 4))
    assert mc.srw_expected_visits(Vertex(), Vertex((0, 0, 1)), 2, SMALL, truncation=tr).mean == 0
    assert mc.srw_expected_visits(Vertex((0, 0)), Vertex(), 2, SMALL, truncation=tr).mean == 0


def test_weighted_walk_matches_exact():
    tree = ConductanceTree.homogeneous(2, 1, {Vertex((0,)): 10})
    f = solve_f(tree)
    est = mc.weighted_walk_visits(tree, Vertex(), Vertex(), SMALL)
    assert est.agrees(green_weighted(tree, f, Vertex(), Vertex()))
    hit = mc.weighted_hit_frequency(tree, Vertex((0,)), Vertex(), SMALL)
    assert hit.agrees(f.upward(Vertex((0,))))


def test_wos_full_circle_and_arc_from_centre():
    assert mc.wos_harmonic_measure(0.3, [(1, 2.0)], SMALL).mean == 1
    r = 0.5
    # the arc |xi - 1| <= r has angular half-width 2 asin(r/2)
    exact = 2 * math.asin(r / 2) / math.pi
    assert mc.wos_harmonic_measure(0, [(1, r)], SMALL).agrees(exact)


def test_wos_green_without_holes_is_exact():
    est = mc.wos_truncated_green_disk(0.5, [], 0.1, SMALL)
    assert est.mean == pytest.approx(math.log(2), abs=1e-15)
    assert est.variance == 0


def test_wos_green_with_a_hole_is_between_bounds():
    z = -0.3
    est = mc.wos_truncated_green_disk(z, [1], 0.05, SMALL)
    g = math.log(1 / abs(z))
    assert g / 18 - 3 * est.ci99 <= est.mean <= g + 3 * est.ci99
    with pytest.raises(ValueError):
        mc.wos_truncated_green_disk(0.97, [1], 0.05, SMALL)


def test_disk_sample_points_avoid_e():
    pts = mc.disk_points_outside([1, -1j], 0.2, 30)
    assert len(pts) == 30
    assert all(abs(z - 1) > 0.2 and abs(z + 1j) > 0.2 and 0 < abs(z) <= 0.95 for z in pts)
    assert pts == mc.disk_points_outside([1, -1j], 0.2, 30)
