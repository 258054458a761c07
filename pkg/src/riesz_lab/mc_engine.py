"""Seeded Monte-Carlo oracles: random walks on trees and walk-on-spheres in the disk.

Every estimator splits its paths into replicas.  Each replica draws from its
own PCG64 stream spawned from the master seed, and replica results are merged
in replica order, so the same :class:`McConfig` always yields the same
estimate regardless of how many worker threads ran the replicas.

Tree walks are vectorised over paths.  A path at depth ``d`` is stored as the
breadth-first index of its ancestor at depth ``min(d, D)`` (``D`` is the
deepest level any target cares about) together with ``d`` and its confluent
depth with the target vertex.  A transient walk is stopped once it is
``escape_margin`` steps from the target, where the chance of ever coming
back is at most ``q^-escape_margin``; that bias is reported with the estimate.
"""
from __future__ import annotations

import cmath
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .tree_core import Vertex, check_q, confluent_depth, vertex_index
from .truncation import TruncationT

Z99 = 2.576


@dataclass(frozen=True)
class McConfig:
    seed: int = 20240601
    replicas: int = 8
    paths: int = 125_000  # per replica
    escape_margin: int = 30
    eps: float = 1e-6
    max_steps: int = 100_000

    def __post_init__(self):
        if self.replicas < 1 or self.paths < 1:
            raise ValueError("replicas and paths must be positive")
        if self.escape_margin < 1 or not 0 < self.eps < 1:
            raise ValueError("escape margin must be >= 1 and eps in (0, 1)")

    @property
    def total_paths(self) -> int:
        return self.replicas * self.paths


@dataclass(frozen=True)
class McEstimate:
    mean: float
    n: int
    variance: float
    discarded: int = 0
    bias_bound: float = 0.0

    @property
    def ci99(self) -> float:
        return Z99 * math.sqrt(self.variance / self.n) if self.n else math.inf

    def agrees(self, exact: float, k: float = 3.0) -> bool:
        return abs(self.mean - float(exact)) <= k * self.ci99 + self.bias_bound

    def row(self, target: str, oracle: Optional[float] = None) -> dict:
        out = {"target": target, "mean": self.mean, "n": self.n, "ci99": self.ci99}
        if oracle is not None:
            out["oracle"] = float(oracle)
            out["pass"] = self.agrees(oracle)
        return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RIESZ_LAB_THREADS", "1")))
    except ValueError:
        return 1


def run_replicas(cfg: McConfig, job: Callable[[np.random.Generator, int], tuple[np.ndarray, int]]) -> McEstimate:
    """Run ``job(rng, paths)`` once per replica and merge in replica order.

    ``job`` returns the per-path samples of the kept paths and the number of
    discarded paths.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replicas)
    gens = [np.random.Generator(np.random.PCG64(s)) for s in children]
    workers = min(_threads(), cfg.replicas)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda g: job(g, cfg.paths), gens))
    else:
        parts = [job(g, cfg.paths) for g in gens]
    n = 0
    s1 = 0.0
    s2 = 0.0
    discarded = 0
    for samples, lost in parts:
        samples = np.asarray(samples, dtype=float)
        n += samples.size
        s1 += math.fsum(samples)
        s2 += math.fsum(samples * samples)
        discarded += lost
    if n == 0:
        return McEstimate(math.nan, 0, math.nan, discarded)
    mean = s1 / n
    var = max(0.0, (s2 - n * mean * mean) / (n - 1)) if n > 1 else 0.0
    return McEstimate(mean, n, var, discarded)


# ---------------------------------------------------------------- tree walks

class _TreeWalk:
    """Vectorised simple random walk on T_q relative to a target vertex y."""

    def __init__(self, q: int, y: Vertex, depth_cap: int):
        self.q = q
        self.L = len(y)
        self.D = max(depth_cap, self.L)
        # label of y at depth j+1, padded so any depth index is valid
        self.ylab = np.array(list(y.word) + [-1] * (self.D + 2), dtype=np.int32)

    def start(self, x: Vertex, y: Vertex, n: int):
        anchor = x.prefix(min(len(x), self.D))
        idx = np.full(n, vertex_index(anchor, self.q), dtype=np.int64)
        d = np.full(n, len(x), dtype=np.int32)
        conf = np.full(n, confluent_depth(x, y), dtype=np.int32)
        return idx, d, conf

    def step(self, rng: np.random.Generator, idx, d, conf) -> None:
        """Advance every path by one step, in place."""
        q = self.q
        k = rng.integers(0, q + 1, size=d.size, dtype=np.int32)
        root = d == 0
        up = k == 0
        up &= ~root
        label = k - 1
        label[root] += 1
        onpath = conf == d
        inc = onpath & (d < self.L)
        inc &= ~up
        inc &= label == self.ylab[np.minimum(d, self.ylab.size - 1)]
        conf += inc
        conf -= onpath & up
        go_down = ~up & (d < self.D)
        if go_down.any():
            idx[go_down] = np.where(root[go_down], label[go_down], idx[go_down] * q + label[go_down])
        go_up = up & (d <= self.D)
        if go_up.any():
            idx[go_up] = np.where(d[go_up] == 1, 0, idx[go_up] // q)
        d += 1
        d -= 2 * up


# stopping rules are checked every few steps; the extra steps only move the
# stopping time, never the bias bound
_CHECK_EVERY = 4


def srw_cylinder_measure(x: Vertex, y: Vertex, q: int, cfg: McConfig = McConfig()) -> McEstimate:
    """Empirical nu_x(boundary of T_y) for simple random walk on T_q."""
    check_q(q)
    x.validate(q)
    y.validate(q)
    walk = _TreeWalk(q, y, max(len(x), len(y)))
    L = walk.L
    margin = cfg.escape_margin

    def job(rng, n):
        idx, d, conf = walk.start(x, y, n)
        out = np.zeros(n)
        alive = np.arange(n)
        steps = 0
        while alive.size and steps < cfg.max_steps:
            if steps % _CHECK_EVERY == 0:
                inside = conf == L
                hit = inside & (d >= L + margin)
                away = ~inside & (d + L - 2 * conf >= margin)
                out[alive[hit]] = 1.0
                keep = ~(hit | away)
                alive, idx, d, conf = alive[keep], idx[keep], d[keep], conf[keep]
                if not alive.size:
                    break
            walk.step(rng, idx, d, conf)
            steps += 1
        mask = np.ones(n, dtype=bool)
        mask[alive] = False
        return out[mask], int(alive.size)

    est = run_replicas(cfg, job)
    return McEstimate(est.mean, est.n, est.variance, est.discarded, float(q) ** (-margin))


def srw_expected_visits(
    x: Vertex,
    y: Vertex,
    q: int,
    cfg: McConfig = McConfig(),
    truncation: Optional[TruncationT] = None,
) -> McEstimate:
    """Empirical G(x, y): visits to y, optionally before the walk hits Gamma^(t)."""
    check_q(q)
    x.validate(q)
    y.validate(q)
    k = truncation.k if truncation is not None else 0
    if truncation is not None:
        if truncation.q != q:
            raise ValueError("truncation built for another q")
        # targets inside a chopped branch are never reached, and a start there is outside T^(t)
        if truncation.is_chopped(x) and x not in truncation.gamma_set:
            raise ValueError(f"{x} is not a vertex of T^(t)")
        if x in truncation.gamma_set or truncation.is_chopped(y):
            return McEstimate(0.0, cfg.total_paths, 0.0)
    walk = _TreeWalk(q, y, max(len(x), len(y), k))
    L = walk.L
    margin = cfg.escape_margin
    gamma_idx = None
    if truncation is not None:
        gamma_idx = np.sort(np.array([vertex_index(g, q) for g in truncation.gamma], dtype=np.int64))

    def job(rng, n):
        idx, d, conf = walk.start(x, y, n)
        visits = np.zeros(n)
        alive = np.arange(n)
        dead = np.zeros(n, dtype=bool)  # absorbed on Gamma, waiting for compaction
        steps = 0
        while alive.size and steps < cfg.max_steps:
            at_y = (conf == L) & (d == L)
            if at_y.any():
                visits[alive[at_y & ~dead]] += 1.0
            if gamma_idx is not None:
                lvl = np.flatnonzero(d == k)
                if lvl.size:
                    pos = np.minimum(np.searchsorted(gamma_idx, idx[lvl]), gamma_idx.size - 1)
                    dead[lvl[gamma_idx[pos] == idx[lvl]]] = True
            if steps % _CHECK_EVERY == 0:
                keep = ~dead & (d + L - 2 * conf < margin)
                alive, idx, d, conf, dead = alive[keep], idx[keep], d[keep], conf[keep], dead[keep]
                if not alive.size:
                    break
            walk.step(rng, idx, d, conf)
            steps += 1
        mask = np.ones(n, dtype=bool)
        mask[alive] = False
        return visits[mask], int(alive.size)

    est = run_replicas(cfg, job)
    bias = (q / (q - 1)) * float(q) ** (-margin)
    return McEstimate(est.mean, est.n, est.variance, est.discarded, bias)


class _WeightedChain:
    """The walk of a ConductanceTree on integer states.

    Core vertices and the first exterior layer get ids; a deeper exterior
    vertex is stored as the id of its first-layer ancestor plus an excess
    depth, since below the core every step is homogeneous.
    """

    def __init__(self, tree):
        self.q_ext = tree.q_ext
        core = sorted(tree.core, key=lambda v: (len(v), v.word))
        ext = [c for v in core if tree.is_leaf(v) for c in tree.children(v)]
        self.verts = core + ext
        self.ids = {v: i for i, v in enumerate(self.verts)}
        self.n_core = len(core)
        width = max(len(tree.neighbours(v)) for v in core)
        self.nbr = np.zeros((len(core), width), dtype=np.int64)
        self.cum = np.ones((len(core), width))
        for i, v in enumerate(core):
            nb = tree.neighbours(v)
            w = np.array([float(tree.conductance(v, u)) for u in nb])
            self.nbr[i, : len(nb)] = [self.ids[u] for u in nb]
            self.nbr[i, len(nb):] = self.ids[nb[-1]]
            self.cum[i, : len(nb)] = np.cumsum(w / w.sum())
        self.parent = np.array([self.ids[v.parent] if len(v) else -1 for v in self.verts], dtype=np.int64)

    def state_of(self, v: Vertex) -> int:
        if v not in self.ids:
            raise ValueError(f"{v} is neither in the core nor one step below it")
        return self.ids[v]

    def step(self, rng: np.random.Generator, sid, e) -> None:
        u = rng.random(sid.size)
        core = sid < self.n_core
        ci = np.flatnonzero(core)
        if ci.size:
            rows = sid[ci]
            j = (u[ci, None] > self.cum[rows]).sum(axis=1)
            j = np.minimum(j, self.cum.shape[1] - 1)
            sid[ci] = self.nbr[rows, j]
        xi = np.flatnonzero(~core)
        if xi.size:
            up = u[xi] < 1.0 / (self.q_ext + 1)
            top = up & (e[xi] == 0)
            sid[xi[top]] = self.parent[sid[xi[top]]]
            e[xi] += np.where(up, -1, 1)
            e[xi[top]] = 0


def _weighted_run(tree, x: Vertex, y: Vertex, cfg: McConfig, stop_at_y: bool) -> McEstimate:
    chain = _WeightedChain(tree)
    sx, sy = chain.state_of(x), chain.state_of(y)
    margin = cfg.escape_margin

    def job(rng, n):
        sid = np.full(n, sx, dtype=np.int64)
        e = np.zeros(n, dtype=np.int64)
        out = np.zeros(n)
        alive = np.arange(n)
        steps = 0
        while alive.size and steps < cfg.max_steps:
            at_y = (sid == sy) & (e == 0)
            if stop_at_y:
                out[alive[at_y]] = 1.0
                keep = ~at_y & (e < margin)
            else:
                out[alive[at_y]] += 1.0
                keep = e < margin
            alive, sid, e = alive[keep], sid[keep], e[keep]
            if not alive.size:
                break
            chain.step(rng, sid, e)
            steps += 1
        mask = np.ones(n, dtype=bool)
        mask[alive] = False
        return out[mask], int(alive.size)

    est = run_replicas(cfg, job)
    # returning from excess depth `margin` costs q_ext^-margin; each return adds
    # G(y, y) expected visits, taken to be at most 100 here
    bias = float(tree.q_ext) ** (-margin) * (1 if stop_at_y else 100)
    return McEstimate(est.mean, est.n, est.variance, est.discarded, bias)


def weighted_walk_visits(tree, x: Vertex, y: Vertex, cfg: McConfig = McConfig()) -> McEstimate:
    """Empirical G(x, y) for the walk driven by a ConductanceTree."""
    return _weighted_run(tree, x, y, cfg, stop_at_y=False)


def weighted_hit_frequency(tree, x: Vertex, y: Vertex, cfg: McConfig = McConfig()) -> McEstimate:
    """Empirical F(x, y): the fraction of walks from x that ever visit y."""
    return _weighted_run(tree, x, y, cfg, stop_at_y=True)


# ---------------------------------------------------------------- walk on spheres

def _on_circle(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


def wos_harmonic_measure(
    z: complex,
    arcs: Sequence[tuple[complex, float]],
    cfg: McConfig = McConfig(),
) -> McEstimate:
    """Estimate nu_z of a union of boundary arcs {xi : |xi - zeta| <= r}.

    Each path jumps to a uniform point on the largest circle around it inside
    D until it is within ``eps`` of the unit circle, then is projected radially.
    """
    z = complex(z)
    if abs(z) >= 1:
        raise ValueError("the starting point must lie in the open disk")
    centres = np.array([complex(c) for c, _ in arcs])
    radii = np.array([float(r) for _, r in arcs])

    def job(rng, n):
        w = np.full(n, z, dtype=complex)
        out = np.zeros(n)
        alive = np.arange(n)
        steps = 0
        while alive.size and steps < cfg.max_steps:
            r = 1.0 - np.abs(w)
            fin = r < cfg.eps
            if fin.any():
                xi = w[fin] / np.abs(w[fin])
                inside = (np.abs(xi[:, None] - centres[None, :]) <= radii[None, :]).any(axis=1) if centres.size else np.zeros(xi.size, bool)
                out[alive[fin]] = inside
                keep = ~fin
                alive, w, r = alive[keep], w[keep], r[keep]
            if not alive.size:
                break
            w = w + r * _on_circle(rng, w.size)
            steps += 1
        mask = np.ones(n, dtype=bool)
        mask[alive] = False
        return out[mask], int(alive.size)

    return run_replicas(cfg, job)


def wos_truncated_green_disk(
    z: complex,
    E: Sequence[complex],
    t: float,
    cfg: McConfig = McConfig(),
) -> McEstimate:
    """Estimate G_{D^(t)}(z, 0) = log(1/|z|) - E[log(1/|Z|) 1{Z on Gamma^(t)}].

    D^(t) is the part of D at chordal distance more than t from the finite set
    E; the walk stops on the unit circle (weight 0) or on one of the circles
    |w - e| = t (weight G_D(w, 0)).
    """
    z = complex(z)
    E = np.array([complex(e) for e in E])
    if not 0 < abs(z) < 1:
        raise ValueError("z must lie in the punctured disk")
    if E.size and np.min(np.abs(z - E)) <= t:
        raise ValueError("z must lie in D^(t)")
    g0 = math.log(1.0 / abs(z))

    def job(rng, n):
        w = np.full(n, z, dtype=complex)
        out = np.full(n, g0)
        alive = np.arange(n)
        steps = 0
        while alive.size and steps < cfg.max_steps:
            r_out = 1.0 - np.abs(w)
            if E.size:
                r_in = np.min(np.abs(w[:, None] - E[None, :]), axis=1) - t
            else:
                r_in = np.full(w.size, np.inf)
            r = np.minimum(r_out, r_in)
            fin = r < cfg.eps
            if fin.any():
                gam = fin & (r_in <= r_out)
                out[alive[gam]] -= np.log(1.0 / np.abs(w[gam]))
                keep = ~fin
                alive, w, r = alive[keep], w[keep], r[keep]
            if not alive.size:
                break
            w = w + r * _on_circle(rng, w.size)
            steps += 1
        mask = np.ones(n, dtype=bool)
        mask[alive] = False
        return out[mask], int(alive.size)

    return run_replicas(cfg, job)


def disk_points_outside(E: Sequence[complex], s: float, count: int, seed: int = 7, rmax: float = 0.95) -> list[complex]:
    """Deterministic sample of points z with 0 < |z| <= rmax and dist(z, E) > s."""
    rng = np.random.Generator(np.random.PCG64(seed))
    pts: list[complex] = []
    while len(pts) < count:
        rad = rmax * math.sqrt(rng.random())
        z = cmath.rect(rad, 2 * math.pi * rng.random())
        if rad > 1e-3 and all(abs(z - complex(e)) > s for e in E):
            pts.append(z)
    return pts
