"""Truncated trees T^(t): chop off every level-k cylinder that meets E.

The walk on T^(t) is simple random walk on T_q stopped on Gamma^(t).  Only the
strict ancestors of Gamma^(t) (the *core*) need unknowns: every other vertex of
T^(t) roots a subtree free of Gamma, and from there the walk reaches its parent
with probability exactly 1/q, so such a branch folds into the equation of its
core parent.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from typing import Optional, Sequence

from ._exact import as_fraction
from .errors import OutOfRange, OutsideDomain, SingularSystem
from .tree_core import (
    BoundarySetT,
    Vertex,
    check_q,
    cylinder_measure,
)
from . import tree_kernels as K


def level_of(t, q: int) -> int:
    """The k with q^-k <= t < q^-(k-1)."""
    check_q(q)
    t = as_fraction(t)
    if not 0 < t < 1:
        raise OutOfRange(f"t = {t} is not in (0, 1)")
    k = 1
    while Fraction(1, q**k) > t:
        k += 1
    return k


@dataclass(frozen=True)
class TruncationT:
    q: int
    t: Fraction
    k: int
    gamma: tuple[Vertex, ...]
    E: BoundarySetT
    lambda_Et: Fraction
    core: tuple[Vertex, ...] = field(repr=False, default=())

    @cached_property
    def gamma_set(self) -> frozenset:
        return frozenset(self.gamma)

    @cached_property
    def core_set(self) -> frozenset:
        return frozenset(self.core)

    def is_chopped(self, x: Vertex) -> bool:
        """True when x lies in some T_y, y in Gamma (Gamma itself included)."""
        return len(x) >= self.k and x.prefix(self.k) in self.gamma_set

    def in_domain(self, x: Vertex) -> bool:
        return not self.is_chopped(x)

    def gateway(self, x: Vertex) -> Vertex:
        """Deepest ancestor of x (x included) that belongs to the core."""
        cs = self.core_set
        n = len(x)
        while n > 0 and x.prefix(n) not in cs:
            n -= 1
        return x.prefix(n)


def build_truncation(E: BoundarySetT, t) -> TruncationT:
    """Gamma^(t), its level k and lambda(E^(t)) for the closed set E."""
    t = as_fraction(t)
    q = E.q
    k = level_of(t, q)
    gamma = tuple(sorted(E.gamma(k)))
    lam = sum((cylinder_measure(y, q) for y in gamma), Fraction(0))
    core = sorted({y.prefix(j) for y in gamma for j in range(k)}, key=lambda v: (len(v), v.word))
    return TruncationT(q, t, k, gamma, E, lam, tuple(core))


# ---------------------------------------------------------------- linear algebra

def bareiss_solve(A: Sequence[Sequence[int]], B: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    """Solve A X = B exactly for integer A, B by fraction-free elimination.

    Returns X as a list of rows (one row per unknown, one column per RHS).
    """
    n = len(A)
    m = len(B[0]) if n else 0
    M = [list(map(int, A[i])) + list(map(int, B[i])) for i in range(n)]
    prev = 1
    for kk in range(n):
        piv = next((r for r in range(kk, n) if M[r][kk] != 0), None)
        if piv is None:
            raise SingularSystem("singular hitting system")
        if piv != kk:
            M[kk], M[piv] = M[piv], M[kk]
        akk = M[kk][kk]
        rowk = M[kk]
        for i in range(kk + 1, n):
            aik = M[i][kk]
            rowi = M[i]
            for j in range(kk + 1, n + m):
                rowi[j] = (akk * rowi[j] - aik * rowk[j]) // prev
            rowi[kk] = 0
        prev = akk
    X = [[Fraction(0)] * m for _ in range(n)]
    for c in range(m):
        for i in range(n - 1, -1, -1):
            s = Fraction(M[i][n + c])
            for j in range(i + 1, n):
                if M[i][j]:
                    s -= M[i][j] * X[j][c]
            X[i][c] = s / M[i][i]
    return X


# ---------------------------------------------------------------- hitting problem

@dataclass(frozen=True)
class HittingSolution:
    """Hitting distribution of Gamma^(t) from x, plus the core solve it came from."""

    x: Vertex
    nu: dict  # y in Gamma -> nu_x^(t)(y)
    core_values: dict  # core vertex -> {y: nu_v(y)}

    @property
    def total(self) -> Fraction:
        return sum(self.nu.values(), Fraction(0))


_SOLVE_CACHE: dict = {}


def _core_solve(tr: TruncationT) -> dict:
    """nu_v(y) for every core vertex v and every y in Gamma."""
    key = (tr.q, tr.k, tr.gamma)
    if key in _SOLVE_CACHE:
        return _SOLVE_CACHE[key]
    q = tr.q
    core = list(tr.core)
    pos = {v: i for i, v in enumerate(core)}
    gpos = {y: j for j, y in enumerate(tr.gamma)}
    n, m = len(core), len(tr.gamma)
    # q(q+1) h(v) - q h(parent) - q sum_core h(c) - n_free h(v) = q sum_gamma 1{c = y}
    A = [[0] * n for _ in range(n)]
    B = [[0] * m for _ in range(n)]
    for v, i in pos.items():
        diag = q * (q + 1)
        if len(v):
            A[i][pos[v.parent]] -= q
        for c in v.children(q):
            if c in pos:
                A[i][pos[c]] -= q
            elif c in gpos:
                B[i][gpos[c]] += q
            else:
                diag -= 1
        A[i][i] += diag
    X = bareiss_solve(A, B) if n else []
    out = {v: {y: X[i][j] for y, j in gpos.items()} for v, i in pos.items()}
    _SOLVE_CACHE[key] = out
    return out


def solve_hitting(tr: TruncationT, x: Vertex) -> HittingSolution:
    """Exact nu_x^(t)(y), the chance that the walk from x first hits Gamma^(t) at y."""
    x.validate(tr.q)
    core = _core_solve(tr)
    if x in tr.gamma_set:
        return HittingSolution(x, {y: Fraction(int(y == x)) for y in tr.gamma}, core)
    if tr.is_chopped(x):
        raise OutsideDomain(f"{x} lies beyond Gamma^(t)")
    x0 = tr.gateway(x)
    damp = Fraction(1, tr.q ** (len(x) - len(x0)))
    return HittingSolution(x, {y: damp * p for y, p in core[x0].items()}, core)


def escape_probability(tr: TruncationT, x: Vertex) -> Fraction:
    """Probability that the walk from x never reaches Gamma^(t).

    Solved on its own system (with explicit escape terms from free branches)
    so that nu_x(Gamma) + escape = 1 is a genuine cross-check.
    """
    q = tr.q
    if x in tr.gamma_set:
        return Fraction(0)
    if tr.is_chopped(x):
        raise OutsideDomain(f"{x} lies beyond Gamma^(t)")
    core = list(tr.core)
    pos = {v: i for i, v in enumerate(core)}
    n = len(core)
    rows = []
    for v in core:
        row = [Fraction(0)] * (n + 1)
        row[pos[v]] += q + 1
        if len(v):
            row[pos[v.parent]] -= 1
        for c in v.children(q):
            if c in pos:
                row[pos[c]] -= 1
            elif c in tr.gamma_set:
                pass
            else:
                # e(c) = (1 - 1/q) + e(v)/q
                row[pos[v]] -= Fraction(1, q)
                row[n] += 1 - Fraction(1, q)
        rows.append(row)
    e = _gauss(rows)
    x0 = tr.gateway(x)
    d = len(x) - len(x0)
    reach = Fraction(1, q**d)
    return (1 - reach) + reach * e[pos[x0]]


def _gauss(rows: list[list[Fraction]]) -> list[Fraction]:
    n = len(rows)
    for kk in range(n):
        piv = next((r for r in range(kk, n) if rows[r][kk] != 0), None)
        if piv is None:
            raise SingularSystem("singular escape system")
        rows[kk], rows[piv] = rows[piv], rows[kk]
        for i in range(n):
            if i != kk and rows[i][kk] != 0:
                f = rows[i][kk] / rows[kk][kk]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[kk])]
    return [rows[i][n] / rows[i][i] for i in range(n)]


# ---------------------------------------------------------------- truncated Green

def g_correction(tr: TruncationT, x: Vertex) -> Fraction:
    """g^(t)(x) = sum_y G(y, o) nu_x^(t)(y)."""
    sol = solve_hitting(tr, x)
    o = Vertex()
    return sum((K.green(y, o, tr.q) * p for y, p in sol.nu.items()), Fraction(0))


def truncated_green(tr: TruncationT, x: Vertex) -> Fraction:
    """G_{T^(t)}(x, o); zero on Gamma^(t) by convention."""
    if x in tr.gamma_set:
        return Fraction(0)
    return K.green(x, Vertex(), tr.q) - g_correction(tr, x)


@dataclass
class GreenBoundReport:
    q: int
    t: Fraction
    k: int
    gamma_size: int
    min_ratio: Fraction
    passed: bool
    checked: int
    skipped: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "t": f"{self.t.numerator}/{self.t.denominator}",
            "k": self.k,
            "|gamma|": self.gamma_size,
            "min_ratio_num": self.min_ratio.numerator,
            "min_ratio_den": self.min_ratio.denominator,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def verify_green_bound(tr: TruncationT, radius: int) -> GreenBoundReport:
    """Check G(x,o) >= G_{T^(t)}(x,o) >= ((q-1)/q) G(x,o) on T^(t) within B(o, radius).

    Vertices of T^(t) outside the core take the values of their gateway
    scaled by the same power of 1/q on both sides, so every vertex of a free
    branch at a given depth has the same ratio.  The check visits each core
    vertex and, for each of its free children, one representative per depth,
    and counts the vertices each representative stands for.
    """
    q = tr.q
    lower = Fraction(q - 1, q)
    o = Vertex()
    cs = tr.core_set
    skipped = [y for y in tr.gamma if len(y) <= radius]
    min_ratio: Optional[Fraction] = None
    failures = []
    checked = 0

    def check(x: Vertex, weight: int):
        nonlocal min_ratio, checked
        full = K.green(x, o, q)
        trunc = truncated_green(tr, x)
        ratio = trunc / full
        checked += weight
        if min_ratio is None or ratio < min_ratio:
            min_ratio = ratio
        if not (full >= trunc and ratio >= lower):
            failures.append(str(x))

    for v in tr.core:
        if len(v) > radius:
            continue
        check(v, 1)
        for c in v.children(q):
            if c in cs or c in tr.gamma_set:
                continue
            rep = c
            for d in range(len(c), radius + 1):
                check(rep, q ** (d - len(c)))
                rep = rep.child(0)
    if min_ratio is None:
        min_ratio = Fraction(1)
    return GreenBoundReport(q, tr.t, tr.k, len(tr.gamma), min_ratio, not failures, checked, skipped, failures)


def domain_vertices(tr: TruncationT, radius: int):
    """Every vertex of T^(t) in B(o, radius), breadth first (Gamma excluded)."""
    frontier = [Vertex()]
    while frontier:
        nxt = []
        for v in frontier:
            yield v
            if len(v) < radius:
                for c in v.children(tr.q):
                    if not tr.is_chopped(c):
                        nxt.append(c)
        frontier = nxt
