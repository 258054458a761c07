"""Exact functions on balls of T_q and the operators P and Laplacian.

A :class:`TreeFunction` stores integer numerators level by level over a single
common denominator.  Level ``n`` holds the ``(q+1) q^(n-1)`` vertices of depth
``n`` in the order of :func:`tree_core.level_vertices`, so the children of the
vertex with index ``i`` (``n >= 1``) sit at indices ``i*q .. i*q+q-1`` of level
``n+1``.  Arrays are ``int64`` while the values fit and Python ``int`` objects
otherwise, so every operation stays exact.
"""
from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Optional

import numpy as np

from . import tree_kernels as K
from .errors import NotSubharmonic, OutsideDomain, RadiusExhausted
from .tree_core import (
    End,
    Vertex,
    ball,
    check_q,
    level_size,
    vertex_from_index,
    vertex_index,
)

Extension = Callable[[Vertex], Fraction]

_INT64_SAFE = 2**62


def zero_extension(v: Vertex) -> Fraction:
    return Fraction(0)


def _to_int64_if_safe(arr: np.ndarray, headroom: int = 1) -> np.ndarray:
    if arr.dtype != object:
        return arr
    if arr.size == 0:
        return arr.astype(np.int64)
    hi = max(abs(int(arr.max())), abs(int(arr.min())))
    if hi * headroom < _INT64_SAFE:
        return arr.astype(np.int64)
    return arr


def _safe(arr: np.ndarray, headroom: int) -> np.ndarray:
    """Return an array on which ``headroom``-fold sums cannot overflow."""
    if arr.dtype == object or arr.size == 0:
        return arr
    hi = int(np.abs(arr).max())
    if hi * headroom >= _INT64_SAFE:
        return arr.astype(object)
    return arr


def _scale(arr: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return arr
    arr = _safe(arr, abs(k) + 1)
    if arr.dtype == object:
        return arr * k
    return arr * np.int64(k)


class TreeFunction:
    """Exact rational values on the closed ball B(o, radius) of T_q.

    ``extension`` optionally supplies values outside the ball; without it the
    operators refuse to look past the stored radius.
    """

    def __init__(
        self,
        q: int,
        radius: int,
        levels: Iterable[np.ndarray],
        den: int = 1,
        extension: Optional[Extension] = None,
    ):
        self.q = check_q(q)
        self.radius = int(radius)
        self.levels = tuple(levels)
        if len(self.levels) != self.radius + 1:
            raise ValueError("need one array per level 0..radius")
        for n, arr in enumerate(self.levels):
            if arr.shape != (level_size(q, n),):
                raise ValueError(f"level {n} has shape {arr.shape}")
        if den <= 0:
            raise ValueError("denominator must be positive")
        self.den = int(den)
        self.extension = extension

    # ----------------------------------------------------------- construction
    @classmethod
    def from_callable(
        cls, q: int, radius: int, fn: Callable[[Vertex], Fraction], extend: bool = False
    ) -> TreeFunction:
        values = [[Fraction(fn(v)) for v in _level(q, n)] for n in range(radius + 1)]
        den = 1
        for row in values:
            for x in row:
                den = den * x.denominator // math.gcd(den, x.denominator)
        levels = [
            _to_int64_if_safe(np.array([x.numerator * (den // x.denominator) for x in row], dtype=object), q + 2)
            for row in values
        ]
        return cls(q, radius, levels, den, extension=(lambda v: Fraction(fn(v))) if extend else None)

    @classmethod
    def from_dict(
        cls, q: int, radius: int, values: Mapping[Vertex, Fraction], extension: Optional[Extension] = None
    ) -> TreeFunction:
        def lookup(v):
            try:
                return values[v]
            except KeyError:
                raise OutsideDomain(f"no value at {v}") from None

        f = cls.from_callable(q, radius, lookup)
        f.extension = extension
        return f

    @classmethod
    def constant(cls, q: int, radius: int, c) -> TreeFunction:
        c = Fraction(c)
        levels = [np.full(level_size(q, n), c.numerator, dtype=object) for n in range(radius + 1)]
        levels = [_to_int64_if_safe(a, q + 2) for a in levels]
        return cls(q, radius, levels, c.denominator, extension=lambda v: c)

    @classmethod
    def radial(cls, q: int, radius: int, profile: Callable[[int], Fraction], extend: bool = True) -> TreeFunction:
        vals = [Fraction(profile(n)) for n in range(radius + 1)]
        den = functools.reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in vals), 1)
        levels = [
            _to_int64_if_safe(np.full(level_size(q, n), v.numerator * (den // v.denominator), dtype=object), q + 2)
            for n, v in enumerate(vals)
        ]
        ext = (lambda v: Fraction(profile(len(v)))) if extend else None
        return cls(q, radius, levels, den, extension=ext)

    # ----------------------------------------------------------------- access
    def __getitem__(self, v: Vertex) -> Fraction:
        n = len(v)
        if n <= self.radius:
            return Fraction(int(self.levels[n][vertex_index(v, self.q)]), self.den)
        if self.extension is None:
            raise OutsideDomain(f"{v} lies outside B(o,{self.radius}) and no extension is declared")
        return Fraction(self.extension(v))

    def __call__(self, v: Vertex) -> Fraction:
        return self[v]

    def vertices(self) -> Iterator[Vertex]:
        return ball(self.q, self.radius)

    def items(self) -> Iterator[tuple[Vertex, Fraction]]:
        for n in range(self.radius + 1):
            row = self.levels[n]
            for i, v in enumerate(_level(self.q, n)):
                yield v, Fraction(int(row[i]), self.den)

    def level_values(self, n: int) -> list[Fraction]:
        return [Fraction(int(x), self.den) for x in self.levels[n]]

    def as_dict(self) -> dict[Vertex, Fraction]:
        return dict(self.items())

    def restrict(self, radius: int) -> TreeFunction:
        if radius > self.radius:
            return self.extend_to(radius)
        return TreeFunction(self.q, radius, self.levels[: radius + 1], self.den, self.extension)

    def extend_to(self, radius: int) -> TreeFunction:
        """Materialise the extension on the levels beyond the stored radius."""
        if radius <= self.radius:
            return self.restrict(radius)
        if self.extension is None:
            raise OutsideDomain(f"cannot grow B(o,{self.radius}) without an extension")
        extra = [[Fraction(self.extension(v)) for v in _level(self.q, n)] for n in range(self.radius + 1, radius + 1)]
        den = self.den
        for row in extra:
            for x in row:
                den = den * x.denominator // math.gcd(den, x.denominator)
        k = den // self.den
        levels = [_scale(a, k) for a in self.levels]
        for row in extra:
            levels.append(
                _to_int64_if_safe(np.array([x.numerator * (den // x.denominator) for x in row], dtype=object), self.q + 2)
            )
        return TreeFunction(self.q, radius, levels, den, self.extension)

    def reduced(self) -> TreeFunction:
        g = self.den
        for a in self.levels:
            if g == 1:
                break
            if a.dtype == object:
                for x in a:
                    g = math.gcd(g, int(x))
                    if g == 1:
                        break
            else:
                g = math.gcd(g, int(np.gcd.reduce(a)))
        if g == 1:
            return self
        levels = [_to_int64_if_safe(a // g if a.dtype == object else a // np.int64(g), self.q + 2) for a in self.levels]
        return TreeFunction(self.q, self.radius, levels, self.den // g, self.extension)

    # ------------------------------------------------------------- arithmetic
    def _combine(self, other: TreeFunction, sign: int) -> TreeFunction:
        if other.q != self.q:
            raise ValueError("functions live on different trees")
        radius = min(self.radius, other.radius)
        den = self.den * other.den // math.gcd(self.den, other.den)
        a, b = den // self.den, den // other.den
        levels = []
        for n in range(radius + 1):
            x = _scale(self.levels[n], a)
            y = _scale(other.levels[n], b)
            x, y = _safe(x, 2), _safe(y, 2)
            if x.dtype != y.dtype:
                x, y = x.astype(object), y.astype(object)
            levels.append(x + y if sign > 0 else x - y)
        ext = None
        if self.extension is not None and other.extension is not None:
            e1, e2 = self.extension, other.extension
            ext = (lambda v: e1(v) + e2(v)) if sign > 0 else (lambda v: e1(v) - e2(v))
        return TreeFunction(self.q, radius, levels, den, ext).reduced()

    def __add__(self, other: TreeFunction) -> TreeFunction:
        return self._combine(other, +1)

    def __sub__(self, other: TreeFunction) -> TreeFunction:
        return self._combine(other, -1)

    def scale(self, c) -> TreeFunction:
        c = Fraction(c)
        levels = [_scale(a, c.numerator) for a in self.levels]
        ext = None
        if self.extension is not None:
            e = self.extension
            ext = lambda v: c * e(v)  # noqa: E731
        return TreeFunction(self.q, self.radius, levels, self.den * c.denominator, ext).reduced()

    def __neg__(self) -> TreeFunction:
        return self.scale(-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TreeFunction) or other.q != self.q or other.radius != self.radius:
            return NotImplemented
        return all(
            _equal_scaled(a, self.den, b, other.den) for a, b in zip(self.levels, other.levels)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"TreeFunction(q={self.q}, radius={self.radius})"

    # -------------------------------------------------------------- operators
    def neighbour_sums(self, n: int) -> np.ndarray:
        """Sum of neighbour numerators at every vertex of level n (n < radius)."""
        if n >= self.radius:
            raise OutsideDomain(f"level {n} needs values at depth {n + 1} > {self.radius}")
        q = self.q
        head = q + 2
        kids = _safe(self.levels[n + 1], head)
        if n == 0:
            return np.array([kids.sum()], dtype=kids.dtype)
        s = kids.reshape(-1, q).sum(axis=1)
        par = _safe(self.levels[n - 1], head)
        if n == 1:
            par_rep = np.full(s.shape, par[0], dtype=par.dtype)
        else:
            par_rep = np.repeat(par, q)
        if s.dtype != par_rep.dtype:
            s, par_rep = s.astype(object), par_rep.astype(object)
        return s + par_rep

    def p(self) -> TreeFunction:
        """Pf on the interior ball (or the full ball when an extension exists)."""
        f = self.extend_to(self.radius + 1) if self.extension is not None else self
        out_radius = f.radius - 1
        if out_radius < 0:
            raise RadiusExhausted("no interior vertex left")
        levels = [f.neighbour_sums(n) for n in range(out_radius + 1)]
        ext = None
        if self.extension is not None:
            src = self

            def ext(v, src=src):
                return apply_p(src, v)

        return TreeFunction(self.q, out_radius, levels, f.den * (self.q + 1), ext).reduced()

    def laplacian_levels(self) -> list[np.ndarray]:
        """Numerators of the Laplacian on the interior, over den*(q+1)."""
        out = []
        for n in range(self.radius):
            s = self.neighbour_sums(n)
            own = _scale(self.levels[n], self.q + 1)
            if s.dtype != own.dtype:
                s, own = s.astype(object), own.astype(object)
            out.append(s - own)
        return out

    def laplacian(self) -> TreeFunction:
        levels = self.laplacian_levels()
        return TreeFunction(self.q, self.radius - 1, levels, self.den * (self.q + 1)).reduced()


def _equal_scaled(a, da, b, db) -> bool:
    a = _scale(a, db)
    b = _scale(b, da)
    if a.dtype != b.dtype:
        a, b = a.astype(object), b.astype(object)
    return bool(np.all(a == b))


@functools.lru_cache(maxsize=64)
def _level_list(q: int, n: int) -> tuple[Vertex, ...]:
    return tuple(vertex_from_index(n, i, q) for i in range(level_size(q, n)))


def _level(q: int, n: int) -> tuple[Vertex, ...]:
    if level_size(q, n) <= 200_000:
        return _level_list(q, n)
    return tuple(vertex_from_index(n, i, q) for i in range(level_size(q, n)))


# ---------------------------------------------------------------- kernels as functions

def _confluent_depths(q: int, n: int, target: list[int]) -> np.ndarray:
    """|x ^ t| for every depth-n vertex x, where target[j] is the index of t's depth-j vertex."""
    size = level_size(q, n)
    idx = np.arange(size, dtype=np.int64)
    depth = np.zeros(size, dtype=np.int64)
    match = np.ones(size, dtype=bool)
    for j in range(1, min(n, len(target) - 1) + 1):
        anc = idx // (q ** (n - j))
        match &= anc == target[j]
        depth += match
    return depth


def _powers(q: int, emax: int, headroom: int) -> np.ndarray:
    vals = [q**e for e in range(emax + 1)]
    if vals[-1] * headroom < _INT64_SAFE:
        return np.array(vals, dtype=np.int64)
    return np.array(vals, dtype=object)


def martin_function(q: int, radius: int, xi: End) -> TreeFunction:
    """x -> K(x, xi) on B(o, radius), with the closed form as extension."""
    target = [vertex_index(xi.vertex(j), q) for j in range(radius + 1)]
    pw = _powers(q, 2 * radius, q + 2)
    levels = []
    for n in range(radius + 1):
        c = _confluent_depths(q, n, target)
        levels.append(pw[radius + 2 * c - n])
    return TreeFunction(q, radius, levels, q**radius, extension=lambda v: K.martin(v, xi, q))


def green_function(q: int, radius: int, y: Vertex) -> TreeFunction:
    """x -> G(x, y) on B(o, radius), with the closed form as extension."""
    m = len(y)
    target = [vertex_index(y.prefix(j), q) for j in range(m + 1)]
    shift = 1 + radius + m
    pw = _powers(q, shift, q + 2)
    levels = []
    for n in range(radius + 1):
        c = _confluent_depths(q, n, target)
        d = n + m - 2 * c
        levels.append(pw[shift - d])
    return TreeFunction(q, radius, levels, (q - 1) * q ** (radius + m), extension=lambda v: K.green(v, y, q))


def martin_combination(q: int, radius: int, terms: Iterable[tuple[Fraction, End]]) -> TreeFunction:
    """sum_i w_i K(., xi_i): a positive harmonic function when all w_i > 0."""
    out = None
    for w, xi in terms:
        f = martin_function(q, radius, xi).scale(w)
        out = f if out is None else out + f
    if out is None:
        return TreeFunction.constant(q, radius, 0)
    return out


# ---------------------------------------------------------------- scalar operators

def apply_p(f: TreeFunction, x: Vertex) -> Fraction:
    q = f.q
    total = Fraction(0)
    for y in x.neighbours(q):
        total += f[y]
    return total / (q + 1)


def laplacian(f: TreeFunction, x: Vertex) -> Fraction:
    return apply_p(f, x) - f[x]


@dataclass(frozen=True)
class SubharmonicCheck:
    ok: bool
    witness: Optional[Vertex] = None

    def __bool__(self) -> bool:
        return self.ok


def is_subharmonic(f: TreeFunction) -> SubharmonicCheck:
    """Check Laplacian >= 0 on every interior vertex, breadth-first."""
    for n, lap in enumerate(f.laplacian_levels()):
        bad = np.nonzero(lap < 0)[0]
        if bad.size:
            return SubharmonicCheck(False, vertex_from_index(n, int(bad[0]), f.q))
    return SubharmonicCheck(True)


def is_harmonic(f: TreeFunction) -> SubharmonicCheck:
    for n, lap in enumerate(f.laplacian_levels()):
        bad = np.nonzero(lap != 0)[0]
        if bad.size:
            return SubharmonicCheck(False, vertex_from_index(n, int(bad[0]), f.q))
    return SubharmonicCheck(True)


# ---------------------------------------------------------------- Riesz measures

@dataclass(frozen=True)
class RadialDensity:
    """Depth profile r(n): ``head[n]`` for small n, ``coef * ratio**n`` beyond."""

    head: tuple[Fraction, ...] = ()
    coef: Fraction = Fraction(0)
    ratio: Fraction = Fraction(0)

    def __call__(self, n: int) -> Fraction:
        if n < len(self.head):
            return Fraction(self.head[n])
        return self.coef * self.ratio**n

    def tail_sum(self, a: int) -> Fraction | float:
        """sum_{n >= a} r(n); math.inf when it diverges."""
        h = len(self.head)
        total = sum((Fraction(self.head[n]) for n in range(a, h)), Fraction(0))
        start = max(a, h)
        if self.coef == 0:
            return total
        if self.ratio >= 1:
            return math.inf
        return total + self.coef * self.ratio**start / (1 - self.ratio)


@dataclass(frozen=True)
class RieszMeasureT:
    """A nonnegative measure on T_q, stored as a density w.r.t. counting measure."""

    q: int
    density: Mapping[Vertex, Fraction] = field(default_factory=dict)
    radial: Optional[RadialDensity] = None
    # when set, the density is only known on B(o, window) (e.g. read off a ball)
    window: Optional[int] = None

    def __post_init__(self):
        clean = {v: Fraction(m) for v, m in self.density.items() if m != 0}
        for v, m in clean.items():
            if m < 0:
                raise ValueError(f"negative mass {m} at {v}")
        object.__setattr__(self, "density", clean)

    @classmethod
    def point(cls, q: int, y: Vertex, mass=1) -> RieszMeasureT:
        return cls(q, {y: Fraction(mass)})

    @property
    def is_finite(self) -> bool:
        return self.radial is None

    def __call__(self, x: Vertex) -> Fraction:
        m = self.density.get(x, Fraction(0))
        if self.radial is not None:
            m += self.radial(len(x))
        return m

    @property
    def support(self) -> tuple[Vertex, ...]:
        if self.radial is not None:
            raise ValueError("radial measures have infinite support")
        return tuple(sorted(self.density))

    @property
    def is_zero(self) -> bool:
        return not self.density and (self.radial is None or (not any(self.radial.head) and self.radial.coef == 0))


def riesz_measure(f: TreeFunction) -> RieszMeasureT:
    """mu = Pf - f on the interior ball; raises NotSubharmonic on a negative value."""
    check = is_subharmonic(f)
    if not check:
        raise NotSubharmonic(check.witness)
    den = f.den * (f.q + 1)
    dens = {}
    for n, lap in enumerate(f.laplacian_levels()):
        for i in np.nonzero(lap != 0)[0]:
            dens[vertex_from_index(n, int(i), f.q)] = Fraction(int(lap[i]), den)
    return RieszMeasureT(f.q, dens, window=f.radius - 1)


def green_potential(mu: RieszMeasureT, x: Vertex) -> Fraction | float:
    """G mu (x) exactly; ``math.inf`` when the series diverges."""
    q = mu.q
    total = Fraction(0)
    for y, m in mu.density.items():
        total += K.green(x, y, q) * m
    if mu.radial is None:
        return total
    r = mu.radial
    m = len(x)
    branch = lambda j: q + 1 if j == 0 else q  # noqa: E731
    s = Fraction(0)
    for j in range(m):
        tail = r.tail_sum(j + 1)
        if tail == math.inf:
            return math.inf
        s += Fraction(1, q ** (m - j)) * (r(j) + Fraction(branch(j) - 1, q) * tail)
    tail = r.tail_sum(m + 1)
    if tail == math.inf:
        return math.inf
    s += r(m) + Fraction(branch(m), q) * tail
    return total + Fraction(q, q - 1) * s


def potential_function(mu: RieszMeasureT, radius: int) -> TreeFunction:
    """x -> G mu(x) on B(o, radius) for finitely supported mu."""
    if not mu.is_finite:
        raise ValueError("potential_function needs a finitely supported measure")
    out = TreeFunction.constant(mu.q, radius, 0)
    for y, m in sorted(mu.density.items()):
        out = out + green_function(mu.q, radius, y).scale(m)
    return out


@dataclass(frozen=True)
class DecompositionCheck:
    ok: bool
    witness: Optional[Vertex] = None

    def __bool__(self) -> bool:
        return self.ok


def riesz_decomposition_check(f: TreeFunction, h: TreeFunction, mu: RieszMeasureT) -> DecompositionCheck:
    """Verify f = h - G mu pointwise on the common ball."""
    radius = min(f.radius, h.radius)
    if mu.is_finite:
        rhs = h.restrict(radius) - potential_function(mu, radius)
        lhs = f.restrict(radius)
        for n in range(radius + 1):
            a = _scale(lhs.levels[n], rhs.den).astype(object)
            b = _scale(rhs.levels[n], lhs.den).astype(object)
            bad = np.nonzero(a != b)[0]
            if bad.size:
                return DecompositionCheck(False, vertex_from_index(n, int(bad[0]), f.q))
        return DecompositionCheck(True)
    for v in ball(f.q, radius):
        g = green_potential(mu, v)
        if g == math.inf or f[v] != h[v] - g:
            return DecompositionCheck(False, v)
    return DecompositionCheck(True)


# ---------------------------------------------------------------- harmonic majorant

@dataclass
class MajorantResult:
    converged: bool
    iterations: int
    values: TreeFunction
    root_sequence: list[Fraction]
    increments: list[Fraction]
    growth: Optional[float] = None

    @property
    def status(self) -> str:
        return "converged" if self.converged else "not_converged"


def harmonic_majorant(
    f: TreeFunction, iters: int, threshold=Fraction(0), out_radius: int = 0
) -> MajorantResult:
    """Iterate P on a subharmonic f and report the exact monotone iterates.

    Without an extension each application of P costs one level of radius, so
    ``iters`` may not exceed ``f.radius - out_radius``.  The run stops early
    once the largest increment on the output ball is <= ``threshold``.
    """
    threshold = Fraction(threshold)
    if f.extension is None:
        if iters > f.radius - out_radius:
            raise RadiusExhausted(f"{iters} iterations need radius {out_radius + iters} > {f.radius}")
        cur = f
    else:
        cur = f.extend_to(out_radius + iters)
    roots = [cur[Vertex()]]
    incs: list[Fraction] = []
    done = 0
    converged = False
    for step in range(iters):
        nxt = TreeFunction(cur.q, cur.radius - 1, [cur.neighbour_sums(n) for n in range(cur.radius)],
                           cur.den * (cur.q + 1)).reduced()
        diff = nxt - cur.restrict(nxt.radius)
        lo = min(int(a.min()) for a in diff.levels)
        if lo < 0:
            bad = next(v for v, d in diff.items() if d < 0)
            raise NotSubharmonic(bad, f"P^n f decreased at {bad}")
        inc = Fraction(max(int(a.max()) for a in diff.levels), diff.den)
        incs.append(inc)
        # a radius-0 window sees only one parity class of the bipartite walk
        if inc <= threshold and diff.radius >= 1:
            converged = True
            break
        cur = nxt
        done = step + 1
        roots.append(cur[Vertex()])
    growth = None
    pos = [float(i) for i in incs if i > 0]
    if len(pos) >= 2:
        growth = (pos[-1] / pos[0]) ** (1.0 / (len(pos) - 1))
    return MajorantResult(converged, done, cur.restrict(out_radius), roots, incs, growth)


# ---------------------------------------------------------------- CSV

def to_csv(f: TreeFunction, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["vertex", "numerator", "denominator"])
    for v, x in f.items():
        w.writerow([str(v), x.numerator, x.denominator])


def from_csv(q: int, fh, extension: Optional[Extension] = None) -> TreeFunction:
    rows = list(csv.reader(fh))
    if rows and rows[0] and rows[0][0] == "vertex":
        rows = rows[1:]
    values = {}
    for row in rows:
        if not row:
            continue
        v = Vertex.parse(row[0], q)
        values[v] = Fraction(int(row[1]), int(row[2]))
    radius = max((len(v) for v in values), default=0)
    return TreeFunction.from_dict(q, radius, values, extension)
