"""Nearest-neighbour walks from conductances on a tree.

A :class:`ConductanceTree` is a finite core (a rooted subtree with a
conductance on every edge) whose leaves continue as homogeneous trees of
branching ``q_ext`` with unit conductances.  From an exterior vertex the walk
returns to its parent with probability exactly ``1/q_ext``, so every first
passage probability F(x, y) between neighbours is obtained by exact
elimination: upward values leaf-inward, downward values top-down.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union

from ._exact import as_fraction
from .errors import InvalidAddress, NotTransient
from .tree_core import End, Vertex, ball, confluent

Point = Union[Vertex, End]


@dataclass(frozen=True)
class ConductanceTree:
    """Core edges are keyed by their lower endpoint: ``edges[c] = a(parent(c), c)``."""

    q_ext: int
    edges: Mapping[Vertex, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.q_ext, int) or self.q_ext < 1:
            raise ValueError("exterior branching must be an integer >= 1")
        clean = {}
        for c, a in self.edges.items():
            c = Vertex(tuple(c.word)) if isinstance(c, Vertex) else Vertex(tuple(c))
            a = as_fraction(a)
            if len(c) == 0:
                raise InvalidAddress("the root has no parent edge")
            if a <= 0:
                raise ValueError(f"conductance at {c} must be positive")
            clean[c] = a
        for c in clean:
            if len(c) > 1 and c.parent not in clean:
                raise InvalidAddress(f"{c} hangs below {c.parent}, which is not in the core")
        object.__setattr__(self, "edges", dict(sorted(clean.items())))

    @classmethod
    def homogeneous(cls, q: int, radius: int, overrides: Optional[Mapping[Vertex, Fraction]] = None) -> ConductanceTree:
        """B(o, radius) of T_q with unit conductances (plus overrides) and T_q outside."""
        edges = {v: Fraction(1) for v in ball(q, radius) if len(v)}
        for v, a in (overrides or {}).items():
            if v not in edges:
                raise InvalidAddress(f"{v} is not an edge of the core")
            edges[v] = as_fraction(a)
        return cls(q, edges)

    @cached_property
    def core(self) -> frozenset:
        return frozenset(self.edges) | {Vertex()}

    @cached_property
    def _core_children(self) -> dict:
        kids: dict = {}
        for c in self.edges:
            kids.setdefault(c.parent, []).append(c)
        return kids

    def is_core(self, v: Vertex) -> bool:
        return v in self.core

    def is_leaf(self, v: Vertex) -> bool:
        return v in self.core and v not in self._core_children

    def children(self, v: Vertex) -> list[Vertex]:
        kids = self._core_children.get(v)
        if kids is not None:
            return list(kids)
        n = self.q_ext + 1 if len(v) == 0 else self.q_ext
        return [v.child(a) for a in range(n)]

    def neighbours(self, v: Vertex) -> list[Vertex]:
        out = [] if len(v) == 0 else [v.parent]
        return out + self.children(v)

    def conductance(self, x: Vertex, y: Vertex) -> Fraction:
        c = y if len(y) == len(x) + 1 else x
        if c.parent != (x if c is y else y):
            raise ValueError(f"{x} and {y} are not neighbours")
        return self.edges.get(c, Fraction(1))

    def m(self, x: Vertex) -> Fraction:
        return sum((self.conductance(x, y) for y in self.neighbours(x)), Fraction(0))

    def p(self, x: Vertex, y: Vertex) -> Fraction:
        """Transition probability a(x, y) / m(x)."""
        return self.conductance(x, y) / self.m(x)

    def realized_constants(self) -> dict:
        """m0, M0, a0 over the core and its first exterior layer ("verified on core")."""
        verts = set(self.core)
        for v in self.core:
            verts.update(self.children(v))
        ms = [self.m(v) for v in verts]
        conds = list(self.edges.values()) + [Fraction(1)]
        return {"m0": min(ms), "M0": max(ms), "a0": min(conds), "scope": "verified on core"}

    # ---------------------------------------------------------------- CSV
    @classmethod
    def from_csv(cls, fh, q_ext: int) -> ConductanceTree:
        edges = {}
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#") or row[0] == "parent":
                continue
            parent = Vertex.parse(row[0])
            child = parent.child(int(row[1]))
            edges[child] = Fraction(int(row[2]), int(row[3]))
        return cls(q_ext, edges)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parent", "child_label", "numerator", "denominator"])
        for c, a in self.edges.items():
            w.writerow([str(c.parent), c.word[-1], a.numerator, a.denominator])


@dataclass
class FTable:
    """First-passage probabilities along directed edges, filled on demand."""

    tree: ConductanceTree
    up: dict = field(default_factory=dict)  # c -> F(c, parent(c))
    down: dict = field(default_factory=dict)  # c -> F(parent(c), c)

    def upward(self, c: Vertex) -> Fraction:
        """F(c, parent(c))."""
        if c in self.up:
            return self.up[c]
        tree = self.tree
        if not tree.is_core(c):
            val = Fraction(1, tree.q_ext)
        else:
            # from c: step to the parent, or into a child branch and come back first
            par = c.parent
            stay = sum((tree.p(c, w) * self.upward(w) for w in tree.children(c)), Fraction(0))
            val = tree.p(c, par) / (1 - stay) if stay < 1 else Fraction(1)
        if val >= 1:
            raise NotTransient(f"F({c}, parent) = {val} reaches 1")
        self.up[c] = val
        return val

    def downward(self, c: Vertex) -> Fraction:
        """F(parent(c), c)."""
        if c in self.down:
            return self.down[c]
        tree = self.tree
        x = c.parent
        stay = Fraction(0)
        for w in tree.neighbours(x):
            if w == c:
                continue
            back = self.downward(x) if len(w) < len(x) else self.upward(w)
            stay += tree.p(x, w) * back
        val = tree.p(x, c) / (1 - stay) if stay < 1 else Fraction(1)
        if val >= 1:
            raise NotTransient(f"F(parent, {c}) = {val} reaches 1")
        self.down[c] = val
        return val

    def edge(self, x: Vertex, y: Vertex) -> Fraction:
        if len(y) == len(x) - 1:
            return self.upward(x)
        return self.downward(y)

    def path(self, x: Vertex, y: Vertex) -> Fraction:
        """F(x, y) as the product of edge values along the geodesic."""
        c = confluent(x, y)
        out = Fraction(1)
        for n in range(len(x), len(c), -1):
            out *= self.upward(x.prefix(n))
        for n in range(len(c) + 1, len(y) + 1):
            out *= self.downward(y.prefix(n))
        return out

    def residual(self, x: Vertex, y: Vertex) -> Fraction:
        """F(x,y) - p(x,y) - sum_{w != y} p(x,w) F(w,x) F(x,y); zero for an exact solve."""
        tree = self.tree
        f = self.edge(x, y)
        s = sum((tree.p(x, w) * self.edge(w, x) for w in tree.neighbours(x) if w != y), Fraction(0))
        return f - tree.p(x, y) - s * f

    @property
    def delta(self) -> Fraction:
        return max(list(self.up.values()) + list(self.down.values()))

    def directed_edges(self) -> Iterable[tuple[Vertex, Vertex]]:
        for c in self.tree.edges:
            yield c, c.parent
            yield c.parent, c


def solve_f(tree: ConductanceTree) -> FTable:
    """Exact F on every directed core edge and the exterior edges at the leaves."""
    table = FTable(tree)
    for c in sorted(tree.core, key=len, reverse=True):
        if len(c):
            table.upward(c)
    for v in sorted(tree.core, key=len):
        for c in tree.children(v):
            table.downward(c)
    return table


def solve_f_iterative(tree: ConductanceTree, sweeps: int = 200) -> dict:
    """Float fixed-point iteration from F = 0 on core edges (cross-check oracle)."""
    tree_edges = list(tree.edges)
    up = {c: 0.0 for c in tree_edges}
    down = {c: 0.0 for c in tree_edges}
    ext = 1.0 / tree.q_ext

    def f_up(w):
        return up[w] if w in up else ext

    def f_down(w):
        return down.get(w, 0.0)

    prob = {}
    for c in tree_edges:
        for a, b in ((c, c.parent), (c.parent, c)):
            for w in tree.neighbours(a):
                prob.setdefault((a, w), float(tree.p(a, w)))
    for _ in range(sweeps):
        for c in tree_edges:
            x = c.parent
            # F(c, x) = p(c,x) + sum_{w ~ c, w != x} p(c,w) F(w,c) F(c,x)
            s = sum(prob[c, w] * f_up(w) for w in tree.children(c))
            up[c] = prob[c, x] + s * up[c]
            s = 0.0
            for w in tree.neighbours(x):
                if w == c:
                    continue
                back = f_down(x) if len(w) < len(x) else f_up(w)
                s += prob[x, w] * back
            down[c] = prob[x, c] + s * down[c]
    return {"up": up, "down": down}


def green_weighted(tree: ConductanceTree, f: FTable, x: Vertex, y: Vertex) -> Fraction:
    """G(x, y) = F(x, y) G(y, y) with G(y, y) = 1 / (1 - sum_w p(y, w) F(w, y))."""
    ret = sum((tree.p(y, w) * f.edge(w, y) for w in tree.neighbours(y)), Fraction(0))
    if ret >= 1:
        raise NotTransient(f"the walk returns to {y} almost surely")
    return f.path(x, y) / (1 - ret)


def boundary_metric_weighted(tree: ConductanceTree, f: FTable, w: Point, z: Point) -> Fraction:
    """rho(w, z) = F(w ^ z, o), and 0 when w = z."""
    if w == z:
        return Fraction(0)
    c = confluent(w, z)
    return f.path(c, Vertex())
