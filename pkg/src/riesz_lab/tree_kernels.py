"""Closed-form kernels of simple random walk on T_q, all exact rationals."""
from __future__ import annotations

from fractions import Fraction

from .tree_core import End, Vertex, confluent_depth, cylinder_measure, graph_distance


def green(x: Vertex, y: Vertex, q: int) -> Fraction:
    return Fraction(q, q - 1) / q ** graph_distance(x, y)


def first_passage(x: Vertex, y: Vertex, q: int) -> Fraction:
    """Probability that the walk started at x ever visits y."""
    return Fraction(1, q ** graph_distance(x, y))


def busemann(x: Vertex, xi: End) -> int:
    return len(x) - 2 * confluent_depth(x, xi)


def martin(x: Vertex, xi: End, q: int) -> Fraction:
    return Fraction(q) ** (-busemann(x, xi))


def cylinder_pieces(x: Vertex, y: Vertex) -> list[tuple[int, Vertex, Vertex | None]]:
    """Split dT_y into pieces on which x ^ xi is constant.

    Each piece is ``(confluent depth, cylinder root, excluded sub-cylinder)``;
    the piece is dT_root minus dT_excluded.
    """
    if not y.is_prefix_of(x):
        return [(confluent_depth(x, y), y, None)]
    pieces = []
    for n in range(len(y), len(x)):
        pieces.append((n, x.prefix(n), x.prefix(n + 1)))
    pieces.append((len(x), x, None))
    return pieces


def harmonic_measure_cylinder(x: Vertex, y: Vertex, q: int) -> Fraction:
    """nu_x(dT_y), the chance that the walk from x converges to an end below y."""
    total = Fraction(0)
    for c, root, cut in cylinder_pieces(x, y):
        mass = cylinder_measure(root, q)
        if cut is not None:
            mass -= cylinder_measure(cut, q)
        total += Fraction(q) ** (2 * c - len(x)) * mass
    return total


def martin_limit(x: Vertex, xi: End, q: int, n: int) -> Fraction:
    """G(x, y_n) / G(o, y_n) for y_n the depth-n vertex toward xi."""
    y = xi.vertex(n)
    return green(x, y, q) / green(Vertex(), y, q)
