"""Geometry of the homogeneous tree T_q and its space of ends.

Vertices are address words: the root is the empty word, the first label is
in ``0..q`` and every later label in ``0..q-1``.  With this alphabet every
word is a vertex and the depth of a vertex is its word length.

Ends are eventually periodic words ``prefix . cycle . cycle ...`` so that
confluents with other vertices and ends can be found in finite time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Iterator, Sequence, Union

from .errors import EmptySet, EqualEnds, InvalidAddress, PositiveMeasure


@dataclass(frozen=True)
class TreeParams:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or self.q < 2:
            raise ValueError(f"branching number must be an integer >= 2, got {self.q!r}")

    @property
    def degree(self) -> int:
        return self.q + 1


def check_q(q: int) -> int:
    return TreeParams(q).q


def _check_word(word: Sequence[int], q: int) -> None:
    for i, a in enumerate(word):
        top = q if i == 0 else q - 1
        if not isinstance(a, int) or a < 0 or a > top:
            raise InvalidAddress(f"label {a!r} at position {i} is outside 0..{top} (q={q})")


def _parse_labels(text: str) -> tuple[int, ...]:
    text = text.strip()
    if text in ("", "o"):
        return ()
    try:
        return tuple(int(p) for p in text.split("/"))
    except ValueError as exc:
        raise InvalidAddress(f"cannot parse address {text!r}") from exc


@dataclass(frozen=True, order=True)
class Vertex:
    word: tuple[int, ...] = ()

    def __post_init__(self):
        if type(self.word) is not tuple:
            object.__setattr__(self, "word", tuple(self.word))

    @classmethod
    def parse(cls, text: str, q: int | None = None) -> Vertex:
        v = cls(_parse_labels(text))
        if q is not None:
            v.validate(q)
        return v

    def validate(self, q: int) -> Vertex:
        _check_word(self.word, q)
        return self

    @property
    def depth(self) -> int:
        return len(self.word)

    def __len__(self) -> int:
        return len(self.word)

    def label(self, i: int) -> int:
        return self.word[i]

    @property
    def parent(self) -> Vertex:
        if not self.word:
            raise ValueError("the root has no parent")
        return Vertex(self.word[:-1])

    def child(self, a: int) -> Vertex:
        return Vertex(self.word + (a,))

    def children(self, q: int) -> list[Vertex]:
        n = q + 1 if not self.word else q
        return [Vertex(self.word + (a,)) for a in range(n)]

    def neighbours(self, q: int) -> list[Vertex]:
        out = self.children(q)
        if self.word:
            out.insert(0, self.parent)
        return out

    def prefix(self, n: int) -> Vertex:
        return Vertex(self.word[:n])

    def is_prefix_of(self, other: Union[Vertex, End]) -> bool:
        n = len(self.word)
        if isinstance(other, Vertex):
            return other.word[:n] == self.word
        return all(other.label(i) == self.word[i] for i in range(n))

    def __str__(self) -> str:
        return "/".join(map(str, self.word)) if self.word else "o"


ROOT = Vertex(())


def _primitive(cycle: tuple[int, ...]) -> tuple[int, ...]:
    n = len(cycle)
    for d in range(1, n + 1):
        if n % d == 0 and cycle[:d] * (n // d) == cycle:
            return cycle[:d]
    return cycle


@dataclass(frozen=True, order=True)
class End:
    """The end represented by the infinite word prefix . cycle . cycle ..."""

    prefix: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        prefix = tuple(self.prefix)
        cycle = tuple(self.cycle)
        if not cycle:
            raise InvalidAddress("an end needs a nonempty cycle")
        cycle = _primitive(cycle)
        while prefix and prefix[-1] == cycle[-1]:
            cycle = (prefix[-1],) + cycle[:-1]
            prefix = prefix[:-1]
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "cycle", cycle)

    @classmethod
    def parse(cls, text: str, q: int | None = None) -> End:
        text = text.strip()
        if ":" in text:
            head, tail = text.split(":", 1)
        else:
            head, tail = "", text
        tail = tail.strip()
        if not (tail.startswith("(") and tail.endswith(")")):
            raise InvalidAddress(f"end literal {text!r} needs a parenthesised cycle")
        end = cls(_parse_labels(head), _parse_labels(tail[1:-1]))
        if q is not None:
            end.validate(q)
        return end

    def validate(self, q: int) -> End:
        _check_word(self.prefix, q)
        if any(not isinstance(a, int) or a < 0 or a > q - 1 for a in self.cycle):
            raise InvalidAddress(f"cycle labels must lie in 0..{q - 1} (q={q})")
        return self

    def label(self, i: int) -> int:
        n = len(self.prefix)
        if i < n:
            return self.prefix[i]
        return self.cycle[(i - n) % len(self.cycle)]

    def vertex(self, n: int) -> Vertex:
        """The depth-n vertex on the ray from the root to this end."""
        return Vertex(tuple(self.label(i) for i in range(n)))

    def __str__(self) -> str:
        head = "/".join(map(str, self.prefix))
        return f"{head}:({'/'.join(map(str, self.cycle))})"


Point = Union[Vertex, End]


def parse_point(text: str, q: int | None = None) -> Point:
    return End.parse(text, q) if "(" in text else Vertex.parse(text, q)


def _length(w: Point) -> float:
    return len(w.word) if isinstance(w, Vertex) else float("inf")


def confluent_depth(w: Point, z: Point) -> int:
    """|w ^ z|, the length of the longest common prefix."""
    if isinstance(w, End) and isinstance(z, End):
        lcm = len(w.cycle) * len(z.cycle) // gcd(len(w.cycle), len(z.cycle))
        bound = max(len(w.prefix), len(z.prefix)) + lcm
        for i in range(bound):
            if w.label(i) != z.label(i):
                return i
        raise EqualEnds(f"confluent of {w} with itself is not a vertex")
    if isinstance(w, End):
        w, z = z, w
    n = len(w.word)
    if isinstance(z, Vertex):
        n = min(n, len(z.word))
    for i in range(n):
        if w.word[i] != z.label(i):
            return i
    return n


def confluent(w: Point, z: Point, params: TreeParams | None = None) -> Vertex:
    c = confluent_depth(w, z)
    base = w if isinstance(w, Vertex) else z if isinstance(z, Vertex) else w
    if isinstance(base, Vertex):
        return base.prefix(c)
    return base.vertex(c)


def graph_distance(x: Vertex, y: Vertex) -> int:
    return len(x) + len(y) - 2 * confluent_depth(x, y)


def _same(w: Point, z: Point) -> bool:
    return type(w) is type(z) and w == z


def ultra_metric(w: Point, z: Point, q: int) -> Fraction:
    if _same(w, z):
        return Fraction(0)
    return Fraction(1, q ** confluent_depth(w, z))


def dist_to_boundary(x: Vertex, q: int) -> Fraction:
    return Fraction(1, q ** len(x))


def cylinder_measure(y: Vertex, q: int) -> Fraction:
    """lambda(dT_y) for the rotation-invariant probability on the ends."""
    n = len(y)
    if n == 0:
        return Fraction(1)
    return Fraction(1, (q + 1) * q ** (n - 1))


def lebesgue_weight(x: Vertex, q: int) -> Fraction:
    return Fraction(1, q ** (2 * len(x)))


def level_size(q: int, n: int) -> int:
    return 1 if n == 0 else (q + 1) * q ** (n - 1)


def level_vertices(q: int, n: int) -> Iterator[Vertex]:
    if n == 0:
        yield ROOT
        return
    for first in range(q + 1):
        for rest in itertools.product(range(q), repeat=n - 1):
            yield Vertex((first,) + rest)


def ball(q: int, radius: int) -> Iterator[Vertex]:
    """All vertices of B(o, radius) in breadth-first order."""
    for n in range(radius + 1):
        yield from level_vertices(q, n)


def vertex_index(v: Vertex, q: int) -> int:
    """Position of v within its level, matching the order of level_vertices."""
    i = 0
    for a in v.word:
        i = i * q + a
    return i


def vertex_from_index(n: int, i: int, q: int) -> Vertex:
    if n == 0:
        return ROOT
    word = []
    for _ in range(n - 1):
        word.append(i % q)
        i //= q
    word.append(i)
    return Vertex(tuple(reversed(word)))


# --------------------------------------------------------------------------
# boundary sets

class BoundarySetT:
    """A closed subset E of the space of ends, described finitely."""

    q: int

    def depth_of(self, w: Point) -> int | None:
        """Largest |w ^ xi| over xi in E; None when w itself lies in E."""
        raise NotImplementedError

    def gamma(self, j: int) -> tuple[Vertex, ...]:
        """Level-j vertices whose cylinder meets E."""
        raise NotImplementedError

    def count(self, j: int) -> int:
        return len(self.gamma(j))

    def lambda_level(self, j: int) -> Fraction:
        """lambda(E^(q^-j)), the mass of the level-j cylinders meeting E."""
        if j == 0:
            return Fraction(1) if not self.is_empty else Fraction(0)
        return self.count(j) * Fraction(1, level_size(self.q, j))

    @property
    def is_empty(self) -> bool:
        raise NotImplementedError

    @property
    def measure(self) -> Fraction:
        raise NotImplementedError

    @property
    def self_similar_level(self) -> int:
        """Level J from which every cylinder of gamma(J) carries a scaled copy."""
        raise NotImplementedError

    @property
    def ratio(self) -> Fraction:
        """m_{j+1}(y) / m_j(y) below the self-similar level."""
        raise NotImplementedError

    def require_null(self) -> None:
        if self.measure != 0:
            raise PositiveMeasure(f"lambda(E) = {self.measure} > 0")

    def contains(self, xi: End) -> bool:
        return self.depth_of(xi) is None


@dataclass(frozen=True)
class FiniteEnds(BoundarySetT):
    q: int
    ends: tuple[End, ...] = field(default=())

    def __post_init__(self):
        check_q(self.q)
        ends = tuple(sorted(set(self.ends)))
        for e in ends:
            e.validate(self.q)
        object.__setattr__(self, "ends", ends)

    @property
    def is_empty(self) -> bool:
        return not self.ends

    def depth_of(self, w: Point) -> int | None:
        if not self.ends:
            raise EmptySet("E is empty")
        best = 0
        for e in self.ends:
            if isinstance(w, End) and w == e:
                return None
            best = max(best, confluent_depth(w, e))
        return best

    def gamma(self, j: int) -> tuple[Vertex, ...]:
        return tuple(sorted({e.vertex(j) for e in self.ends}))

    @property
    def measure(self) -> Fraction:
        return Fraction(0)

    @property
    def self_similar_level(self) -> int:
        level = 1
        for a, b in itertools.combinations(self.ends, 2):
            level = max(level, confluent_depth(a, b) + 1)
        return level

    @property
    def ratio(self) -> Fraction:
        return Fraction(1, self.q)

    def __str__(self) -> str:
        return "{" + ", ".join(map(str, self.ends)) + "}"


@dataclass(frozen=True)
class CantorRule(BoundarySetT):
    """Ends through ``base`` whose later labels all lie in ``allowed``."""

    q: int
    base: Vertex
    allowed: frozenset

    def __post_init__(self):
        check_q(self.q)
        self.base.validate(self.q)
        object.__setattr__(self, "allowed", frozenset(self.allowed))

    @property
    def first_labels(self) -> tuple[int, ...]:
        top = self.q if len(self.base) == 0 else self.q - 1
        return tuple(sorted(a for a in self.allowed if 0 <= a <= top))

    @property
    def later_labels(self) -> tuple[int, ...]:
        return tuple(sorted(a for a in self.allowed if 0 <= a <= self.q - 1))

    @property
    def m(self) -> int:
        return len(self.later_labels)

    @property
    def is_empty(self) -> bool:
        return not self.first_labels or not self.later_labels

    def _allowed_at(self, i: int) -> tuple[int, ...]:
        return self.first_labels if i == len(self.base) else self.later_labels

    def depth_of(self, w: Point) -> int | None:
        if self.is_empty:
            raise EmptySet("E is empty")
        b = len(self.base)
        n = _length(w)
        limit = n if isinstance(w, Vertex) else len(w.prefix) + b + len(w.cycle) + 1
        i = 0
        while i < min(b, limit):
            if w.label(i) != self.base.word[i]:
                return i
            i += 1
        if i < b:
            return i
        while i < limit:
            if w.label(i) not in self._allowed_at(i):
                return i
            i += 1
        if isinstance(w, Vertex):
            return i
        return None

    def count(self, j: int) -> int:
        b = len(self.base)
        if self.is_empty:
            return 0
        if j <= b:
            return 1
        return len(self.first_labels) * self.m ** (j - b - 1)

    def gamma(self, j: int) -> tuple[Vertex, ...]:
        b = len(self.base)
        if self.is_empty:
            return ()
        if j <= b:
            return (self.base.prefix(j),)
        out = []
        for a in self.first_labels:
            for rest in itertools.product(self.later_labels, repeat=j - b - 1):
                out.append(Vertex(self.base.word + (a,) + rest))
        return tuple(out)

    @property
    def measure(self) -> Fraction:
        if self.is_empty or self.m < self.q:
            return Fraction(0)
        b = len(self.base)
        return self.count(b + 1) * Fraction(1, level_size(self.q, b + 1))

    @property
    def self_similar_level(self) -> int:
        return len(self.base) + 1

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.m, self.q)

    def __str__(self) -> str:
        return f"cantor({self.base};{','.join(map(str, sorted(self.allowed)))})"


def dist_to_set(w: Point, E: BoundarySetT) -> Fraction:
    """dist(w, E) in the ultrametric; exact."""
    if E.is_empty:
        raise EmptySet("E is empty")
    d = E.depth_of(w)
    if d is None:
        return Fraction(0)
    return Fraction(1, E.q**d)


def parse_boundary_set(text: str, q: int) -> BoundarySetT:
    """``ends:0:(0);1:(1)`` or ``cantor:BASE:0,1`` (BASE may be ``o``).

    A bare list of end literals separated by ``;`` or ``,`` is also accepted.
    """
    text = text.strip()
    if text.startswith("cantor:"):
        _, base, labels = text.split(":", 2)
        allowed = frozenset(int(a) for a in labels.split(",") if a.strip())
        return CantorRule(q, Vertex.parse(base, q), allowed)
    if text.startswith("ends:"):
        text = text[len("ends:"):]
    parts = [p for p in text.replace(";", " ").split() if p]
    return FiniteEnds(q, tuple(End.parse(p, q) for p in parts))
