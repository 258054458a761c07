"""Small helpers for mixing exact rationals with floats."""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[Fraction, float]


def as_fraction(x) -> Fraction:
    """Parse ints, Fractions and "num/den" strings. Floats are rejected."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, Rational):
        return Fraction(x.numerator, x.denominator)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def _iroot(n: int, k: int) -> int | None:
    """Exact integer k-th root of n >= 0, or None."""
    if n < 0:
        return None
    if n < 2:
        return n
    try:
        guess = int(round(n ** (1.0 / k)))
    except OverflowError:
        return None
    for r in (guess - 1, guess, guess + 1):
        if r >= 0 and r**k == n:
            return r
    return None


def exact_pow(base, exponent) -> Number:
    """base**exponent, exact when the result is rational, float otherwise.

    ``base`` must be a nonnegative rational when ``exponent`` is not integral.
    """
    base = as_fraction(base) if not isinstance(base, float) else base
    if isinstance(base, float):
        return base ** float(exponent)
    exponent = Fraction(exponent) if not isinstance(exponent, float) else exponent
    if isinstance(exponent, float):
        return float(base) ** exponent
    if exponent.denominator == 1:
        return base ** exponent.numerator
    if base < 0:
        raise ValueError("fractional power of a negative base")
    k = exponent.denominator
    num = _iroot(base.numerator, k)
    den = _iroot(base.denominator, k)
    if num is not None and den is not None:
        return Fraction(num, den) ** exponent.numerator
    return float(base) ** float(exponent)


def qpow_cmp(r: Fraction, q: int, s: Fraction) -> int:
    """Sign of r * q**s - 1, decided exactly for r > 0 and rational s."""
    r = as_fraction(r)
    s = as_fraction(s)
    if r <= 0:
        raise ValueError("r must be positive")
    den = s.denominator
    num = s.numerator
    # (r q^s)^den = r^den q^num ; compare with 1
    lhs_num = r.numerator**den
    lhs_den = r.denominator**den
    if num >= 0:
        lhs_num *= q**num
    else:
        lhs_den *= q ** (-num)
    return (lhs_num > lhs_den) - (lhs_num < lhs_den)


def to_float(x) -> float:
    return float(x)


def fraction_str(x) -> str:
    x = as_fraction(x)
    return f"{x.numerator}/{x.denominator}"
