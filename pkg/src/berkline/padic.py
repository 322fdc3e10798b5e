"""Exact p-adic valuations and absolute values on the rationals.

Every absolute value is kept as an exponent ``e`` standing for ``p**(-e)``,
so ultrametric comparisons never touch floating point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from typing import Union

INF = math.inf

Rational = Union[int, Fraction]
Exponent = Union[Fraction, float]  # float only ever holds +inf


def is_prime(n: int) -> bool:
    """Trial division primality test."""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


@dataclass(frozen=True, slots=True)
class PrimeContext:
    """The residue characteristic ``p`` shared by a computation."""

    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or isinstance(self.p, bool):
            raise TypeError(f"p must be an int, got {type(self.p).__name__}")
        if not is_prime(self.p):
            raise ValueError(f"{self.p} is not prime")


def as_fraction(x: Rational | str) -> Fraction:
    """Coerce ints, Fractions and ``"num/den"`` strings to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


def _multiplicity(n: int, p: int) -> int:
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def valuation(ctx: PrimeContext, x: Rational) -> Exponent:
    """p-adic valuation of a rational; ``inf`` for zero."""
    x = as_fraction(x)
    if x == 0:
        return INF
    p = ctx.p
    return Fraction(_multiplicity(abs(x.numerator), p) - _multiplicity(x.denominator, p))


def normalize_exponent(e: Rational | float | str) -> Exponent:
    """Coerce to an extended rational exponent (``inf`` or Fraction)."""
    if isinstance(e, float):
        if e == INF:
            return INF
        raise TypeError("finite exponents must be exact rationals")
    if isinstance(e, str) and e.strip().lower() in ("inf", "+inf", "infinity"):
        return INF
    return as_fraction(e)


@total_ordering
@dataclass(frozen=True, slots=True)
class Magnitude:
    """The real number ``p**(-exponent)``; exponent ``inf`` means zero.

    Ordering follows the real value, so a larger exponent is a smaller
    magnitude.
    """

    exponent: Exponent

    def __post_init__(self) -> None:
        object.__setattr__(self, "exponent", normalize_exponent(self.exponent))

    @property
    def is_zero(self) -> bool:
        return self.exponent == INF

    def __mul__(self, other: Magnitude) -> Magnitude:
        if not isinstance(other, Magnitude):
            return NotImplemented
        return Magnitude(self.exponent + other.exponent)

    def __truediv__(self, other: Magnitude) -> Magnitude:
        if not isinstance(other, Magnitude):
            return NotImplemented
        if other.is_zero:
            raise ZeroDivisionError("division by the zero magnitude")
        return Magnitude(self.exponent - other.exponent)

    def __pow__(self, k: int) -> Magnitude:
        if self.is_zero:
            if k <= 0:
                raise ZeroDivisionError("zero magnitude to a non-positive power")
            return self
        return Magnitude(self.exponent * k)

    def __lt__(self, other: Magnitude) -> bool:
        if not isinstance(other, Magnitude):
            return NotImplemented
        return self.exponent > other.exponent

    def value(self, p: int) -> Fraction | float:
        """Exact Fraction when the exponent is an integer, else a float."""
        e = self.exponent
        if e == INF:
            return Fraction(0)
        if e.denominator == 1:
            n = int(e)
            return Fraction(1, p**n) if n >= 0 else Fraction(p ** (-n))
        return float(p) ** (-float(e))


def abs_p(ctx: PrimeContext, x: Rational) -> Magnitude:
    """The p-adic absolute value ``|x|_p`` as an exponent-form Magnitude."""
    return Magnitude(valuation(ctx, x))


def ceil_exponent(e: Fraction) -> int:
    """Smallest integer ``n`` with ``n >= e``."""
    return -((-e.numerator) // e.denominator)


def canonical_center(p: int, a: Fraction, e: Exponent) -> Fraction:
    """A canonical representative of the disk ``|z - a| <= p**(-e)``.

    Two rationals give the same disk iff their canonical centers agree.
    """
    if e == INF:
        return a
    level = ceil_exponent(e)
    if a == 0:
        return Fraction(0)
    va = _val(p, a)
    if va >= level:
        return Fraction(0)
    shift = max(0, -va)
    scaled = a * p**shift
    modulus = p ** (level + shift)
    residue = scaled.numerator * pow(scaled.denominator, -1, modulus) % modulus
    return Fraction(residue, p**shift)


def _val(p: int, a: Fraction) -> int:
    return _multiplicity(abs(a.numerator), p) - _multiplicity(a.denominator, p)
