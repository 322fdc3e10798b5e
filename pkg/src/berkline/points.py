"""Disk points of the Berkovich line and their tree geometry."""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

from .padic import (
    INF,
    Exponent,
    Magnitude,
    PrimeContext,
    Rational,
    as_fraction,
    canonical_center,
    normalize_exponent,
    valuation,
)

SMALL_METRIC_TOL = 1e-12


class TypeIPoint(ValueError):
    """Raised when a hyperbolic-only operation receives a classical point."""


@dataclass(frozen=True, slots=True, eq=False)
class BerkPoint:
    """The point attached to the closed disk ``D(center, p**(-radius_exp))``.

    ``radius_exp = inf`` is the classical (type I) point at ``center``.
    ``irrational`` tags the exponent as a stand-in for an irrational radius.
    Equality compares disks, not the stored center.
    """

    p: int
    center: Fraction
    radius_exp: Exponent
    irrational: bool = False

    def __post_init__(self) -> None:
        PrimeContext(self.p)
        object.__setattr__(self, "center", as_fraction(self.center))
        object.__setattr__(self, "radius_exp", normalize_exponent(self.radius_exp))
        if self.irrational and self.radius_exp == INF:
            raise ValueError("a type I point cannot carry an irrational radius")

    @property
    def kind(self) -> str:
        if self.radius_exp == INF:
            return "I"
        return "III" if self.irrational else "II"

    @property
    def is_hyperbolic(self) -> bool:
        return self.radius_exp != INF

    def key(self) -> tuple:
        return (
            self.p,
            canonical_center(self.p, self.center, self.radius_exp),
            self.radius_exp,
            self.irrational,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BerkPoint):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        tag = "~" if self.irrational else ""
        return f"zeta({self.center}, p^-{tag}{self.radius_exp}; p={self.p})"

    def to_dict(self) -> dict[str, Any]:
        return {
            "center": fraction_str(self.center),
            "radius_exp": "inf" if self.radius_exp == INF else fraction_str(self.radius_exp),
            "irrational": self.irrational,
        }

    @classmethod
    def from_dict(cls, p: int, data: dict[str, Any]) -> BerkPoint:
        return cls(
            p,
            as_fraction(str(data["center"])),
            normalize_exponent(str(data["radius_exp"])),
            bool(data.get("irrational", False)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def fraction_str(x: Fraction) -> str:
    x = as_fraction(x)
    return f"{x.numerator}/{x.denominator}"


def gauss_point(p: int) -> BerkPoint:
    return BerkPoint(p, Fraction(0), Fraction(0))


def disk(p: int, center: Rational | str, radius_exp: Rational | str) -> BerkPoint:
    """Shorthand for the type II point of ``D(center, p**(-radius_exp))``."""
    return BerkPoint(p, as_fraction(center), normalize_exponent(radius_exp))


def _same_prime(x: BerkPoint, y: BerkPoint) -> int:
    if x.p != y.p:
        raise ValueError(f"points over different primes: {x.p} and {y.p}")
    return x.p


def _center_gap(x: BerkPoint, y: BerkPoint) -> Exponent:
    return valuation(PrimeContext(_same_prime(x, y)), x.center - y.center)


def leq(x: BerkPoint, y: BerkPoint) -> bool:
    """Disk containment ``D(x) ⊆ D(y)``."""
    return _center_gap(x, y) >= y.radius_exp and x.radius_exp >= y.radius_exp


def join(x: BerkPoint, y: BerkPoint) -> BerkPoint:
    """Smallest disk containing both disks."""
    gap = _center_gap(x, y)
    e = min(x.radius_exp, y.radius_exp, gap)
    # The result inherits an irrational tag only if no rational candidate ties.
    rational_hit = e == gap or any(
        e == z.radius_exp and not z.irrational for z in (x, y)
    )
    return BerkPoint(x.p, x.center, e, irrational=not rational_hit)


def diam(x: BerkPoint) -> Magnitude:
    return Magnitude(x.radius_exp)


def _exact_exponents(*es: Exponent) -> bool:
    return all(e == INF or e.denominator == 1 for e in es)


def small_metric(x: BerkPoint, y: BerkPoint) -> Fraction | float:
    """``2 diam(x ∨ y) - diam(x) - diam(y)``.

    Exact when every exponent involved is an integer (or infinite); otherwise
    a float to be compared with ``SMALL_METRIC_TOL``.
    """
    j = join(x, y)
    p = x.p
    if _exact_exponents(x.radius_exp, y.radius_exp, j.radius_exp):
        return 2 * diam(j).value(p) - diam(x).value(p) - diam(y).value(p)
    return 2 * float(diam(j).value(p)) - float(diam(x).value(p)) - float(diam(y).value(p))


def _require_hyperbolic(*points: BerkPoint) -> None:
    for pt in points:
        if not pt.is_hyperbolic:
            raise TypeIPoint(f"{pt!r} is a classical point; the path metric is infinite")


def big_metric(x: BerkPoint, y: BerkPoint) -> Fraction:
    """Path metric with log base ``p``: ``e_x + e_y - 2 e_{x∨y}``."""
    _require_hyperbolic(x, y)
    j = join(x, y)
    return x.radius_exp + y.radius_exp - 2 * j.radius_exp


def gromov_product(x: BerkPoint, y: BerkPoint, base: BerkPoint) -> Fraction:
    _require_hyperbolic(x, y, base)
    return (big_metric(x, base) + big_metric(y, base) - big_metric(x, y)) / 2


def median(x: BerkPoint, y: BerkPoint, z: BerkPoint) -> BerkPoint:
    """Center of the tripod on ``x, y, z``: the lowest of the pairwise joins."""
    joins = [join(x, y), join(y, z), join(x, z)]
    return max(joins, key=lambda j: j.radius_exp)


def kappa_gauss(x: BerkPoint) -> Fraction:
    """Potential kernel against the Gauss point on the diagonal, ``-log_p diam(x)``."""
    _require_hyperbolic(x)
    return x.radius_exp
