"""Moebius action on disk points, Schottky orbits and boundary dynamics.

Logarithms of absolute values are taken base p, so Busemann values are
integers on rational data. Orbit growth, Poincare series and the
Patterson-Sullivan weights use the natural exponential ``e^{-s rho}``.
A measure built at exponent ``s`` is therefore quasi-conformal of
dimension ``s / ln p`` in base-p units.
"""
from __future__ import annotations

import cmath
import math
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

import numpy as np

from .padic import INF, Magnitude, PrimeContext, Rational, as_fraction, valuation
from .points import BerkPoint, big_metric, disk, gauss_point, join, leq

MAX_WORDS = 1_000_000


class PoleInsideDisk(ValueError):
    pass


class PoleAtBoundaryPoint(ValueError):
    pass


class NonIntegralExponent(ValueError):
    pass


class NotUpperTriangular(ValueError):
    pass


class InsufficientData(ValueError):
    pass


class EmptyCylinder(ValueError):
    pass


class EmptyMeasure(ValueError):
    pass


# --- Moebius maps -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    """``z -> (a z + b) / (c z + d)``, compared projectively."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self) -> None:
        for name in "abcd":
            object.__setattr__(self, name, as_fraction(getattr(self, name)))
        if self.det == 0:
            raise ValueError("singular matrix")

    @classmethod
    def identity(cls) -> MoebiusMap:
        return cls(1, 0, 0, 1)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Any]]) -> MoebiusMap:
        (a, b), (c, d) = rows
        return cls(*(as_fraction(str(x)) if isinstance(x, str) else as_fraction(x) for x in (a, b, c, d)))

    @property
    def det(self) -> Fraction:
        return self.a * self.d - self.b * self.c

    def normalized(self) -> tuple[Fraction, ...]:
        entries = (self.a, self.b, self.c, self.d)
        lead = next(x for x in entries if x != 0)
        return tuple(x / lead for x in entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MoebiusMap):
            return NotImplemented
        return self.normalized() == other.normalized()

    def __hash__(self) -> int:
        return hash(self.normalized())

    def __matmul__(self, o: MoebiusMap) -> MoebiusMap:
        return MoebiusMap(
            self.a * o.a + self.b * o.c,
            self.a * o.b + self.b * o.d,
            self.c * o.a + self.d * o.c,
            self.c * o.b + self.d * o.d,
        )

    def inverse(self) -> MoebiusMap:
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def __call__(self, z: Rational) -> Fraction:
        z = as_fraction(z)
        den = self.c * z + self.d
        if den == 0:
            raise PoleAtBoundaryPoint(f"{z} is the pole of {self}")
        return (self.a * z + self.b) / den

    @property
    def is_upper_triangular(self) -> bool:
        return self.c == 0

    def rows(self) -> list[list[str]]:
        return [[_fs(self.a), _fs(self.b)], [_fs(self.c), _fs(self.d)]]


def _fs(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def act_on_point(gamma: MoebiusMap, x: BerkPoint) -> BerkPoint:
    """Image of a disk point; the pole must lie outside the disk."""
    ctx = PrimeContext(x.p)
    if not x.is_hyperbolic:
        try:
            return BerkPoint(x.p, gamma(x.center), INF)
        except PoleAtBoundaryPoint:
            raise PoleInsideDisk(f"{x!r} is the pole of the map") from None
    den = gamma.c * x.center + gamma.d
    v_den = valuation(ctx, den)
    if gamma.c != 0 and not v_den < x.radius_exp + valuation(ctx, gamma.c):
        raise PoleInsideDisk(f"pole {-gamma.d / gamma.c} lies in {x!r}")
    e = x.radius_exp + valuation(ctx, gamma.det) - 2 * v_den
    return BerkPoint(x.p, gamma(x.center), e, x.irrational)


def gauss_to(ctx: PrimeContext, a: Rational, radius_exp: Rational) -> MoebiusMap:
    """``[[p^e, a], [0, 1]]``, which carries the Gauss point to ``ζ_{a, p^-e}``."""
    e = as_fraction(radius_exp)
    if e.denominator != 1:
        raise NonIntegralExponent(f"no rational has absolute value p^-{e}")
    n = int(e)
    scale = Fraction(ctx.p) ** n
    return MoebiusMap(scale, as_fraction(a), 0, 1)


def isometry_residual(gamma: MoebiusMap, x: BerkPoint, y: BerkPoint) -> Fraction:
    return abs(big_metric(act_on_point(gamma, x), act_on_point(gamma, y)) - big_metric(x, y))


def rn_derivative(ctx: PrimeContext, g: MoebiusMap) -> Magnitude:
    """``|z|`` for ``g = [[z, a], [0, 1]]`` up to scale."""
    if not g.is_upper_triangular:
        raise NotUpperTriangular("defined only for upper-triangular maps")
    return Magnitude(valuation(ctx, g.a / g.d))


BoundaryFn = Callable[[Fraction], complex]


def unitary(ctx: PrimeContext, g: MoebiusMap, s: float, f: BoundaryFn) -> BoundaryFn:
    """``(U_s(g) f)(x) = e^{is} sqrt|z| f(g x)``."""
    scale = cmath.exp(1j * s) * math.sqrt(float(rn_derivative(ctx, g).value(ctx.p)))
    return lambda x: scale * f(g(x))


def unitary_inverse(ctx: PrimeContext, g: MoebiusMap, s: float, f: BoundaryFn) -> BoundaryFn:
    scale = cmath.exp(-1j * s) / math.sqrt(float(rn_derivative(ctx, g).value(ctx.p)))
    ginv = g.inverse()
    return lambda x: scale * f(ginv(x))


def covariance_residual(
    ctx: PrimeContext,
    g: MoebiusMap,
    a: BoundaryFn,
    f: BoundaryFn,
    sample: Sequence[Rational],
    s: float = 0.0,
) -> float:
    """``max |U π(a) U* f - (a∘g) f|`` over the sample points."""
    inner = unitary_inverse(ctx, g, s, f)
    lhs = unitary(ctx, g, s, lambda x: a(x) * inner(x))
    worst = 0.0
    for x in sample:
        x = as_fraction(x)
        worst = max(worst, abs(lhs(x) - a(g(x)) * f(x)))
    return worst


def busemann(gamma: MoebiusMap, xi: Rational, p: int) -> Fraction:
    """``log_p(|det| / |c ξ + d|^2)`` with ``[[a, b], [c, d]] = γ^{-1}``."""
    ctx = PrimeContext(p)
    inv = gamma.inverse()
    den = inv.c * as_fraction(xi) + inv.d
    if den == 0:
        raise PoleAtBoundaryPoint(f"{xi} is the pole of the inverse map")
    return -valuation(ctx, inv.det) + 2 * valuation(ctx, den)


def busemann_by_diameters(gamma: MoebiusMap, xi: Rational, p: int, k: int) -> Fraction:
    """``log_p(diam(γ^{-1} x) / diam(x))`` at ``x = ζ_{ξ, p^-k}``."""
    x = disk(p, xi, k)
    y = act_on_point(gamma.inverse(), x)
    return x.radius_exp - y.radius_exp


def j_factor(gamma: MoebiusMap, xi: Rational, p: int) -> Magnitude:
    """``p^B`` as a magnitude (exponent ``-B``)."""
    return Magnitude(-busemann(gamma, xi, p))


# --- Schottky groups and orbits ----------------------------------------------

Letter = int  # +i for generator i (1-based), -i for its inverse
GroupWord = tuple[Letter, ...]


def letter_key(s: Letter) -> tuple[int, int]:
    return (abs(s), 0 if s > 0 else 1)


def word_key(w: GroupWord) -> tuple:
    return (len(w), tuple(letter_key(s) for s in w))


def word_name(w: GroupWord) -> str:
    if not w:
        return "e"
    return "".join(chr(96 + s) if s > 0 else chr(64 - s) for s in w)


def parse_group_word(text: str) -> GroupWord:
    text = text.strip()
    if text in ("", "e"):
        return ()
    return reduce_word(tuple(ord(ch) - 96 if ch.islower() else -(ord(ch) - 64) for ch in text))


def reduce_word(w: Sequence[Letter]) -> GroupWord:
    out: list[Letter] = []
    for s in w:
        if out and out[-1] == -s:
            out.pop()
        else:
            out.append(s)
    return tuple(out)


@dataclass(frozen=True)
class SchottkyGroup:
    p: int
    generators: tuple[MoebiusMap, ...]
    pingpong: tuple[tuple[BerkPoint, BerkPoint], ...] | None = None
    max_word_length: int = 12

    def __post_init__(self) -> None:
        PrimeContext(self.p)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def letters(self) -> list[Letter]:
        return sorted((s for i in range(1, self.rank + 1) for s in (i, -i)), key=letter_key)

    def letter_map(self, s: Letter) -> MoebiusMap:
        g = self.generators[abs(s) - 1]
        return g if s > 0 else g.inverse()

    def element(self, w: Sequence[Letter]) -> MoebiusMap:
        m = MoebiusMap.identity()
        for s in w:
            m = m @ self.letter_map(s)
        return m

    def word_count(self, L: int) -> int:
        r = 2 * self.rank
        return 1 + sum(r * (r - 1) ** (n - 1) for n in range(1, L + 1)) if r else 1


def check_pingpong(G: SchottkyGroup) -> bool:
    """Sample check that each generator maps the outside of its repelling disk into its attracting disk.

    Test points are the centers of all other disks and, through the
    inverse, the same centers pushed back.
    """
    if not G.pingpong:
        return True
    disks = [d for pair in G.pingpong for d in pair]
    if len(G.pingpong) != G.rank:
        raise ValueError("one (attracting, repelling) pair per generator is required")
    for i, d1 in enumerate(disks):
        for d2 in disks[i + 1 :]:
            if leq(d1, d2) or leq(d2, d1):
                return False
    for g, (att, rep) in zip(G.generators, G.pingpong):
        for d in disks:
            if d is rep:
                continue
            try:
                if not leq(BerkPoint(G.p, g(d.center), INF), att):
                    return False
            except PoleAtBoundaryPoint:
                return False
        ginv = g.inverse()
        for d in disks:
            if d is att:
                continue
            try:
                if not leq(BerkPoint(G.p, ginv(d.center), INF), rep):
                    return False
            except PoleAtBoundaryPoint:
                return False
    return True


@dataclass(frozen=True)
class OrbitPoint:
    word: GroupWord
    matrix: MoebiusMap
    point: BerkPoint
    distance: Fraction

    @property
    def name(self) -> str:
        return word_name(self.word)


IntMatrix = tuple[int, int, int, int]


def _int_matrix(m: MoebiusMap) -> IntMatrix:
    scale = math.lcm(*(x.denominator for x in (m.a, m.b, m.c, m.d)))
    return _primitive(tuple(int(x * scale) for x in (m.a, m.b, m.c, m.d)))


def _primitive(m: tuple[int, ...]) -> IntMatrix:
    g = math.gcd(*m)
    return tuple(x // g for x in m)  # type: ignore[return-value]


def _imul(x: IntMatrix, y: IntMatrix) -> IntMatrix:
    a, b, c, d = x
    e, f, g, h = y
    return _primitive((a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h))


def _ival(p: int, n: int) -> float:
    if n == 0:
        return INF
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def _gauss_image(p: int, m: IntMatrix) -> tuple[Fraction, int, int]:
    """Center, radius exponent and ρ-distance of the image of the Gauss point."""
    a, b, c, d = m
    vd = _ival(p, d)
    if c != 0 and not vd < _ival(p, c):
        raise PoleInsideDisk(f"pole {Fraction(-d, c)} lies in the unit disk")
    e = _ival(p, a * d - b * c) - 2 * vd
    center = Fraction(b, d)
    top = min(0, e, _ival(p, b) - vd if b else INF)
    return center, e, e - 2 * top


def _orbit_branch(args: tuple[SchottkyGroup, Letter | None, int]) -> list[OrbitPoint]:
    G, first, L = args
    p = G.p
    mats = {s: _int_matrix(G.letter_map(s)) for s in G.letters()}
    out: list[OrbitPoint] = []

    def visit(word: GroupWord, m: IntMatrix) -> None:
        try:
            center, e, dist = _gauss_image(p, m)
        except PoleInsideDisk as exc:
            raise PoleInsideDisk(f"word {word_name(word)}: {exc}") from None
        out.append(OrbitPoint(word, MoebiusMap(*m), BerkPoint(p, center, e), Fraction(dist)))

    if first is None:
        visit((), (1, 0, 0, 1))
        return out
    frontier = [((first,), mats[first])]
    for _ in range(L):
        nxt = []
        for word, m in frontier:
            visit(word, m)
            if len(word) < L:
                for s in G.letters():
                    if s != -word[-1]:
                        nxt.append((word + (s,), _imul(m, mats[s])))
        frontier = nxt
    return out


def orbit_enumerate(G: SchottkyGroup, L: int, threads: int = 1) -> list[OrbitPoint]:
    """Reduced words up to length ``L`` with ``ρ(ζ, γζ)``, by length then letters.

    Work is split by first letter; the result is sorted, so it does not
    depend on ``threads``.
    """
    if L < 0:
        raise ValueError("L must be nonnegative")
    if G.word_count(L) > MAX_WORDS:
        raise ValueError(f"{G.word_count(L)} words exceed the cap {MAX_WORDS}")
    jobs = [(G, None, L)] + ([(G, s, L) for s in G.letters()] if L > 0 else [])
    if threads > 1 and len(jobs) > 2:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(_orbit_branch, jobs))
    else:
        parts = [_orbit_branch(j) for j in jobs]
    return sorted((pt for part in parts for pt in part), key=lambda o: word_key(o.word))


@dataclass(frozen=True)
class CriticalExponent:
    delta: float
    radii: list[Fraction]
    counts: list[int]
    fit_radii: list[Fraction]
    rms_residual: float


def critical_exponent_estimate(G: SchottkyGroup, L: int, orbit: Sequence[OrbitPoint] | None = None) -> CriticalExponent:
    """Least-squares slope of ``ln N(R)`` over the upper half of the observed radii."""
    orbit = orbit if orbit is not None else orbit_enumerate(G, L)
    dists = sorted(o.distance for o in orbit)
    radii = sorted(set(dists))
    if len(radii) < 4:
        raise InsufficientData(f"only {len(radii)} distinct radii")
    counts = [sum(1 for d in dists if d <= r) for r in radii]
    cut = radii[0] + (radii[-1] - radii[0]) / 2
    pairs = [(r, n) for r, n in zip(radii, counts) if r >= cut]
    if len(pairs) < 2:
        raise InsufficientData("fewer than two radii in the upper half")
    xs = np.array([float(r) for r, _ in pairs])
    ys = np.log(np.array([n for _, n in pairs], dtype=float))
    slope, intercept = np.polyfit(xs, ys, 1)
    rms = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
    return CriticalExponent(float(slope), radii, counts, [r for r, _ in pairs], rms)


@dataclass(frozen=True)
class PoincareSum:
    partial: float
    tail_bound: float
    shells: list[float]


def poincare_series(
    G: SchottkyGroup, s: float, L: int, mode: str = "rho", orbit: Sequence[OrbitPoint] | None = None
) -> PoincareSum:
    """``Σ_{γ ≠ e, |γ| <= L} e^{-s x_γ}`` with ``x_γ = ρ(ζ, γζ)`` or, in ``"diam"`` mode, ``diam(γζ)``.

    The tail bound extends the ratio of the last two shells geometrically
    (``inf`` when that ratio is at least 1).
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    if mode not in ("rho", "diam"):
        raise ValueError(f"unknown mode {mode!r}")
    orbit = orbit if orbit is not None else orbit_enumerate(G, L)
    shells = [0.0] * (L + 1)
    for o in orbit:
        if not o.word or len(o.word) > L:
            continue
        x = float(o.distance) if mode == "rho" else float(Magnitude(o.point.radius_exp).value(G.p))
        shells[len(o.word)] += math.exp(-s * x)
    shells = shells[1:]
    partial = math.fsum(shells)
    tail = 0.0
    if len(shells) >= 2 and shells[-2] > 0:
        ratio = shells[-1] / shells[-2]
        tail = shells[-1] * ratio / (1 - ratio) if ratio < 1 else math.inf
    return PoincareSum(partial, tail, shells)


# --- boundary cylinders and the orbital measure --------------------------------


def path_point(y: BerkPoint, t: Fraction) -> BerkPoint:
    """The point at ρ-distance ``t`` from the Gauss point on the path to ``y``."""
    p = y.p
    top = join(gauss_point(p), y)
    up = -top.radius_exp
    if t <= up:
        return BerkPoint(p, 0, -t)
    e = top.radius_exp + (t - up)
    if e > y.radius_exp:
        raise ValueError("path is shorter than the requested depth")
    return BerkPoint(p, y.center, e)


def boundary_label(y: BerkPoint, depth: int) -> BerkPoint:
    return path_point(y, Fraction(depth))


def representative(label: BerkPoint) -> Fraction:
    """Canonical rational center of a cylinder label."""
    return label.key()[1]


def label_str(label: BerkPoint) -> str:
    c = representative(label)
    return f"{_fs(c)}|{_fs(label.radius_exp)}"


def _label_sort(label: BerkPoint) -> tuple:
    return (label.radius_exp, representative(label))


@dataclass(frozen=True)
class SamplePoint:
    word: GroupWord
    matrix: MoebiusMap
    xi: Fraction
    label: BerkPoint
    weight: float


@dataclass(frozen=True)
class BoundarySample:
    p: int
    depth: int
    s: float
    points: tuple[SamplePoint, ...]

    def cylinders(self) -> dict[BerkPoint, float]:
        acc: dict[BerkPoint, list[float]] = {}
        for pt in self.points:
            acc.setdefault(pt.label, []).append(pt.weight)
        return {k: math.fsum(acc[k]) for k in sorted(acc, key=_label_sort)}

    def mass(self, label: BerkPoint) -> float:
        return math.fsum(pt.weight for pt in self.points if pt.label == label)


def ps_measure_estimate(
    G: SchottkyGroup, s: float, L: int, depth: int, orbit: Sequence[OrbitPoint] | None = None
) -> BoundarySample:
    """Orbital-counting measure: weight ``e^{-s ρ(ζ, γζ)}`` at the depth-``depth`` cylinder of ``γζ``.

    Orbit points closer than ``depth`` to the Gauss point name no cylinder
    and are left out; the remaining weights are normalized to total 1.
    """
    orbit = orbit if orbit is not None else orbit_enumerate(G, L)
    raw = []
    for o in orbit:
        if o.distance < depth:
            continue
        raw.append((o, math.exp(-s * float(o.distance))))
    total = math.fsum(w for _, w in raw)
    if total == 0:
        raise EmptyMeasure("no orbit point reaches the requested depth")
    points = tuple(
        SamplePoint(o.word, o.matrix, o.point.center, _label_from_image(G.p, o.point.center, int(o.point.radius_exp), int(o.distance), depth), w / total)
        for o, w in raw
    )
    return BoundarySample(G.p, depth, s, points)


def _label_from_image(p: int, center: Fraction, e: int, dist: int, depth: int) -> BerkPoint:
    top = (e - dist) // 2
    up = -top
    if depth <= up:
        return BerkPoint(p, 0, -depth)
    return BerkPoint(p, center, top + depth - up)


def translated_masses(sample: BoundarySample, gamma: MoebiusMap) -> dict[BerkPoint, float]:
    """``Z -> μ̂(γ^{-1} Z)``: weight of sample points whose γ-image lands in ``Z``."""
    g = _int_matrix(gamma)
    acc: dict[BerkPoint, list[float]] = {}
    for pt in sample.points:
        center, e, dist = _gauss_image(sample.p, _imul(g, _int_matrix(pt.matrix)))
        if dist >= sample.depth:
            acc.setdefault(_label_from_image(sample.p, center, e, dist, sample.depth), []).append(pt.weight)
    return {k: math.fsum(v) for k, v in acc.items()}


def quasiconformality_report(
    G: SchottkyGroup, sample: BoundarySample, delta: float, gamma: MoebiusMap
) -> dict[str, Any]:
    """Compare ``ln(μ̂(γ^{-1}Z)/μ̂(Z))`` with ``δ̂ · log_p j_γ(ξ_Z)`` per cylinder."""
    rows = []
    moved_all = translated_masses(sample, gamma)
    for label, mass in sample.cylinders().items():
        if mass <= 0:
            raise EmptyCylinder(label_str(label))
        moved = moved_all.get(label, 0.0)
        if moved <= 0:
            raise EmptyCylinder(f"{label_str(label)} has no mass after translation")
        xi = representative(label)
        b = busemann(gamma, xi, G.p)
        log_ratio = math.log(moved / mass)
        target = delta * float(b)
        dev = abs(log_ratio - target) / abs(target) if target != 0 else abs(log_ratio)
        rows.append({
            "cylinder": label_str(label),
            "mass": mass,
            "translated_mass": moved,
            "busemann": b,
            "log_ratio": log_ratio,
            "target": target,
            "deviation": dev,
        })
    return {"rows": rows, "max_deviation": max((r["deviation"] for r in rows), default=0.0)}


# --- crossed product ----------------------------------------------------------


@dataclass(frozen=True)
class CylinderFunction:
    """Simple function on depth-``depth`` boundary cylinders."""

    p: int
    depth: int
    values: Mapping[BerkPoint, complex]

    def __call__(self, xi: Rational) -> complex:
        label = boundary_label(BerkPoint(self.p, as_fraction(xi), INF), self.depth)
        return self.values.get(label, 0)


Coefficient = Union[CylinderFunction, BoundaryFn]


def constant(c: complex) -> BoundaryFn:
    return lambda xi: c


@dataclass(frozen=True)
class CrossedElement:
    """Finite sum ``Σ f_γ U_γ`` over reduced words ``γ``."""

    group: SchottkyGroup
    terms: Mapping[GroupWord, Coefficient] = field(default_factory=dict)

    def coefficient(self, w: GroupWord) -> Coefficient:
        return self.terms.get(w, constant(0))


def multiply(x: CrossedElement, y: CrossedElement) -> CrossedElement:
    """``(xy)_γ(ξ) = Σ_{γ₁γ₂ = γ} x_{γ₁}(ξ) y_{γ₂}(γ₁^{-1} ξ)``."""
    G = x.group
    grouped: dict[GroupWord, list[tuple[Coefficient, Coefficient, MoebiusMap]]] = {}
    for w1, f1 in x.terms.items():
        inv = G.element(w1).inverse()
        for w2, f2 in y.terms.items():
            grouped.setdefault(reduce_word(w1 + w2), []).append((f1, f2, inv))

    def combine(parts):
        return lambda xi: sum(f1(xi) * f2(inv(xi)) for f1, f2, inv in parts)

    return CrossedElement(G, {w: combine(parts) for w, parts in sorted(grouped.items(), key=lambda kv: word_key(kv[0]))})


def evolve(a: CrossedElement, z: complex) -> CrossedElement:
    """``α_z``: multiply ``f_γ`` by ``p^{i z B(γ, ξ)}``; real ``z`` is time, ``z = iβ`` the KMS twist.

    Cylinder functions take the phase at each cylinder representative, so
    they stay simple functions; other coefficients are multiplied pointwise.
    """
    G = a.group
    logp = math.log(G.p)
    terms: dict[GroupWord, Coefficient] = {}
    for w, f in a.terms.items():
        g = G.element(w)
        if isinstance(f, CylinderFunction):
            vals = {
                lab: v * cmath.exp(1j * z * float(busemann(g, representative(lab), G.p)) * logp)
                for lab, v in f.values.items()
            }
            terms[w] = CylinderFunction(f.p, f.depth, vals)
        else:
            terms[w] = (lambda f, g: lambda xi: f(xi) * cmath.exp(1j * z * float(busemann(g, xi, G.p)) * logp))(f, g)
    return CrossedElement(G, terms)


def time_evolve(a: CrossedElement, t: float) -> CrossedElement:
    return evolve(a, complex(t))


def phi(x: CrossedElement, sample: BoundarySample) -> complex:
    """``Σ_Z x_e(ξ_Z) μ̂(Z)`` over the sampled cylinders."""
    if not sample.points:
        raise EmptyMeasure("empty boundary sample")
    f = x.coefficient(())
    return complex(sum(mass * f(representative(lab)) for lab, mass in sample.cylinders().items()))


def kms_temperature(delta: float, p: int) -> float:
    """Critical exponent rewritten for the base-p phases of ``α``: ``δ̂ / ln p``."""
    return delta / math.log(p)


def kms_pair(G: SchottkyGroup, depth: int = 2) -> tuple[CrossedElement, CrossedElement]:
    """``a = χ_Z U_g`` and ``b = U_{g^{-1}}`` for the first generator ``g`` and its attracting cylinder ``Z``."""
    if not G.pingpong:
        raise ValueError("the pair needs ping-pong disks to locate the attracting cylinder")
    att = G.pingpong[0][0]
    label = boundary_label(BerkPoint(G.p, att.center, INF), depth)
    a = CrossedElement(G, {(1,): CylinderFunction(G.p, depth, {label: 1})})
    b = CrossedElement(G, {(-1,): constant(1)})
    return a, b


def kms_residual(
    a: CrossedElement, b: CrossedElement, beta: float, sample: BoundarySample, eps: float = 1e-300
) -> float:
    """``|φ(ab) - φ(b α_{iβ}(a))| / max(|φ(ab)|, eps)``."""
    lhs = phi(multiply(a, b), sample)
    rhs = phi(multiply(b, evolve(a, 1j * beta)), sample)
    return abs(lhs - rhs) / max(abs(lhs), eps)


HamiltonianBasis = Sequence[tuple[BerkPoint, GroupWord]]


def hamiltonian_basis(a: CrossedElement) -> list[tuple[BerkPoint, GroupWord]]:
    out = []
    for w in sorted(a.terms, key=word_key):
        f = a.terms[w]
        if not isinstance(f, CylinderFunction):
            raise TypeError("Hamiltonian coordinates need cylinder-function coefficients")
        out += [(lab, w) for lab in sorted(f.values, key=_label_sort)]
    return out


def hamiltonian_apply(G: SchottkyGroup, basis: HamiltonianBasis, v: Sequence[complex]) -> np.ndarray:
    """Diagonal multiplication by ``B(γ, ξ_Z)`` on ``(cylinder, word)`` slots."""
    eig = np.array([float(busemann(G.element(w), representative(lab), G.p)) for lab, w in basis])
    return eig * np.asarray(v, dtype=complex)


def to_vector(a: CrossedElement, basis: HamiltonianBasis) -> np.ndarray:
    return np.array([a.terms[w].values.get(lab, 0) for lab, w in basis], dtype=complex)


def hamiltonian_evolution_residual(a: CrossedElement, t: float) -> float:
    """``max |p^{itH} v(a) - v(α_t(a))|`` in the cylinder-word coordinates."""
    G = a.group
    basis = hamiltonian_basis(a)
    v = to_vector(a, basis)
    h = hamiltonian_apply(G, basis, np.ones(len(basis)))
    via_h = np.exp(1j * t * math.log(G.p) * h) * v
    direct = to_vector(time_evolve(a, t), basis)
    return float(np.max(np.abs(via_h - direct), initial=0.0))


# --- examples and config -------------------------------------------------------


def rank_one_example(p: int) -> SchottkyGroup:
    return SchottkyGroup(p, (MoebiusMap(p, 0, 0, 1),))


def _conjugated_scaling(p: int, attract: int, repel: int) -> MoebiusMap:
    """Conjugate of ``z -> p z`` with fixed points ``attract/p`` and ``repel/p``."""
    h = MoebiusMap(Fraction(repel, p), Fraction(attract, p), 1, 1)
    return h @ MoebiusMap(p, 0, 0, 1) @ h.inverse()


def symmetric_rank_two_example(p: int = 5) -> SchottkyGroup:
    """Two translation-length-1 generators with axes through ``ζ_{0,p}``.

    Generator ``a`` attracts toward ``1/p`` and repels from ``2/p``;
    ``b`` uses ``3/p`` and ``4/p``. Needs ``p >= 5`` so these four
    directions, the Gauss direction and infinity are distinct.
    """
    if p < 5:
        raise ValueError("the symmetric example needs p >= 5")
    ga = _conjugated_scaling(p, 1, 2)
    gb = _conjugated_scaling(p, 3, 4)
    pp = (
        (disk(p, Fraction(1, p), 0), disk(p, Fraction(2, p), 0)),
        (disk(p, Fraction(3, p), 0), disk(p, Fraction(4, p), 0)),
    )
    return SchottkyGroup(p, (ga, gb), pp)


def group_from_config(data: Mapping[str, Any]) -> SchottkyGroup:
    p = int(data["p"])
    gens = tuple(MoebiusMap.from_rows(g) for g in data["generators"])
    pp = data.get("pingpong")
    pairs = None
    if pp:
        pairs = tuple(
            tuple(BerkPoint(p, as_fraction(str(d["center"])), as_fraction(str(d["radius_exp"]))) for d in pair)
            for pair in pp
        )
    return SchottkyGroup(p, gens, pairs)


def group_to_config(G: SchottkyGroup) -> dict[str, Any]:
    out: dict[str, Any] = {"p": G.p, "generators": [g.rows() for g in G.generators]}
    if G.pingpong:
        out["pingpong"] = [[d.to_dict() for d in pair] for pair in G.pingpong]
    return out
