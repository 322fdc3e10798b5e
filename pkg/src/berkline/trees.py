"""Finite graphs of discs and their even spectral triples.

A tree is spanned by a finite set of disks inside the closed unit disk
together with the Gauss point and all pairwise joins. Each ordered pair of
adjacent vertices ``(v, w)`` carries a two-dimensional fibre with slots
``+`` and ``-``; the Dirac operator swaps them with weight ``1/length`` and
the grading is ``+1`` on ``+`` slots and ``-1`` on ``-`` slots.
"""
from __future__ import annotations

from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

import numpy as np

from .padic import INF, PrimeContext, as_fraction, normalize_exponent
from .points import BerkPoint, big_metric, gauss_point, join, leq

Scalar = Union[int, Fraction, float, complex]
VertexFunction = Union[Mapping[BerkPoint, Scalar], Callable[[BerkPoint], Scalar]]

DENSE_SLOT_LIMIT = 2000
SPECTRUM_TOL = 1e-9


class DiskOutsideUnit(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class NotLeafExtension(ValueError):
    pass


class RealLambda(ValueError):
    pass


class SpectrumTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    parent: int
    child: int
    length: Fraction


@dataclass(frozen=True)
class FiniteTree:
    p: int
    vertices: tuple[BerkPoint, ...]
    edges: tuple[Edge, ...]
    index: Mapping[BerkPoint, int] = field(repr=False, compare=False)

    @property
    def root(self) -> BerkPoint:
        return self.vertices[0]

    def neighbors(self, i: int) -> list[tuple[int, Fraction]]:
        out = []
        for e in self.edges:
            if e.parent == i:
                out.append((e.child, e.length))
            elif e.child == i:
                out.append((e.parent, e.length))
        return sorted(out)

    def edge_length(self, i: int, j: int) -> Fraction:
        for e in self.edges:
            if {e.parent, e.child} == {i, j}:
                return e.length
        raise KeyError(f"no edge between vertices {i} and {j}")

    def leaves(self) -> list[int]:
        parents = {e.parent for e in self.edges}
        return [i for i in range(1, len(self.vertices)) if i not in parents]

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "vertices": [v.to_dict() for v in self.vertices],
            "edges": [
                {"parent": e.parent, "child": e.child, "length": _frac_str(e.length)}
                for e in self.edges
            ],
        }


def _frac_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _from_vertex_set(p: int, points: Iterable[BerkPoint]) -> FiniteTree:
    uniq = {v: None for v in points}
    ordered = sorted(uniq, key=lambda v: (v.radius_exp, v.key()[1]))
    index = {v: i for i, v in enumerate(ordered)}
    edges = []
    for i, v in enumerate(ordered[1:], start=1):
        above = [w for w in ordered[:i] if w != v and leq(v, w)]
        parent = max(above, key=lambda w: w.radius_exp)
        edges.append(Edge(index[parent], i, big_metric(v, parent)))
    return FiniteTree(p, tuple(ordered), tuple(edges), index)


def build_graph_of_discs(
    ctx: PrimeContext, disks: Sequence[tuple[Any, Any]]
) -> FiniteTree:
    """Span the tree on ``disks`` (pairs ``(center, radius_exp)``) and the Gauss point."""
    if not disks:
        raise EmptyInput("at least one disk is required")
    p = ctx.p
    gauss = gauss_point(p)
    points = []
    for center, rexp in disks:
        a = as_fraction(center)
        e = normalize_exponent(rexp)
        if e == INF:
            raise DiskOutsideUnit(f"disk at {a} has radius 0")
        pt = BerkPoint(p, a, e)
        if not leq(pt, gauss):
            raise DiskOutsideUnit(f"D({a}, p^-{e}) is not inside the closed unit disk")
        if pt == gauss:
            raise DiskOutsideUnit("the unit disk itself cannot be one of the disks")
        points.append(pt)
    vertices = [gauss, *points]
    for i, x in enumerate(points):
        for y in points[i + 1 :]:
            vertices.append(join(x, y))
    return _from_vertex_set(p, vertices)


def retract(tree: FiniteTree, x: BerkPoint) -> BerkPoint:
    """First point of the tree met on the path from ``x`` toward it."""
    if not leq(x, tree.root):
        return tree.root
    return max((join(x, v) for v in tree.vertices), key=lambda j: j.radius_exp)


# --- exact sparse matrices -------------------------------------------------


class ExactMatrix:
    """Dictionary-of-keys matrix over exact scalars."""

    __slots__ = ("shape", "data")

    def __init__(self, shape: tuple[int, int], data: Mapping[tuple[int, int], Any] | None = None):
        self.shape = shape
        self.data = {k: v for k, v in (data or {}).items() if v != 0}

    @classmethod
    def identity(cls, n: int) -> ExactMatrix:
        return cls((n, n), {(i, i): 1 for i in range(n)})

    def __matmul__(self, other: ExactMatrix) -> ExactMatrix:
        if self.shape[1] != other.shape[0]:
            raise DimensionMismatch(f"{self.shape} @ {other.shape}")
        rows: dict[int, list[tuple[int, Any]]] = {}
        for (i, j), v in other.data.items():
            rows.setdefault(i, []).append((j, v))
        out: dict[tuple[int, int], Any] = {}
        for (i, k), a in self.data.items():
            for j, b in rows.get(k, ()):
                out[(i, j)] = out.get((i, j), 0) + a * b
        return ExactMatrix((self.shape[0], other.shape[1]), out)

    def _combine(self, other: ExactMatrix, sign: int) -> ExactMatrix:
        if self.shape != other.shape:
            raise DimensionMismatch(f"{self.shape} vs {other.shape}")
        out = dict(self.data)
        for k, v in other.data.items():
            out[k] = out.get(k, 0) + sign * v
        return ExactMatrix(self.shape, out)

    def __add__(self, other: ExactMatrix) -> ExactMatrix:
        return self._combine(other, 1)

    def __sub__(self, other: ExactMatrix) -> ExactMatrix:
        return self._combine(other, -1)

    def __neg__(self) -> ExactMatrix:
        return ExactMatrix(self.shape, {k: -v for k, v in self.data.items()})

    @property
    def T(self) -> ExactMatrix:
        return ExactMatrix((self.shape[1], self.shape[0]), {(j, i): v for (i, j), v in self.data.items()})

    def conj_T(self) -> ExactMatrix:
        return ExactMatrix(
            (self.shape[1], self.shape[0]),
            {(j, i): (v.conjugate() if isinstance(v, complex) else v) for (i, j), v in self.data.items()},
        )

    def max_abs(self) -> Any:
        return max((abs(v) for v in self.data.values()), default=Fraction(0))

    def apply(self, vec: Sequence[Any]) -> list[Any]:
        if len(vec) != self.shape[1]:
            raise DimensionMismatch(f"vector of length {len(vec)} for {self.shape}")
        out: list[Any] = [0] * self.shape[0]
        for (i, j), v in self.data.items():
            out[i] += v * vec[j]
        return out

    def to_dense(self, dtype: Any = float) -> np.ndarray:
        arr = np.zeros(self.shape, dtype=dtype)
        for (i, j), v in self.data.items():
            arr[i, j] = dtype(v) if dtype is not object else v
        return arr


# --- spectral triple -------------------------------------------------------


@dataclass(frozen=True)
class Slot:
    vertex: int
    neighbor: int
    spin: int  # +1 or -1
    copy: int = 0


@dataclass(frozen=True)
class SpectralTriple:
    tree: FiniteTree
    basis: tuple[Slot, ...]
    dirac: ExactMatrix
    grading: ExactMatrix
    multiplicity: int = 1

    @property
    def dimension(self) -> int:
        return len(self.basis)


def assemble_triple(tree: FiniteTree, multiplicity: int = 1) -> SpectralTriple:
    """Basis, Dirac operator and grading of the tree.

    ``multiplicity`` inflates every fibre by that many identical copies.
    """
    if multiplicity < 1:
        raise ValueError("multiplicity must be positive")
    basis: list[Slot] = []
    dirac: dict[tuple[int, int], Fraction] = {}
    grading: dict[tuple[int, int], int] = {}
    for v in range(len(tree.vertices)):
        for w, length in tree.neighbors(v):
            for k in range(multiplicity):
                plus = len(basis)
                basis.append(Slot(v, w, +1, k))
                basis.append(Slot(v, w, -1, k))
                minus = plus + 1
                dirac[(plus, minus)] = dirac[(minus, plus)] = 1 / length
                grading[(plus, plus)] = 1
                grading[(minus, minus)] = -1
    n = len(basis)
    return SpectralTriple(tree, tuple(basis), ExactMatrix((n, n), dirac), ExactMatrix((n, n), grading), multiplicity)


def _evaluate(f: VertexFunction, tree: FiniteTree) -> list[Scalar]:
    if callable(f) and not isinstance(f, Mapping):
        return [f(v) for v in tree.vertices]
    if isinstance(f, Mapping):
        return [f[v] for v in tree.vertices]
    values = list(f)
    if len(values) != len(tree.vertices):
        raise DimensionMismatch("one value per vertex is required")
    return values


def representation(st: SpectralTriple, f: VertexFunction) -> ExactMatrix:
    """Diagonal matrix of ``π(f)``: ``f(neighbor)`` on ``+``, ``f(vertex)`` on ``-``."""
    vals = _evaluate(f, st.tree)
    diag = {}
    for i, s in enumerate(st.basis):
        diag[(i, i)] = vals[s.neighbor] if s.spin > 0 else vals[s.vertex]
    n = st.dimension
    return ExactMatrix((n, n), diag)


def rep_apply(st: SpectralTriple, f: VertexFunction, psi: Sequence[Scalar]) -> list[Scalar]:
    if len(psi) != st.dimension:
        raise DimensionMismatch(f"expected {st.dimension} coordinates, got {len(psi)}")
    return representation(st, f).apply(psi)


def commutator_norm(st: SpectralTriple, f: VertexFunction) -> Fraction | float:
    """``‖[D, π(f)]‖``, computed block by block."""
    vals = _evaluate(f, st.tree)
    best: Fraction | float = Fraction(0)
    for s in st.basis:
        if s.spin < 0:
            continue
        length = st.tree.edge_length(s.vertex, s.neighbor)
        gap = abs(vals[s.neighbor] - vals[s.vertex]) / length
        best = max(best, gap)
    return best


def lipschitz_constant(tree: FiniteTree, f: VertexFunction) -> Fraction | float:
    """``max |f(u) - f(w)| / ρ(u, w)`` over vertex pairs."""
    vals = _evaluate(f, tree)
    best: Fraction | float = Fraction(0)
    vs = tree.vertices
    for i in range(len(vs)):
        for j in range(i + 1, len(vs)):
            best = max(best, abs(vals[i] - vals[j]) / big_metric(vs[i], vs[j]))
    return best


def operator_norm(st: SpectralTriple) -> Fraction:
    """Exact ``‖D‖ = max 1/length`` over edges."""
    return max(1 / e.length for e in st.tree.edges)


def eigenvalues(st: SpectralTriple) -> np.ndarray:
    """Dense symmetric eigensolve of the Dirac operator, ascending."""
    if st.dimension > DENSE_SLOT_LIMIT:
        raise SpectrumTooLarge(f"{st.dimension} slots exceed the dense limit {DENSE_SLOT_LIMIT}")
    return np.linalg.eigvalsh(st.dirac.to_dense(float))


def spectral_radius(st: SpectralTriple) -> float:
    return float(np.max(np.abs(eigenvalues(st))))


def analytic_spectrum(st: SpectralTriple) -> list[Fraction]:
    """``±1/length`` for every edge, each twice per copy, ascending."""
    out = []
    for e in st.tree.edges:
        out += [1 / e.length, -1 / e.length] * (2 * st.multiplicity)
    return sorted(out)


def spectrum_table(st: SpectralTriple, tol: float = SPECTRUM_TOL) -> list[tuple[float, int]]:
    """Eigenvalues grouped into ``(value, multiplicity)`` clusters."""
    clusters: list[list[float]] = []
    for ev in eigenvalues(st):
        if clusters and abs(ev - clusters[-1][-1]) <= tol:
            clusters[-1].append(float(ev))
        else:
            clusters.append([float(ev)])
    return [(sum(c) / len(c), len(c)) for c in clusters]


def check_even_triple(
    st: SpectralTriple, functions: Iterable[VertexFunction] = ()
) -> dict[str, Any]:
    """Exact residuals of the even spectral triple identities."""
    d, g = st.dirac, st.grading
    ident = ExactMatrix.identity(st.dimension)
    report = {
        "grading_selfadjoint": (g - g.conj_T()).max_abs(),
        "grading_involution": (g @ g - ident).max_abs(),
        "grading_anticommutes": (g @ d + d @ g).max_abs(),
        "dirac_symmetric": (d - d.T).max_abs(),
    }
    worst: Any = Fraction(0)
    for f in functions:
        pi = representation(st, f)
        worst = max(worst, (g @ pi - pi @ g).max_abs())
    report["grading_commutes_with_rep"] = worst
    return report


# --- morphisms -------------------------------------------------------------


@dataclass(frozen=True)
class TreeMorphism:
    source: FiniteTree
    target: FiniteTree
    vertex_map: tuple[int, ...]
    is_leaf_extension: bool


def tree_inclusion(source: FiniteTree, target: FiniteTree) -> TreeMorphism:
    """Inclusion of ``source`` in ``target``; flags whether no source edge is subdivided."""
    if source.p != target.p:
        raise ValueError("trees over different primes")
    try:
        vmap = tuple(target.index[v] for v in source.vertices)
    except KeyError as exc:
        raise ValueError(f"source vertex {exc.args[0]!r} is missing from the target") from None
    leaf_ext = True
    for e in source.edges:
        a, b = vmap[e.parent], vmap[e.child]
        try:
            if target.edge_length(a, b) != e.length:
                leaf_ext = False
        except KeyError:
            leaf_ext = False
    return TreeMorphism(source, target, vmap, leaf_ext)


def _inclusion_matrix(m: TreeMorphism, s1: SpectralTriple, s2: SpectralTriple) -> ExactMatrix:
    pos = {(s.vertex, s.neighbor, s.spin, s.copy): i for i, s in enumerate(s2.basis)}
    data = {}
    for j, s in enumerate(s1.basis):
        key = (m.vertex_map[s.vertex], m.vertex_map[s.neighbor], s.spin, s.copy)
        data[(pos[key], j)] = 1
    return ExactMatrix((s2.dimension, s1.dimension), data)


def check_morphism(
    m: TreeMorphism, f: VertexFunction, psi: Sequence[Scalar] | None = None
) -> dict[str, Any]:
    """Residuals of ``ιπ₁(f) = π₂(r*f)ι``, ``ιD₁ = D₂ι`` and ``ιγ₁ = γ₂ι``.

    With ``psi`` the residuals are measured on that vector, otherwise as
    matrices over every basis vector.
    """
    if not m.is_leaf_extension:
        raise NotLeafExtension("the target subdivides an edge of the source")
    s1, s2 = assemble_triple(m.source), assemble_triple(m.target)
    src_vals = _evaluate(f, m.source)
    pulled = []
    for w in m.target.vertices:
        r = retract(m.source, w)
        if r not in m.source.index:
            raise NotLeafExtension(f"{w!r} retracts to a non-vertex point")
        pulled.append(src_vals[m.source.index[r]])
    iota = _inclusion_matrix(m, s1, s2)
    pairs = {
        "representation": (iota @ representation(s1, src_vals), representation(s2, pulled) @ iota),
        "dirac": (iota @ s1.dirac, s2.dirac @ iota),
        "grading": (iota @ s1.grading, s2.grading @ iota),
    }
    report = {}
    for name, (lhs, rhs) in pairs.items():
        diff = lhs - rhs
        if psi is None:
            report[name] = diff.max_abs()
        else:
            report[name] = max((abs(x) for x in diff.apply(psi)), default=Fraction(0))
    return report


def tower_resolvent_profile(trees: Sequence[FiniteTree], lam: complex) -> list[float]:
    """``sup_{k>j} 1/|‖D_k‖ - λ|`` for each level ``j`` below the top."""
    lam = complex(lam)
    if lam.imag == 0:
        raise RealLambda("λ must have a nonzero imaginary part")
    for lower, upper in zip(trees, trees[1:]):
        if not tree_inclusion(lower, upper).is_leaf_extension:
            raise NotLeafExtension("consecutive trees must be leaf extensions")
    norms = [float(operator_norm(assemble_triple(t))) for t in trees]
    return [max(1 / abs(n - lam) for n in norms[j + 1 :]) for j in range(len(trees) - 1)]


# --- serialization ---------------------------------------------------------


def disks_from_config(data: Mapping[str, Any]) -> tuple[PrimeContext, list[tuple[Fraction, Fraction]]]:
    ctx = PrimeContext(int(data["p"]))
    disks = [(as_fraction(str(d["center"])), as_fraction(str(d["radius_exp"]))) for d in data["disks"]]
    return ctx, disks
