"""Truncated l2 representation of the subshift algebra.

The Hilbert space has one basis vector per point of a finite, shift-closed
set of symbolic points. ``S_q`` prepends the letter ``q``; when the result
would leave the truncation the coordinate is dropped and flagged.
Relation checks only look at columns deep enough in the budget that no
dropped coordinate can take part, which keeps every residual exactly zero.
"""
from __future__ import annotations

import io
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
import scipy.sparse as sp

from .dendrite import (
    CombSystem,
    EndTail,
    InadmissibleWord,
    LetterTail,
    SymbolicPoint,
    UnknownLetter,
    Word,
    closed_word,
    enumerate_cylinders,
    in_C,
    in_cylinder,
    in_follower,
    is_admissible,
    shift,
    sigma_q,
    symbols,
    word_to_str,
)

MAX_BASIS = 50_000
FLOAT_TOL = 1e-12


class ZeroVector(ValueError):
    pass


class BasisTooLarge(ValueError):
    pass


class Applied(NamedTuple):
    vector: np.ndarray
    truncated: bool


def _sort_key(x: SymbolicPoint) -> tuple:
    tail = x.tail
    tag = (0, tail.index) if isinstance(tail, LetterTail) else (1, tail.index)
    return (x.depth, x.prefix.expand(), tag)


@dataclass
class TruncatedBasis:
    """Shift-closed set of points over letters ``1..N`` with depth at most ``D``.

    Points are the admissible words of length ``<= D`` closed by repeating
    their last letter. With ``end_tails`` the tail-only points ``b_j^∞``
    (``j <= N``) are added together with their admissible extensions of
    depth ``<= D``.
    """

    cs: CombSystem
    N: int
    D: int
    end_tails: bool = True
    points: list[SymbolicPoint] = field(init=False)
    index: dict[SymbolicPoint, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.N <= len(self.cs):
            raise UnknownLetter(f"N={self.N} outside 1..{len(self.cs)}")
        if self.D < 1:
            raise ValueError("D must be at least 1")
        words = enumerate_cylinders(self.cs, self.N, self.D)
        pts = {closed_word(w) for w in words}
        if self.end_tails:
            for j in range(1, self.N + 1):
                base = SymbolicPoint(Word(), EndTail(j))
                pts.add(base)
                for u in words:
                    if len(u) + 1 <= self.D and in_follower(self.cs, u, base):
                        pts.add(SymbolicPoint(u, EndTail(j)))
        if len(pts) > MAX_BASIS:
            raise BasisTooLarge(f"{len(pts)} points exceed the cap {MAX_BASIS}")
        self.points = sorted(pts, key=_sort_key)
        self.index = {x: i for i, x in enumerate(self.points)}

    def __len__(self) -> int:
        return len(self.points)

    def letter(self, q: int | Any) -> int:
        n = self.cs.resolve(q)
        if n > self.N:
            raise UnknownLetter(f"letter {n} is outside the truncated alphabet 1..{self.N}")
        return n

    @cached_property
    def _creation(self) -> dict[int, tuple[dict[int, int], frozenset[int]]]:
        out = {}
        for n in range(1, self.N + 1):
            mapping, dropped = {}, set()
            for i, x in enumerate(self.points):
                if not in_follower(self.cs, Word.of(n), x):
                    continue
                j = self.index.get(sigma_q(self.cs, n, x))
                if j is None:
                    dropped.add(i)
                else:
                    mapping[i] = j
            out[n] = (mapping, frozenset(dropped))
        return out

    def creation_map(self, q: int | Any) -> dict[int, int]:
        return self._creation[self.letter(q)][0]

    def truncated(self, q: int | Any) -> frozenset[int]:
        """Basis indices whose image under ``S_q`` falls outside the basis."""
        return self._creation[self.letter(q)][1]

    @cached_property
    def shift_index(self) -> list[int]:
        return [self.index[shift(x)] for x in self.points]

    def creation(self, q: int | Any) -> sp.csr_matrix:
        """Matrix of ``S_q``."""
        mapping = self.creation_map(q)
        cols = list(mapping)
        rows = [mapping[c] for c in cols]
        n = len(self)
        return sp.csr_matrix((np.ones(len(cols), dtype=np.int64), (rows, cols)), shape=(n, n))

    def word_operator(self, w: Word) -> sp.csr_matrix:
        """``S_w = S_{w_1} ... S_{w_k}``, so ``S_w e_y = e_{w y}``."""
        op = sp.identity(len(self), dtype=np.int64, format="csr")
        for n in w.expand():
            op = op @ self.creation(n)
        return op

    def mask(self, predicate) -> np.ndarray:
        return np.array([bool(predicate(x)) for x in self.points])

    def has_letter_head(self, x: SymbolicPoint) -> bool:
        head = next(symbols(self.cs, x))
        return head[0] == "q" and any(head[1] == self.cs.q(n) for n in range(1, self.N + 1))


def _vector(tb: TruncatedBasis, v: Sequence[Any]) -> np.ndarray:
    arr = np.asarray(v)
    if arr.shape != (len(tb),):
        raise ValueError(f"expected a vector of length {len(tb)}, got shape {arr.shape}")
    return arr


def S_apply(tb: TruncatedBasis, q: int | Any, v: Sequence[Any]) -> Applied:
    arr = _vector(tb, v)
    mapping = tb.creation_map(q)
    out = np.zeros_like(arr)
    for i, j in mapping.items():
        out[j] = out[j] + arr[i]
    lost = any(arr[i] != 0 for i in tb.truncated(q))
    return Applied(out, lost)


def S_adjoint_apply(tb: TruncatedBasis, q: int | Any, v: Sequence[Any]) -> np.ndarray:
    arr = _vector(tb, v)
    out = np.zeros_like(arr)
    for i, j in tb.creation_map(q).items():
        out[i] = arr[j]
    return out


# --- Boolean combinations of C(alpha, beta) sets ----------------------------


class SetExpr:
    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        raise NotImplementedError

    def __and__(self, other: SetExpr) -> SetExpr:
        return Intersection(self, other)

    def __or__(self, other: SetExpr) -> SetExpr:
        return Union(self, other)

    def __invert__(self) -> SetExpr:
        return Complement(self)


@dataclass(frozen=True)
class C(SetExpr):
    """``{beta y : alpha y admissible}``."""

    alpha: Word = Word()
    beta: Word = Word()

    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        for w in (self.alpha, self.beta):
            if not is_admissible(tb.cs, w):
                raise InadmissibleWord(word_to_str(tb.cs, w))
        return tb.mask(lambda x: in_C(tb.cs, self.alpha, self.beta, x))


def Cylinder(beta: Word) -> C:
    return C(Word(), beta)


def Follower(alpha: Word) -> C:
    return C(alpha, Word())


@dataclass(frozen=True)
class Intersection(SetExpr):
    left: SetExpr
    right: SetExpr

    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        return self.left.mask(tb) & self.right.mask(tb)


@dataclass(frozen=True)
class Union(SetExpr):
    left: SetExpr
    right: SetExpr

    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        return self.left.mask(tb) | self.right.mask(tb)


@dataclass(frozen=True)
class Complement(SetExpr):
    inner: SetExpr

    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        return ~self.inner.mask(tb)


@dataclass(frozen=True)
class Nothing(SetExpr):
    def mask(self, tb: TruncatedBasis) -> np.ndarray:
        return np.zeros(len(tb), dtype=bool)


EVERYTHING = C()
NOTHING = Nothing()


def projection(tb: TruncatedBasis, expr: SetExpr) -> sp.csr_matrix:
    return sp.diags(expr.mask(tb).astype(np.int64), format="csr")


def P_apply(tb: TruncatedBasis, expr: SetExpr, v: Sequence[Any]) -> np.ndarray:
    arr = _vector(tb, v)
    return np.where(expr.mask(tb), arr, np.zeros_like(arr))


# --- relations ---------------------------------------------------------------


def _restricted_residual(diff: sp.spmatrix, columns: np.ndarray) -> int:
    sub = sp.csc_matrix(diff)[:, columns]
    return int(abs(sub).max()) if sub.nnz else 0


def _safe_columns(tb: TruncatedBasis, budget: int) -> np.ndarray:
    return np.array([i for i, x in enumerate(tb.points) if x.depth + budget <= tb.D], dtype=np.int64)


def verify_relations(tb: TruncatedBasis) -> list[dict[str, Any]]:
    """Exact residuals of the five defining relations over all truncated words.

    (i)   S_q* S_p = δ_qp P_{F_q}
    (ii)  [S_α* S_α, S_β* S_β] = 0
    (iii) [S_α* S_α, S_β S_β*] = 0
    (iv)  S_α S_β = 0 whenever αβ is inadmissible
    (v)   S_β S_α* S_α S_β* = P_{C(α, β)}
    """
    cs = tb.cs
    words = enumerate_cylinders(cs, tb.N, tb.D)
    ops = {w: tb.word_operator(w) for w in [Word(), *words]}
    src = {w: (op.T @ op).tocsr() for w, op in ops.items()}
    rng = {w: (op @ op.T).tocsr() for w, op in ops.items()}
    safe = {k: _safe_columns(tb, k) for k in range(tb.D + 2)}

    def budget_cols(k: int) -> np.ndarray:
        return safe.get(k, np.array([], dtype=np.int64))

    def label(**ws: Word) -> str:
        return ";".join(f"{k}={word_to_str(cs, w) or 'empty'}" for k, w in ws.items())

    report = []
    for q in range(1, tb.N + 1):
        sq = tb.creation(q)
        for p_ in range(1, tb.N + 1):
            lhs = sq.T @ tb.creation(p_)
            rhs = projection(tb, C(Word.of(q))) if q == p_ else sp.csr_matrix(lhs.shape, dtype=np.int64)
            report.append({
                "relation": "i",
                "words": label(q=Word.of(q), p=Word.of(p_)),
                "residual": _restricted_residual(lhs - rhs, budget_cols(1)),
            })
    for a in words:
        for b in words:
            k = max(len(a), len(b))
            comm = src[a] @ src[b] - src[b] @ src[a]
            report.append({"relation": "ii", "words": label(alpha=a, beta=b),
                           "residual": _restricted_residual(comm, budget_cols(k))})
            comm = src[a] @ rng[b] - rng[b] @ src[a]
            report.append({"relation": "iii", "words": label(alpha=a, beta=b),
                           "residual": _restricted_residual(comm, budget_cols(len(a)))})
            if not is_admissible(cs, a + b):
                prod = ops[a] @ ops[b]
                report.append({"relation": "iv", "words": label(alpha=a, beta=b),
                               "residual": _restricted_residual(prod, budget_cols(len(a) + len(b)))})
    for a in [Word(), *words]:
        for b in [Word(), *words]:
            lhs = ops[b] @ src[a] @ ops[b].T
            rhs = projection(tb, C(a, b))
            report.append({"relation": "v", "words": label(alpha=a, beta=b),
                           "residual": _restricted_residual(lhs - rhs, budget_cols(len(a)))})
    return report


def partition_identity(tb: TruncatedBasis) -> dict[str, Any]:
    """``Σ_q S_q S_q*`` against the projection onto points headed by a letter."""
    n = len(tb)
    total = sp.csr_matrix((n, n), dtype=np.int64)
    for q in range(1, tb.N + 1):
        s = tb.creation(q)
        total = total + s @ s.T
    head = tb.mask(tb.has_letter_head)
    diff = total - sp.diags(head.astype(np.int64))
    excluded = [tb.points[i] for i in np.flatnonzero(~head)]
    return {
        "residual": int(abs(diff).max()) if diff.nnz else 0,
        "excluded": excluded,
    }


def perron_frobenius_apply(tb: TruncatedBasis, v: Sequence[Any]) -> np.ndarray:
    """``Σ_q S_q* v``."""
    arr = _vector(tb, v)
    out = np.zeros_like(arr)
    for q in range(1, tb.N + 1):
        out = out + S_adjoint_apply(tb, q, arr)
    return out


def transfer_apply(tb: TruncatedBasis, v: Sequence[Any]) -> np.ndarray:
    """``(T ψ)(x) = ψ(σ x)``."""
    arr = _vector(tb, v)
    return arr[np.array(tb.shift_index, dtype=np.int64)]


def inner(a: np.ndarray, b: np.ndarray) -> Any:
    return np.sum(a * np.conj(b))


def pf_adjointness_residual(tb: TruncatedBasis, psi: Sequence[Any], xi: Sequence[Any]) -> float:
    """``|<Tψ, ξ> - <ψ, P ξ>|`` with ``ξ`` cut down to letter-headed points."""
    xi = np.where(tb.mask(tb.has_letter_head), _vector(tb, xi), 0)
    psi = _vector(tb, psi)
    return abs(inner(transfer_apply(tb, psi), xi) - inner(psi, perron_frobenius_apply(tb, xi)))


def _prefix_of(a: Word, b: Word) -> bool:
    ea, eb = a.expand(), b.expand()
    return eb[: len(ea)] == ea


def pvm_consistency(tb: TruncatedBasis) -> dict[str, Any]:
    """Refinement ``P(Z(Q)) = Σ_q P(Z(Qq))`` and orthogonality of incomparable cylinders.

    Refinement is tested on points whose symbol after ``Q`` is a truncated
    letter; tail-only continuations belong to no child cylinder.
    """
    cs = tb.cs
    words = [w for w in enumerate_cylinders(cs, tb.N, tb.D) if len(w) < tb.D]
    masks = {w: Cylinder(w).mask(tb) for w in [Word(), *enumerate_cylinders(cs, tb.N, tb.D)]}
    letters = [cs.q(n) for n in range(1, tb.N + 1)]

    def deep(x: SymbolicPoint, m: int) -> bool:
        it = symbols(cs, x)
        for _ in range(m):
            next(it)
        s = next(it)
        return s[0] == "q" and s[1] in letters

    refinement = []
    for w in [Word(), *words]:
        children = [w + Word.of(n) for n in range(1, tb.N + 1) if is_admissible(cs, w + Word.of(n))]
        total = np.zeros(len(tb), dtype=np.int64)
        for c in children:
            total += masks[c] if c in masks else Cylinder(c).mask(tb)
        depth_ok = tb.mask(lambda x, m=len(w): deep(x, m))
        resid = int(np.max(np.abs(masks[w].astype(np.int64) - total)[depth_ok], initial=0))
        refinement.append({"word": word_to_str(cs, w) or "empty", "residual": resid})
    all_words = list(masks)
    orth = 0
    for i, a in enumerate(all_words):
        for b in all_words[i + 1 :]:
            if not (_prefix_of(a, b) or _prefix_of(b, a)):
                orth = max(orth, int(np.max(masks[a] & masks[b], initial=0)))
    return {
        "refinement": refinement,
        "max_refinement_residual": max((r["residual"] for r in refinement), default=0),
        "orthogonality_residual": orth,
        "empty_set_residual": int(NOTHING.mask(tb).sum()),
    }


# --- spectral integral and cyclic vectors ----------------------------------

SimpleFunction = Sequence[tuple[complex, Word]]


def _check_words(tb: TruncatedBasis, f: SimpleFunction) -> None:
    for _, w in f:
        if not is_admissible(tb.cs, w):
            raise InadmissibleWord(word_to_str(tb.cs, w))


def spectral_integral(tb: TruncatedBasis, f: SimpleFunction) -> sp.csr_matrix:
    """``Σ c_i P(Z(Q_i))`` as a diagonal operator."""
    _check_words(tb, f)
    diag = np.zeros(len(tb), dtype=complex)
    for c, w in f:
        diag += c * Cylinder(w).mask(tb)
    return sp.diags(diag, format="csr")


def simple_product(f: SimpleFunction, g: SimpleFunction) -> list[tuple[complex, Word]]:
    """Pointwise product using ``Z(a) ∩ Z(b)`` = the longer word, or empty."""
    out = []
    for c, a in f:
        for d, b in g:
            if _prefix_of(a, b):
                out.append((c * d, b))
            elif _prefix_of(b, a):
                out.append((c * d, a))
    return out


def sup_norm(tb: TruncatedBasis, f: SimpleFunction) -> float:
    values = np.zeros(len(tb), dtype=complex)
    for c, w in f:
        for i, x in enumerate(tb.points):
            if in_cylinder(tb.cs, w, x):
                values[i] += c
    return float(np.max(np.abs(values), initial=0.0))


def _op_norm(m: sp.spmatrix) -> float:
    if m.shape[0] <= 2000:
        return float(np.linalg.norm(m.toarray(), 2)) if m.shape[0] else 0.0
    return float(abs(m).max())


def spectral_integral_check(tb: TruncatedBasis, f: SimpleFunction, g: SimpleFunction) -> dict[str, float]:
    pf, pg = spectral_integral(tb, f), spectral_integral(tb, g)
    conj = [(np.conj(c), w) for c, w in f]
    adj = spectral_integral(tb, conj) - pf.conj().T
    mult = spectral_integral(tb, simple_product(f, g)) - pf @ pg
    return {
        "adjoint_residual": float(abs(adj).max()) if adj.nnz else 0.0,
        "multiplicative_residual": float(abs(mult).max()) if mult.nnz else 0.0,
        "operator_norm": _op_norm(pf),
        "sup_norm": sup_norm(tb, f),
    }


def cyclic_isometry_check(tb: TruncatedBasis, f: Sequence[Any]) -> dict[str, Any]:
    """``‖S_Q S_Q* f‖² = μ_f(Z(Q)) = <P(Z(Q)) f, f>`` over all truncated words."""
    f = _vector(tb, f)
    if not np.any(f != 0):
        raise ZeroVector("the cyclic vector must be nonzero")
    measure = {}
    worst = 0.0
    for w in [Word(), *enumerate_cylinders(tb.cs, tb.N, tb.D)]:
        mu = inner(P_apply(tb, Cylinder(w), f), f)
        s = tb.word_operator(w)
        image = s @ (s.T @ f)
        worst = max(worst, float(abs(inner(image, image) - mu)))
        measure[word_to_str(tb.cs, w) or "empty"] = mu
    return {"measure": measure, "max_residual": worst}


def invariant_weight_residual(
    tb: TruncatedBasis, require_partition: bool = True, interior_only: bool = True
) -> dict[str, Any]:
    """Best nonnegative point weights with ``w(qy) = w(y)`` for every ``q`` and total mass 1.

    With ``require_partition`` points headed by no letter must carry zero
    mass, i.e. the measure lives on the union of the ``Z(q)``. Points whose
    ``S_q`` image leaves the truncation escape the invariance constraints, so
    without ``interior_only`` the mass simply piles up there. A positive
    residual means no probability weighting on this truncation makes every
    ``σ_q`` measure preserving.
    """
    from scipy.optimize import lsq_linear

    n = len(tb)
    rows: list[np.ndarray] = []
    for q in range(1, tb.N + 1):
        for y, qy in sorted(tb.creation_map(q).items()):
            r = np.zeros(n)
            r[qy] += 1.0
            r[y] -= 1.0
            rows.append(r)
    invariance = len(rows)
    if require_partition:
        for i in np.flatnonzero(~tb.mask(tb.has_letter_head)):
            r = np.zeros(n)
            r[i] = 1.0
            rows.append(r)
    boundary = sorted(set().union(*(tb.truncated(q) for q in range(1, tb.N + 1))))
    if interior_only:
        for i in boundary:
            r = np.zeros(n)
            r[i] = 1.0
            rows.append(r)
    rows.append(np.ones(n))
    A = np.array(rows)
    b = np.zeros(len(rows))
    b[-1] = 1.0
    sol = lsq_linear(A, b, bounds=(0.0, np.inf), method="bvls")
    resid = A @ sol.x - b
    return {
        "constraints": len(rows),
        "invariance_constraints": invariance,
        "residual": float(np.linalg.norm(resid)),
        "mass": float(sol.x.sum()),
        "boundary_mass": float(sol.x[boundary].sum()),
        "max_invariance_violation": float(np.max(np.abs(resid[:invariance]), initial=0.0)),
        "weights": sol.x,
    }


def operator_csv(m: sp.spmatrix) -> str:
    """Coordinate list ``row,col,value`` sorted by position."""
    coo = sp.coo_matrix(m)
    buf = io.StringIO()
    buf.write("row,col,value\n")
    for r, c, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        buf.write(f"{r},{c},{v}\n")
    return buf.getvalue()


def relation_summary(report: Iterable[dict[str, Any]]) -> dict[str, int]:
    out: dict[str, int] = {}
    for r in report:
        out[r["relation"]] = max(out.get(r["relation"], 0), r["residual"])
    return out
