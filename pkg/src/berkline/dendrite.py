"""Symbolic coordinates on the universal dendrite.

Letters are rationals ``q_n`` in ``(0, 1)``, each with a ceiling ``b_n``.
A sequence of letters is admissible when every change of letter climbs
strictly but not past the ceiling of the letter being left::

    q_prev < q_next <= b_prev

Points are an admissible finite word (the prefix) followed by an infinite
tail. Letters inside words are referenced by their 1-based index in the
comb system.
"""
from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Any, Union

from .padic import as_fraction


class UnknownLetter(KeyError):
    pass


class InconsistentTail(ValueError):
    pass


class NotInFollowerSet(ValueError):
    pass


class NotInDirection(ValueError):
    pass


class InadmissibleWord(ValueError):
    pass


# --- comb systems ----------------------------------------------------------


def farey_letters() -> Iterator[Fraction]:
    """Rationals in (0, 1) by increasing denominator, then numerator."""
    d = 2
    while True:
        for a in range(1, d):
            if math.gcd(a, d) == 1:
                yield Fraction(a, d)
        d += 1


def _totient(n: int) -> int:
    result, m, k = n, n, 2
    while k * k <= m:
        if m % k == 0:
            while m % k == 0:
                m //= k
            result -= result // k
        k += 1
    if m > 1:
        result -= result // m
    return result


def farey_index(q: Fraction) -> int:
    """1-based position of ``q`` in :func:`farey_letters`."""
    if not 0 < q < 1:
        raise ValueError(f"{q} is not in (0, 1)")
    d = q.denominator
    before = sum(_totient(k) for k in range(2, d))
    rank = sum(1 for a in range(1, q.numerator + 1) if math.gcd(a, d) == 1)
    return before + rank


def default_ceiling(n: int, q: Fraction) -> Fraction:
    return q + min(Fraction(1, 2**n), (1 - q) / 2)


@dataclass(frozen=True)
class CombSystem:
    """Letters ``q_n`` with ceilings ``b_n`` (``pairs[n-1] = (q_n, b_n)``).

    ``farey`` marks systems that are a prefix of the default Farey comb, so
    every rational in (0, 1) is a letter of the full enumeration.
    """

    pairs: tuple[tuple[Fraction, Fraction], ...]
    farey: bool = False
    _lookup: dict[Fraction, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pairs = tuple((as_fraction(q), as_fraction(b)) for q, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        seen: dict[Fraction, int] = {}
        for n, (q, b) in enumerate(pairs, start=1):
            if not 0 < q < b <= 1:
                raise ValueError(f"pair {n} violates 0 < q < b <= 1: ({q}, {b})")
            if b - q > Fraction(1, 2**n):
                raise ValueError(f"pair {n}: b - q = {b - q} exceeds 2^-{n}")
            if q in seen:
                raise ValueError(f"letter {q} repeated at {seen[q]} and {n}")
            seen[q] = n
        object.__setattr__(self, "_lookup", seen)

    def __len__(self) -> int:
        return len(self.pairs)

    def q(self, n: int) -> Fraction:
        self._check(n)
        return self.pairs[n - 1][0]

    def b(self, n: int) -> Fraction:
        self._check(n)
        return self.pairs[n - 1][1]

    def _check(self, n: int) -> None:
        if not isinstance(n, int) or not 1 <= n <= len(self.pairs):
            raise UnknownLetter(f"letter index {n!r} outside 1..{len(self.pairs)}")

    def index_of(self, value: Fraction) -> int | None:
        """Index of ``value`` in the enumeration, possibly beyond the stored pairs."""
        if value in self._lookup:
            return self._lookup[value]
        if self.farey and 0 < value < 1:
            return farey_index(value)
        return None

    def ceiling_of(self, value: Fraction) -> Fraction | None:
        n = self.index_of(value)
        if n is None:
            return None
        if n <= len(self.pairs):
            return self.pairs[n - 1][1]
        return default_ceiling(n, value)

    def resolve(self, letter: int | Fraction | str) -> int:
        """Letter index from an index or a letter value."""
        if isinstance(letter, int) and not isinstance(letter, bool):
            self._check(letter)
            return letter
        value = as_fraction(letter)
        if value not in self._lookup:
            raise UnknownLetter(f"{value} is not a letter of this comb")
        return self._lookup[value]


def default_comb(depth: int) -> CombSystem:
    """First ``depth`` Farey letters with ceilings ``q + min(2^-n, (1-q)/2)``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    letters = islice(farey_letters(), depth)
    return CombSystem(tuple((q, default_ceiling(n, q)) for n, q in enumerate(letters, start=1)), farey=True)


# --- words -----------------------------------------------------------------


@dataclass(frozen=True)
class Word:
    """Run-length encoded letter indices: ``((n, k), ...)`` means ``q_n^k ...``."""

    letters: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        merged: list[list[int]] = []
        for n, k in self.letters:
            if k < 1:
                raise ValueError(f"power must be positive, got {k}")
            if merged and merged[-1][0] == n:
                merged[-1][1] += k
            else:
                merged.append([n, k])
        object.__setattr__(self, "letters", tuple((n, k) for n, k in merged))

    @classmethod
    def of(cls, *indices: int) -> Word:
        return cls(tuple((n, 1) for n in indices))

    def expand(self) -> tuple[int, ...]:
        return tuple(n for n, k in self.letters for _ in range(k))

    def __len__(self) -> int:
        return sum(k for _, k in self.letters)

    def __add__(self, other: Word) -> Word:
        return Word(self.letters + other.letters)

    def __bool__(self) -> bool:
        return bool(self.letters)

    @property
    def first(self) -> int:
        return self.letters[0][0]

    @property
    def last(self) -> int:
        return self.letters[-1][0]

    def drop_first(self) -> Word:
        (n, k), rest = self.letters[0], self.letters[1:]
        return Word(((n, k - 1),) + rest) if k > 1 else Word(rest)


def is_admissible(cs: CombSystem, w: Word) -> bool:
    for n, _ in w.letters:
        cs._check(n)
    for (m, _), (n, _) in zip(w.letters, w.letters[1:]):
        if not cs.q(m) < cs.q(n) <= cs.b(m):
            return False
    return True


def word_from_values(cs: CombSystem, values: Sequence[Fraction | str]) -> Word:
    return Word.of(*(cs.resolve(v) for v in values))


def word_to_str(cs: CombSystem, w: Word) -> str:
    return ",".join(f"{_fs(cs.q(n))}^{k}" for n, k in w.letters)


def parse_word(cs: CombSystem, text: str) -> Word:
    text = text.strip()
    if not text:
        return Word()
    letters = []
    for item in text.split(","):
        value, _, power = item.strip().partition("^")
        letters.append((cs.resolve(as_fraction(value)), int(power) if power else 1))
    return Word(tuple(letters))


def _fs(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# --- tails and points ------------------------------------------------------


@dataclass(frozen=True)
class LetterTail:
    """``q_n`` repeated forever."""

    index: int


@dataclass(frozen=True)
class RealTail:
    """A constant tail ``t^∞``; ``irrational`` tags ``t`` as a stand-in for an irrational."""

    value: Fraction
    irrational: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", as_fraction(self.value))
        if not 0 < self.value < 1:
            raise ValueError(f"tail value {self.value} not in (0, 1)")


@dataclass(frozen=True)
class EndTail:
    """The ceiling ``b_j`` repeated forever, a formal end symbol."""

    index: int


@dataclass(frozen=True)
class InfiniteTail:
    """The strictly increasing stream ``t_k = limit - (limit - start) / 2**k``."""

    start: Fraction
    limit: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", as_fraction(self.start))
        object.__setattr__(self, "limit", as_fraction(self.limit))
        if not 0 < self.start < self.limit <= 1:
            raise ValueError("need 0 < start < limit <= 1")

    def letter(self, k: int) -> Fraction:
        return self.limit - (self.limit - self.start) / 2**k


Tail = Union[LetterTail, RealTail, EndTail, InfiniteTail]

# Symbols compare by tag and value. A rational constant tail and a letter of
# the same value are the same symbol.
Symbol = tuple[str, Any]


@dataclass(frozen=True)
class SymbolicPoint:
    prefix: Word
    tail: Tail

    def __post_init__(self) -> None:
        if isinstance(self.tail, LetterTail):
            letters = list(self.prefix.letters)
            while letters and letters[-1][0] == self.tail.index:
                letters.pop()
            object.__setattr__(self, "prefix", Word(tuple(letters)))

    @property
    def depth(self) -> int:
        """Prefix length plus one for the tail."""
        return len(self.prefix) + 1


def closed_word(w: Word) -> SymbolicPoint:
    """The point ``w`` followed by its last letter repeated."""
    if not w:
        raise ValueError("cannot close the empty word")
    return SymbolicPoint(w, LetterTail(w.last))


def _letter_symbol(cs: CombSystem, n: int) -> Symbol:
    return ("q", cs.q(n))


def _tail_symbols(cs: CombSystem, tail: Tail) -> Iterator[Symbol]:
    if isinstance(tail, InfiniteTail):
        k = 0
        while True:
            yield ("q", tail.letter(k))
            k += 1
    if isinstance(tail, LetterTail):
        sym: Symbol = _letter_symbol(cs, tail.index)
    elif isinstance(tail, RealTail):
        sym = ("irr", tail.value) if tail.irrational else ("q", tail.value)
    else:
        cs._check(tail.index)
        sym = ("end", tail.index)
    while True:
        yield sym


def symbols(cs: CombSystem, x: SymbolicPoint) -> Iterator[Symbol]:
    for n in x.prefix.expand():
        yield _letter_symbol(cs, n)
    yield from _tail_symbols(cs, x.tail)


def _value(cs: CombSystem, s: Symbol) -> Fraction:
    return cs.b(s[1]) if s[0] == "end" else s[1]


def _may_follow(cs: CombSystem, s: Symbol, t: Symbol) -> bool:
    if s == t:
        return True
    if s[0] != "q":
        return False
    ceiling = cs.ceiling_of(s[1])
    return ceiling is not None and s[1] < _value(cs, t) <= ceiling


def _first_symbol(cs: CombSystem, x: SymbolicPoint) -> Symbol:
    return next(symbols(cs, x))


def _check_point(cs: CombSystem, x: SymbolicPoint) -> None:
    if not is_admissible(cs, x.prefix):
        raise InconsistentTail("prefix is not admissible")
    head = list(islice(_tail_symbols(cs, x.tail), 2))
    if x.prefix and not _may_follow(cs, _letter_symbol(cs, x.prefix.last), head[0]):
        raise InconsistentTail("tail does not continue the prefix admissibly")
    if isinstance(x.tail, InfiniteTail) and x.tail.letter(0) >= x.tail.letter(1):
        raise InconsistentTail("infinite tail must increase")


def classify(cs: CombSystem, x: SymbolicPoint) -> str:
    """Point type: ``"I"``, ``"II"``, ``"III"`` or ``"IV"``."""
    _check_point(cs, x)
    tail = x.tail
    if isinstance(tail, LetterTail):
        return "II"
    if isinstance(tail, EndTail):
        return "IV"
    if isinstance(tail, InfiniteTail):
        return "I"
    if tail.irrational or cs.index_of(tail.value) is None:
        return "III"
    return "II"


def shift(x: SymbolicPoint) -> SymbolicPoint:
    """Drop the first symbol; constant tails are fixed."""
    if x.prefix:
        return SymbolicPoint(x.prefix.drop_first(), x.tail)
    if isinstance(x.tail, InfiniteTail):
        return SymbolicPoint(Word(), InfiniteTail(x.tail.letter(1), x.tail.limit))
    return x


def in_follower(cs: CombSystem, alpha: Word, x: SymbolicPoint) -> bool:
    """Whether ``alpha x`` is admissible."""
    if not is_admissible(cs, alpha):
        return False
    if not alpha:
        return True
    return _may_follow(cs, _letter_symbol(cs, alpha.last), _first_symbol(cs, x))


def sigma_q(cs: CombSystem, q: int | Fraction | str, x: SymbolicPoint) -> SymbolicPoint:
    """Prepend the letter ``q``; defined on the follower set of ``q``."""
    n = cs.resolve(q)
    if not in_follower(cs, Word.of(n), x):
        raise NotInFollowerSet(f"{x} does not follow letter {cs.q(n)}")
    return SymbolicPoint(Word.of(n) + x.prefix, x.tail)


def in_cylinder(cs: CombSystem, beta: Word, x: SymbolicPoint) -> bool:
    """Whether ``x`` starts with ``beta``."""
    want = [_letter_symbol(cs, n) for n in beta.expand()]
    return list(islice(symbols(cs, x), len(want))) == want


def in_C(cs: CombSystem, alpha: Word, beta: Word, x: SymbolicPoint) -> bool:
    """Whether ``x = beta y`` with ``alpha y`` admissible."""
    if not in_cylinder(cs, beta, x):
        return False
    y = x
    for _ in range(len(beta)):
        y = shift(y)
    return in_follower(cs, alpha, y)


def enumerate_cylinders(cs: CombSystem, N: int, D: int) -> list[Word]:
    """Admissible nonempty words over letters ``1..N`` of length at most ``D``.

    Ordered lexicographically on letter indices; ``D = 0`` gives the empty word.
    """
    if D == 0:
        return [Word()]
    if N > len(cs):
        raise UnknownLetter(f"comb has only {len(cs)} letters, asked for {N}")
    out: list[tuple[int, ...]] = []

    def grow(seq: tuple[int, ...]) -> None:
        out.append(seq)
        if len(seq) == D:
            return
        last = seq[-1]
        for n in range(1, N + 1):
            if n == last or cs.q(last) < cs.q(n) <= cs.b(last):
                grow(seq + (n,))

    for n in range(1, N + 1):
        grow((n,))
    return [Word.of(*seq) for seq in sorted(out)]


def direction_to_cylinder(
    cs: CombSystem, x: SymbolicPoint, y: SymbolicPoint, z: SymbolicPoint
) -> Word:
    """A cylinder containing ``z`` inside the direction at ``x`` toward ``y``.

    Uses the prefix order: ``x <= z <= y`` when their prefixes extend one
    another. Returns the prefix of ``z``.
    """
    ax, ay, az = (pt.prefix.expand() for pt in (x, y, z))
    if not (ay[: len(az)] == az and az[: len(ax)] == ax and len(az) > len(ax)):
        raise NotInDirection("z does not lie strictly between x and y in prefix order")
    q = z.prefix
    if not (in_cylinder(cs, q, z) and in_cylinder(cs, q, y)) or in_cylinder(cs, q, x):
        raise NotInDirection("cylinder witness failed the membership checks")
    return q


# --- serialization ---------------------------------------------------------


def tail_to_dict(cs: CombSystem, tail: Tail) -> dict[str, Any]:
    if isinstance(tail, LetterTail):
        return {"kind": "letter", "value": _fs(cs.q(tail.index))}
    if isinstance(tail, RealTail):
        return {"kind": "real", "value": _fs(tail.value), "irrational": tail.irrational}
    if isinstance(tail, EndTail):
        return {"kind": "end", "index": tail.index}
    return {"kind": "infinite", "start": _fs(tail.start), "limit": _fs(tail.limit)}


def tail_from_dict(cs: CombSystem, data: dict[str, Any]) -> Tail:
    kind = data["kind"]
    if kind == "letter":
        return LetterTail(cs.resolve(str(data["value"])))
    if kind == "real":
        return RealTail(as_fraction(str(data["value"])), bool(data.get("irrational", False)))
    if kind == "end":
        return EndTail(int(data["index"]))
    if kind == "infinite":
        return InfiniteTail(as_fraction(str(data["start"])), as_fraction(str(data["limit"])))
    raise ValueError(f"unknown tail kind {kind!r}")


def point_to_dict(cs: CombSystem, x: SymbolicPoint) -> dict[str, Any]:
    return {
        "prefix": [f"{_fs(cs.q(n))}^{k}" for n, k in x.prefix.letters],
        "tail": tail_to_dict(cs, x.tail),
    }


def point_from_dict(cs: CombSystem, data: dict[str, Any]) -> SymbolicPoint:
    prefix = parse_word(cs, ",".join(data.get("prefix", [])))
    return SymbolicPoint(prefix, tail_from_dict(cs, data["tail"]))
