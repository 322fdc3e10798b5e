from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from berkline.dendrite import (
    CombSystem,
    EndTail,
    InconsistentTail,
    InfiniteTail,
    LetterTail,
    NotInDirection,
    NotInFollowerSet,
    RealTail,
    SymbolicPoint,
    UnknownLetter,
    Word,
    classify,
    closed_word,
    default_comb,
    direction_to_cylinder,
    enumerate_cylinders,
    farey_index,
    farey_letters,
    in_C,
    in_cylinder,
    in_follower,
    is_admissible,
    parse_word,
    point_from_dict,
    point_to_dict,
    shift,
    sigma_q,
    word_to_str,
)

SMALL = CombSystem(((F(1, 3), F(2, 3)), (F(1, 2), F(3, 4))))


def pt(prefix=(), tail=None):
    return SymbolicPoint(Word.of(*prefix), tail)


def test_default_comb_pairs():
    assert default_comb(1).pairs == ((F(1, 2), F(3, 4)),)
    assert default_comb(2).pairs == ((F(1, 2), F(3, 4)), (F(1, 3), F(7, 12)))
    cs = default_comb(40)
    for n, (q, b) in enumerate(cs.pairs, start=1):
        assert 0 < q < b <= 1 and b - q <= F(1, 2**n)


def test_farey_order_and_index():
    first = [q for _, q in zip(range(7), farey_letters())]
    assert first == [F(1, 2), F(1, 3), F(2, 3), F(1, 4), F(3, 4), F(1, 5), F(2, 5)]
    # brute oracle for the index: count reduced fractions with smaller denominator, then order
    seen = []
    for d in range(2, 12):
        seen += [F(n, d) for n in range(1, d) if F(n, d).denominator == d]
    for i, q in enumerate(seen, start=1):
        assert farey_index(q) == i


def test_comb_validation():
    with pytest.raises(ValueError):
        CombSystem(((F(1, 2), F(1, 2)),))
    with pytest.raises(ValueError):
        CombSystem(((F(1, 3), F(1)),))  # b - q = 2/3 > 1/2
    with pytest.raises(ValueError):
        CombSystem(((F(1, 3), F(2, 3)), (F(1, 3), F(1, 2))))


def test_admissibility_examples():
    assert is_admissible(SMALL, Word.of(1, 2))
    assert not is_admissible(SMALL, Word.of(2, 1))
    assert is_admissible(SMALL, Word())
    assert is_admissible(SMALL, Word(((1, 3),)))
    with pytest.raises(UnknownLetter):
        is_admissible(SMALL, Word.of(3))


def test_word_serialization():
    w = parse_word(SMALL, "1/3^2,1/2")
    assert w == Word(((1, 2), (2, 1)))
    assert word_to_str(SMALL, w) == "1/3^2,1/2^1"
    assert parse_word(SMALL, "") == Word()


def test_classification_examples():
    assert classify(SMALL, pt((1,), LetterTail(2))) == "II"
    assert classify(SMALL, pt((), RealTail(F(1, 2), irrational=True))) == "III"
    assert classify(SMALL, pt((), RealTail(F(5, 7)))) == "III"  # off the two-letter enumeration
    assert classify(SMALL, pt((), EndTail(1))) == "IV"
    assert classify(SMALL, pt((1,), InfiniteTail(F(1, 2), F(2, 3)))) == "I"
    assert classify(default_comb(3), pt((), RealTail(F(5, 7)))) == "II"  # every rational is a Farey letter
    with pytest.raises(InconsistentTail):
        classify(SMALL, pt((2,), LetterTail(1)))


def test_shift_examples():
    x = SymbolicPoint(Word(((1, 2),)), LetterTail(2))
    assert shift(x) == SymbolicPoint(Word(((1, 1),)), LetterTail(2))
    t = pt((), RealTail(F(3, 5)))
    assert shift(t) == t
    assert shift(pt((1, 2), EndTail(2))) == pt((2,), EndTail(2))
    inf = pt((), InfiniteTail(F(1, 2), F(3, 4)))
    assert shift(inf).tail.start == F(5, 8)


def test_sigma_examples():
    x = pt((), LetterTail(2))
    assert sigma_q(SMALL, F(1, 3), x) == pt((1,), LetterTail(2))
    with pytest.raises(NotInFollowerSet):
        sigma_q(SMALL, F(1, 2), pt((), LetterTail(1)))


def test_membership_examples():
    x = pt((1,), RealTail(F(3, 5)))
    assert in_cylinder(SMALL, Word.of(1), x)
    assert not in_follower(SMALL, Word.of(2), pt((), LetterTail(1)))
    for y in (x, pt((), LetterTail(2)), pt((), EndTail(1))):
        for a in (Word(), Word.of(1), Word.of(2)):
            assert in_C(SMALL, a, Word(), y) == in_follower(SMALL, a, y)


def test_letter_tail_absorbs_repeats():
    assert closed_word(Word.of(1, 2)) == pt((1,), LetterTail(2))
    assert pt((1, 1), LetterTail(1)) == pt((), LetterTail(1))


def test_enumerate_examples():
    assert enumerate_cylinders(SMALL, 2, 1) == [Word.of(1), Word.of(2)]
    two = enumerate_cylinders(SMALL, 2, 2)
    assert Word.of(1, 2) in two and Word.of(2, 1) not in two
    assert enumerate_cylinders(SMALL, 2, 0) == [Word()]


@pytest.mark.parametrize("N,D", [(2, 3), (3, 3), (4, 2)])
def test_enumerate_matches_brute_force(N, D):
    cs = default_comb(N)
    brute = set()
    for length in range(1, D + 1):
        for seq in product(range(1, N + 1), repeat=length):
            if is_admissible(cs, Word.of(*seq)):
                brute.add(seq)
    got = enumerate_cylinders(cs, N, D)
    assert [w.expand() for w in got] == sorted(brute)


def test_direction_examples():
    x = pt((), LetterTail(1))
    z = pt((1,), LetterTail(2))
    y = SymbolicPoint(Word.of(1, 2), RealTail(F(5, 8)))
    assert direction_to_cylinder(SMALL, pt((), RealTail(F(1, 5))), y, z) == Word.of(1)
    deeper = SymbolicPoint(Word.of(1, 2), RealTail(F(5, 8)))
    far = SymbolicPoint(Word(((1, 1), (2, 2))), RealTail(F(5, 8)))
    assert direction_to_cylinder(SMALL, pt((), RealTail(F(1, 5))), far, deeper) == Word.of(1, 2)
    with pytest.raises(NotInDirection):
        direction_to_cylinder(SMALL, z, y, x)


def test_point_json_roundtrip():
    for x in (pt((1,), LetterTail(2)), pt((), EndTail(2)), pt((1,), RealTail(F(3, 5), True)),
              pt((), InfiniteTail(F(1, 2), F(3, 4)))):
        assert point_from_dict(SMALL, point_to_dict(SMALL, x)) == x
    assert point_to_dict(SMALL, pt((1,), LetterTail(2))) == {
        "prefix": ["1/3^1"], "tail": {"kind": "letter", "value": "1/2"}}


COMB = default_comb(6)
words = st.lists(st.integers(1, 6), min_size=0, max_size=4).map(lambda s: Word.of(*s)).filter(
    lambda w: is_admissible(COMB, w))
tails = st.one_of(
    st.integers(1, 6).map(LetterTail),
    st.integers(1, 6).map(EndTail),
    st.fractions(F(1, 100), F(99, 100), max_denominator=100).map(lambda v: RealTail(v, True)),
)


@st.composite
def points(draw):
    w, t = draw(words), draw(tails)
    x = SymbolicPoint(w, t)
    try:
        classify(COMB, x)
    except InconsistentTail:
        from hypothesis import reject
        reject()
    return x


@given(points(), st.integers(1, 6))
def test_section_identity_and_type(x, q):
    if in_follower(COMB, Word.of(q), x):
        y = sigma_q(COMB, q, x)
        assert shift(y) == x
        assert classify(COMB, y) == classify(COMB, x)
    else:
        with pytest.raises(NotInFollowerSet):
            sigma_q(COMB, q, x)


@given(points())
def test_first_letter_partition(x):
    if not x.prefix:
        return
    hits = [q for q in range(1, 7) if in_cylinder(COMB, Word.of(q), x)]
    assert hits == [x.prefix.first]


@given(points(), words)
def test_refinement(x, w):
    if not w:
        return
    children = [w + Word.of(q) for q in range(1, 7) if is_admissible(COMB, w + Word.of(q))]
    deep = len(x.prefix) > len(w)
    if in_cylinder(COMB, w, x) and deep:
        assert sum(in_cylinder(COMB, c, x) for c in children) == 1
    for c in children:
        if in_cylinder(COMB, c, x):
            assert in_cylinder(COMB, w, x)
