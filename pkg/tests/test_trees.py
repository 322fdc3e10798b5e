from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berkline.padic import PrimeContext
from berkline.points import big_metric, disk, gauss_point, leq
from berkline.trees import (
    DiskOutsideUnit,
    DimensionMismatch,
    EmptyInput,
    NotLeafExtension,
    RealLambda,
    analytic_spectrum,
    assemble_triple,
    build_graph_of_discs,
    check_even_triple,
    check_morphism,
    commutator_norm,
    eigenvalues,
    lipschitz_constant,
    operator_norm,
    rep_apply,
    retract,
    spectral_radius,
    spectrum_table,
    tower_resolvent_profile,
    tree_inclusion,
)


def tree(p, *disks):
    return build_graph_of_discs(PrimeContext(p), list(disks))


def dense_dirac_oracle(t):
    """Rebuild D from the edge list alone: one 2x2 swap block per ordered edge."""
    blocks = []
    for e in t.edges:
        w = 1.0 / float(e.length)
        blocks += [w, w]
    n = 2 * len(blocks)
    m = np.zeros((n, n))
    for k, w in enumerate(blocks):
        m[2 * k, 2 * k + 1] = m[2 * k + 1, 2 * k] = w
    return np.linalg.eigvalsh(m)


@st.composite
def disk_lists(draw, max_disks=6):
    p = draw(st.sampled_from([2, 3, 5]))
    out = []
    for _ in range(draw(st.integers(1, max_disks))):
        e = draw(st.integers(1, 4))
        out.append((draw(st.integers(0, p**e - 1)), e))
    return p, out


def test_build_examples():
    t = tree(3, (0, 1))
    assert len(t.vertices) == 2 and [e.length for e in t.edges] == [1]
    star = tree(3, (0, 1), (1, 1))
    assert len(star.vertices) == 3 and sorted(e.length for e in star.edges) == [1, 1]
    assert star.root == gauss_point(3)
    path = tree(3, (0, 1), (0, 2))
    assert len(path.vertices) == 3 and [e.length for e in path.edges] == [1, 1]
    assert path.leaves() == [2]


def test_build_errors():
    with pytest.raises(EmptyInput):
        tree(3)
    with pytest.raises(DiskOutsideUnit):
        tree(3, (0, 0))
    with pytest.raises(DiskOutsideUnit):
        tree(3, (Fraction(1, 3), 2))


def test_retract_examples():
    t = tree(5, (0, 1))
    assert retract(t, disk(5, 0, 2)) == disk(5, 0, 1)
    assert retract(t, disk(5, 1, 1)) == gauss_point(5)
    for v in t.vertices:
        assert retract(t, v) == v


def test_single_edge_spectra():
    st1 = assemble_triple(tree(3, (0, 1)))
    assert np.allclose(eigenvalues(st1), [-1, -1, 1, 1])
    st2 = assemble_triple(tree(2, (0, 1), (1, 1)))
    assert spectrum_table(st2) == [(-1.0, 4), (1.0, 4)]
    # an irrational-free half-length edge: exponent 1/2 on a type II point
    half = build_graph_of_discs(PrimeContext(3), [(0, Fraction(1, 2))])
    assert np.allclose(eigenvalues(assemble_triple(half)), [-2, -2, 2, 2])
    assert operator_norm(assemble_triple(half)) == 2


def test_operator_norm_examples():
    assert operator_norm(assemble_triple(tree(3, (0, 1)))) == 1
    assert operator_norm(assemble_triple(tree(3, (0, 2)))) == Fraction(1, 2)
    mixed = build_graph_of_discs(PrimeContext(3), [(0, 1), (1, Fraction(1, 2))])
    assert operator_norm(assemble_triple(mixed)) == 2


def test_rep_apply_leaf_indicator():
    t = tree(3, (0, 1))
    st_ = assemble_triple(t)
    leaf = t.vertices[1]
    f = {t.vertices[0]: 0, leaf: 1}
    assert [(s.vertex, s.neighbor, s.spin) for s in st_.basis] == [(0, 1, 1), (0, 1, -1), (1, 0, 1), (1, 0, -1)]
    assert rep_apply(st_, f, [1, 1, 1, 1]) == [1, 0, 0, 1]
    with pytest.raises(DimensionMismatch):
        rep_apply(st_, f, [1, 1])


def test_commutator_examples():
    st1 = assemble_triple(tree(3, (0, 1)))
    assert commutator_norm(st1, [0, 1]) == 1
    assert commutator_norm(st1, [5, 5]) == 0
    half = assemble_triple(build_graph_of_discs(PrimeContext(3), [(0, Fraction(1, 2))]))
    assert commutator_norm(half, [0, 1]) == 2


def test_commutator_norm_matches_dense_operator_norm():
    t = tree(3, (0, 2), (1, 1), (4, 2))
    st_ = assemble_triple(t)
    f = [Fraction(k * k, 3) for k in range(len(t.vertices))]
    d = st_.dirac.to_dense(float)
    pi = np.diag([float(x) for x in rep_apply(st_, f, [1] * st_.dimension)])
    assert abs(np.linalg.norm(d @ pi - pi @ d, 2) - float(commutator_norm(st_, f))) < 1e-12


def test_morphism_examples():
    src = tree(3, (0, 1))
    star = tree(3, (0, 1), (1, 1))
    m = tree_inclusion(src, star)
    assert m.is_leaf_extension
    assert set(check_morphism(m, [2, 7]).values()) == {0}
    ident = tree_inclusion(src, src)
    assert set(check_morphism(ident, [1, 3]).values()) == {0}
    longer = tree(3, (0, 1), (0, 2))
    assert set(check_morphism(tree_inclusion(src, longer), [4, -1]).values()) == {0}


def test_subdivision_is_rejected():
    src = tree(3, (0, 2))
    sub = tree(3, (0, 2), (3, 2))  # adds the branch point at radius p^-1
    m = tree_inclusion(src, sub)
    assert not m.is_leaf_extension
    with pytest.raises(NotLeafExtension):
        check_morphism(m, [0, 1])


def test_tower_profile():
    a = tree(3, (0, 1))
    b = tree(3, (0, 1), (1, 1))
    c = tree(3, (0, 1), (1, 1), (2, 1))
    prof = tower_resolvent_profile([a, b, c], 1j)
    assert prof == pytest.approx([1 / abs(1 - 1j)] * 2, abs=1e-15)
    assert tower_resolvent_profile([a], 2j) == []
    with pytest.raises(RealLambda):
        tower_resolvent_profile([a, b], 1.0)
    h1 = build_graph_of_discs(PrimeContext(3), [(0, 1)])
    h2 = build_graph_of_discs(PrimeContext(3), [(0, 1), (1, Fraction(1, 2))])
    h4 = build_graph_of_discs(PrimeContext(3), [(0, 1), (1, Fraction(1, 2)), (2, Fraction(1, 4))])
    prof = tower_resolvent_profile([h1, h2, h4], 1j)
    assert prof == pytest.approx([max(1 / abs(2 - 1j), 1 / abs(4 - 1j)), 1 / abs(4 - 1j)])


@given(disk_lists())
@settings(max_examples=40, deadline=None)
def test_spectrum_matches_block_oracle(data):
    p, disks = data
    t = build_graph_of_discs(PrimeContext(p), disks)
    st_ = assemble_triple(t)
    assert st_.dimension == 4 * len(t.edges)
    ev = eigenvalues(st_)
    assert np.allclose(ev, dense_dirac_oracle(t), atol=1e-9)
    assert np.allclose(ev, [float(x) for x in analytic_spectrum(st_)], atol=1e-9)
    assert abs(spectral_radius(st_) - float(operator_norm(st_))) < 1e-9
    assert np.allclose(ev, -ev[::-1], atol=1e-12)


@given(disk_lists(), st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_triple_axioms_and_lipschitz(data, rnd):
    p, disks = data
    t = build_graph_of_discs(PrimeContext(p), disks)
    st_ = assemble_triple(t)
    fs = [[Fraction(rnd.randint(-9, 9), rnd.randint(1, 4)) for _ in t.vertices] for _ in range(3)]
    assert set(check_even_triple(st_, fs).values()) == {0}
    for f in fs:
        assert commutator_norm(st_, f) <= lipschitz_constant(t, f)


@given(disk_lists(), st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_retraction_is_contraction(data, rnd):
    p, disks = data
    t = build_graph_of_discs(PrimeContext(p), disks)
    x = disk(p, rnd.randint(0, p**4), rnd.randint(-2, 5))
    y = disk(p, rnd.randint(0, p**4), rnd.randint(-2, 5))
    rx, ry = retract(t, x), retract(t, y)
    for r in (rx, ry):
        assert leq(r, t.root) and any(leq(v, r) for v in t.vertices)
        assert retract(t, r) == r
    assert big_metric(rx, ry) <= big_metric(x, y)


def test_faithfulness_proxy():
    t = tree(5, (0, 1), (1, 2))
    st_ = assemble_triple(t)
    ones = [1] * st_.dimension
    assert set(rep_apply(st_, [0] * len(t.vertices), ones)) == {0}
    f = [0] * len(t.vertices)
    f[-1] = 3
    assert any(rep_apply(st_, f, ones))


def test_multiplicity_inflates_dimension():
    t = tree(3, (0, 1), (1, 2))
    st3 = assemble_triple(t, multiplicity=3)
    assert st3.dimension == 3 * 4 * len(t.edges)
    assert spectrum_table(st3)[0][1] == 3 * 2 * sum(1 for e in t.edges if e.length == min(x.length for x in t.edges))
