import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc import exact
from mfperc.corpus import corpus
from mfperc.lattice import build_dimer, build_hierarchical, build_torus_nn
from mfperc.percolation import BondConfiguration, clusters

C3 = build_torus_nn(1, 3)
C4 = build_torus_nn(1, 4)
DIMER = build_dimer(1.0)


def test_beta_zero_identity():
    for e in corpus():
        assert np.array_equal(exact.exact_two_point(e.model, 0.0), np.eye(e.model.vertex_count))
        assert exact.exact_size_distribution(e.model, 0.0) == {1: 1.0}


@pytest.mark.parametrize("J,beta", [(1.0, 0.3), (2.5, 1.1)])
def test_dimer_closed_forms(J, beta):
    m = build_dimer(J)
    p = -math.expm1(-beta * J)
    rep = exact.exact_report(m, beta)
    assert rep.two_point[0, 1] == pytest.approx(p, rel=1e-14)
    assert rep.chi == pytest.approx(2 - math.exp(-beta * J), rel=1e-14)
    assert rep.chi_derivative == pytest.approx(J * math.exp(-beta * J), rel=1e-12)
    assert rep.min_eigenvalue == pytest.approx(math.exp(-beta * J), rel=1e-12)


def test_dimer_derivative_at_zero():
    assert exact.exact_chi_derivative(build_dimer(1.7), 0.0) == pytest.approx(1.7, rel=1e-14)


def test_triangle_closed_form():
    beta = 0.8
    p = -math.expm1(-beta / 2)
    assert exact.exact_two_point(C3, beta)[0, 1] == pytest.approx(p + p * p * (1 - p), rel=1e-13)


def test_derivative_matches_finite_difference():
    h = 1e-5
    fd = (exact.exact_chi(C4, 0.5 + h) - exact.exact_chi(C4, 0.5 - h)) / (2 * h)
    assert exact.exact_chi_derivative(C4, 0.5) == pytest.approx(fd, rel=1e-7)


def test_size_distribution_large_beta_and_mean():
    m = build_torus_nn(2, 3)
    dist = exact.exact_size_distribution(m, 50.0)
    assert dist[9] == pytest.approx(1.0, abs=1e-12)
    for e in corpus():
        rep = exact.exact_report(e.model, 0.8)
        assert math.fsum(rep.size_distribution.values()) == pytest.approx(1.0, abs=1e-12)
        assert math.fsum(k * p for k, p in rep.size_distribution.items()) == pytest.approx(rep.chi, abs=1e-12)
        assert np.all(np.diag(rep.two_point) == 1.0)
        assert rep.two_point.min() >= 0 and rep.two_point.max() <= 1


def _brute_two_point(model, beta):
    u, v, J = model.edges
    p = -np.expm1(-beta * J)
    N = model.vertex_count
    T = np.zeros((N, N))
    for bits in itertools.product([False, True], repeat=model.edge_count):
        b = np.array(bits)
        w = float(np.prod(np.where(b, p, 1 - p)))
        cp = clusters(BondConfiguration(model, b, beta))
        lab = cp.labels()
        T += w * (lab[:, None] == lab[None, :])
    return T


@pytest.mark.parametrize("name", ["C4", "H(1,2,2)", "LR-C4"])
def test_enumeration_matches_union_find_brute_force(name):
    m = corpus([name])[0].model
    assert np.allclose(exact.exact_two_point(m, 0.7), _brute_two_point(m, 0.7), atol=1e-13, rtol=0)


@pytest.mark.parametrize("name", ["C4", "C6", "H(1,2,2)", "H(2,2,1)", "LR-C5"])
def test_two_engines_agree(name):
    m = corpus([name])[0].model
    a = exact.cluster_law(m, 0.9, method="enumerate")
    b = exact.cluster_law(m, 0.9, method="subsets")
    assert np.allclose(a.connection(), b.connection(), atol=1e-13)
    assert a.mean_size_derivative() == pytest.approx(b.mean_size_derivative(), rel=1e-11)


def test_caps():
    big = build_hierarchical(1, 2, 4, 0.5)
    with pytest.raises(exact.OracleCapError):
        exact.exact_two_point(big, 0.5)


def test_entrywise_monotone_in_beta():
    for e in corpus():
        prev = None
        for b in (0.1, 0.4, 0.9, 1.5):
            T = exact.exact_two_point(e.model, b)
            if prev is not None:
                assert np.all(T >= prev - 1e-15)
            prev = T


def test_psd_bound_examples():
    cert, bound = exact.verify_psd_bound(C4, 0.0)
    assert cert.min_eigenvalue == pytest.approx(1.0) and bound == 1.0
    cert, bound = exact.verify_psd_bound(DIMER, 0.6)
    assert cert.min_eigenvalue == pytest.approx(bound, abs=1e-12)
    cert, bound = exact.verify_psd_bound(C4, 1.0)
    assert cert.min_eigenvalue >= math.exp(-1) - 1e-10


@settings(max_examples=20, deadline=None)
@given(st.sampled_from([e.name for e in corpus()]), st.floats(0.05, 2.0))
def test_psd_bound_holds_on_corpus(name, beta):
    cert, bound = exact.verify_psd_bound(corpus([name])[0].model, beta)
    assert cert.min_eigenvalue >= bound - 1e-10


def test_phi_dct_singleton_is_analytic():
    m = build_torus_nn(1, 6)
    beta = 0.7
    J = m.offset_weights
    assert exact.exact_phi_dct(m, beta, [0]) == pytest.approx(float((-np.expm1(-beta * J)).sum()), rel=1e-14)


def test_Phi_trivial_cases():
    # at beta = 0 only the boundary endpoints themselves are reached
    assert exact.exact_Phi(C4, 0.0, [0]) == pytest.approx(1.0, rel=1e-15)
    assert exact.exact_Phi(C4, 0.0, [0, 1]) == pytest.approx(1.0, rel=1e-15)
    assert exact.exact_Phi(C4, 1.0, range(4)) == 0.0


def test_Phi_dimer_closed_form():
    # S = {0}: the only boundary edge leads to vertex 1, which is trivially connected to itself
    assert exact.exact_Phi(DIMER, 0.8, [0]) == pytest.approx(1.0, rel=1e-15)


def test_three_and_four_point_diagonals():
    law = exact.cluster_law(C4, 0.6)
    T = exact.exact_two_point(C4, 0.6)
    assert np.allclose(np.diag(law.three_point()), T[0])
    assert np.allclose(law.four_point()[0, 0], T[0])
