import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc import estimators as est
from mfperc.corpus import corpus
from mfperc.exact import (cluster_law, exact_chi, exact_chi_derivative, exact_Phi, exact_phi_dct,
                          exact_two_point)
from mfperc.inequalities import phi_lower_bound
from mfperc.lattice import boundary_tail_sum, build_dimer, build_hierarchical, build_torus_nn

C4 = build_torus_nn(1, 4)
H3 = build_hierarchical(1, 2, 3, 0.5)


def test_mc_estimate_rejects_tiny_samples():
    with pytest.raises(ValueError):
        est.McEstimate(0.0, 0.0, est.MIN_SAMPLES - 1, 0)
    assert est.McEstimate(1.0, 0.1, 100, 0).within(1.3)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=4, max_size=40), st.integers(1, 3))
def test_moments_pooling(xs, cut):
    x = np.array(xs)
    k = max(1, min(len(x) - 1, len(x) // (cut + 1)))
    whole = est.Moments.of(x)
    a, b, c = est.Moments.of(x[:k]), est.Moments.of(x[k:-1]), est.Moments.of(x[-1:])
    # pooling is exact, so merge order cannot matter
    assert est.Moments.pool([a, b, c]) == est.Moments.pool([c, a, b])
    parts = est.Moments.pool([a, b, c])
    assert parts.mean()[0] == pytest.approx(whole.mean()[0], abs=1e-12)
    assert whole.mean()[0] == pytest.approx(x.mean(), abs=1e-12)
    assert whole.stderr()[0] == pytest.approx(x.std(ddof=1) / math.sqrt(len(x)), abs=1e-12)


def test_beta_zero_is_deterministic():
    T = est.mc_two_point(C4, 0.0, 1000, 1)
    assert np.array_equal(T.values, np.eye(4)) and np.all(T.stderr == 0)
    chi = est.mc_chi(C4, 0.0, 1000, 1)
    assert chi.value == 1.0 and chi.stderr == 0.0
    tails = est.mc_tail(C4, 0.0, [1, 2, 3], 1000, 1)
    assert [t.value for t in tails] == [1.0, 0.0, 0.0]
    assert est.mc_phi_dct(C4, [0, 1], 0.0, 1000, 1).value == 0.0
    assert est.mc_Phi(C4, range(4), 1.0, 1000, 1).value == 0.0


def test_dimer_two_point():
    T = est.mc_two_point(build_dimer(1.0), 1.0, 100_000, 3)
    assert abs(T.values[0, 1] - (1 - math.exp(-1))) <= 4 * T.stderr[0, 1]


def test_c4_two_point_all_entries():
    T = est.mc_two_point(C4, 0.8, 100_000, 4)
    ex = exact_two_point(C4, 0.8)
    off = ~np.eye(4, dtype=bool)
    assert np.all(np.abs(T.values - ex)[off] <= 4 * T.stderr[off])


def test_raw_rows_agree_with_class_average():
    a = est.mc_two_point(C4, 0.8, 20_000, 4, raw=True)
    ex = exact_two_point(C4, 0.8)
    assert np.all(np.abs(a.values[0] - ex[0])[1:] <= 4 * a.stderr[0, 1:])


def test_hierarchical_chi_and_tails():
    chi = est.mc_chi(H3, 0.5, 100_000, 5)
    assert chi.within(exact_chi(H3, 0.5))
    law = cluster_law(H3, 0.5)
    for n, t in zip(range(1, 9), est.mc_tail(H3, 0.5, range(1, 9), 100_000, 5)):
        p = law.tail(n)
        se = max(t.stderr, math.sqrt(p * (1 - p) / t.n_samples))
        assert abs(t.value - p) <= 4 * se + 1e-12


def test_threads_do_not_change_estimates():
    a = est.mc_chi(H3, 0.7, 50_000, 9, threads=1)
    b = est.mc_chi(H3, 0.7, 50_000, 9, threads=3)
    assert a == b


def test_phi_dct_hierarchical_with_tail():
    S = [0, 1]
    beta = 1.0
    mc = est.mc_phi_dct(H3, S, beta, 100_000, 6)
    ext = np.zeros(H3.vertex_count)
    ext[S] = boundary_tail_sum(H3, beta, H3.n)
    assert mc.within(exact_phi_dct(H3, beta, S, exterior=ext))


def test_Phi_lemma_on_c6():
    m = build_torus_nn(1, 6)
    S, beta = [0, 1, 2], 0.6
    mc = est.mc_Phi(m, S, beta, 100_000, 7)
    assert mc.within(exact_Phi(m, beta, S))
    rhs = phi_lower_bound(exact_two_point(m, beta), exact_chi(m, beta), beta, S)
    assert mc.value >= rhs - 4 * mc.stderr


def test_chi_derivative_fd():
    d = est.chi_derivative_fd(build_dimer(1.0), 1.0, 0.01, 100_000, 8)
    assert d.within(math.exp(-1), extra=1e-4)
    c = est.chi_derivative_fd(C4, 0.5, 0.01, 100_000, 8)
    u = est.chi_derivative_fd(C4, 0.5, 0.01, 100_000, 8, coupled=False)
    assert c.within(exact_chi_derivative(C4, 0.5), extra=1e-4)
    assert c.stderr < u.stderr
    with pytest.raises(ValueError):
        est.chi_derivative_fd(C4, 0.005, 0.01, 1000)


def test_adaptive_stops_on_target():
    out = est.adaptive(lambda n: est.mc_chi(C4, 0.5, n, 1), 0.01, n0=500, n_max=64_000)
    assert out.stderr < 0.01 or out.n_samples == 64_000


@pytest.mark.parametrize("name", [e.name for e in corpus() if e.model.vertex_count <= 9])
def test_corpus_two_point_regression(name):
    m = corpus([name])[0].model
    T = est.mc_two_point(m, 0.9, 20_000, 11)
    ex = exact_two_point(m, 0.9)
    off = T.stderr > 0
    assert np.all(np.abs(T.values - ex)[off] <= 4.5 * T.stderr[off])
