import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc import entropy as en
from mfperc.corpus import corpus
from mfperc.exact import cluster_law, configuration_probabilities
from mfperc.lattice import build_hierarchical, build_torus_nn
from mfperc.percolation import BondConfiguration, make_rng

C4 = build_torus_nn(1, 4)
H3 = build_hierarchical(1, 2, 3, 0.5)


def test_bernoulli_kl_values():
    assert en.bernoulli_kl(0.3, 0.3) == 0.0
    assert en.bernoulli_kl(math.exp(-1), math.exp(-2)) == pytest.approx(0.16990, abs=1e-4)
    assert en.bernoulli_kl(0.1, 0.5) != pytest.approx(en.bernoulli_kl(0.5, 0.1))
    with pytest.raises(ValueError):
        en.bernoulli_kl(0.0, 0.5)


def test_kl_exp_bound_examples():
    assert en.kl_exp_bound_check(1.3, 1.3) == (0.0, 0.0)
    kl, bound = en.kl_exp_bound_check(1.0, 2.0)
    assert kl == pytest.approx(0.1699, abs=1e-4) and bound == 0.5
    kl, bound = en.kl_exp_bound_check(0.01, 0.02)
    assert kl <= 0.005 and bound == pytest.approx(0.005)


@settings(max_examples=200)
@given(st.floats(-3, 1), st.floats(-3, 1))
def test_kl_exp_bound_on_log_grid(la, lb):
    a, b = 10.0**la, 10.0**lb
    kl, bound = en.kl_exp_bound_check(a, b)
    assert 0 <= kl <= bound * (1 + 1e-12) + 1e-15
    assert kl == pytest.approx(en.bernoulli_kl(math.exp(-a), math.exp(-b)), rel=1e-9, abs=1e-15)


def test_pinsker_basic_and_errors():
    assert en.pinsker_check(0.4, 0.4, 0.0)
    assert not en.pinsker_check(0.4, 0.5, 0.0)
    with pytest.raises(ValueError):
        en.pinsker_check(1.2, 0.5, 0.1)


def test_pinsker_on_c4_exact():
    b1, b2, n = 0.4, 0.6, 3
    D, D_edges = en.percolation_kl(C4, b1, b2)
    assert D == pytest.approx(D_edges, rel=1e-12)
    sizes = en.configuration_cluster_sizes(C4)
    mu, nu = (math.fsum(configuration_probabilities(C4, b)[sizes >= n].tolist()) for b in (b1, b2))
    assert mu == pytest.approx(cluster_law(C4, b1).tail(n), abs=1e-14)
    assert en.pinsker_check(mu, nu, D)


def test_explore_beta_zero_queries_origin_edges():
    res, ledger = en.explore_cluster(C4, 0.0, 3, make_rng(0))
    assert res.found == 1 and not res.reached
    u, v, _ = C4.edges
    assert set(res.queried) == {e for e in range(4) if 0 in (u[e], v[e])}
    assert ledger.weighted_sum == pytest.approx(1.0)


def test_explore_all_open_stops_early():
    cfg = BondConfiguration(C4, np.ones(4, dtype=bool), 1.0)
    res, _ = en.explore_cluster(C4, 1.0, 2, None, config=cfg)
    assert res.reached and len(res.queried) == 1
    assert en.explore(en.adjacency(C4), lambda e: True, 1).queried == ()


@pytest.mark.parametrize("name", ["C4", "C6", "LR-C5", "H(1,2,2)", "torus3x3"])
def test_tree_verdict_exhaustive(name):
    m = corpus([name])[0].model
    assert en.exhaustive_tree_check(m, range(1, m.vertex_count + 1), edge_cap=18) == 0


def test_exact_revealment_matches_sampling_and_bound():
    beta, n = 0.5, 4
    rev, reached = en.exact_revealment(H3, beta, n)
    law = cluster_law(H3, beta)
    assert reached == pytest.approx(law.tail(n), abs=1e-13)
    J = H3.edges[2]
    assert rev @ J <= math.fsum(law.tail(k) for k in range(1, n + 1)) + 1e-12
    ledger, p, s = en.mc_revealment(H3, beta, n, 20_000, 3, check_verdict=True)
    assert np.all(np.abs(ledger.frequencies - rev) <= 4 * np.sqrt(rev * (1 - rev) / 20_000) + 1e-12)
    assert abs(p - reached) <= 4 * s + 1e-12


def test_revealment_bound_sampled_h3():
    beta = 0.5
    law = cluster_law(H3, beta)
    for n in (2, 4, 8):
        ledger, _, _ = en.mc_revealment(H3, beta, n, 100_000, 5, stream=n)
        bound = math.fsum(law.tail(k) for k in range(1, n + 1))
        assert ledger.weighted_sum <= bound + 4 * ledger.weighted_stderr


def test_revealment_monotone_in_target():
    prev = None
    for n in range(1, 9):
        rev, _ = en.exact_revealment(H3, 0.7, n)
        if prev is not None:
            assert np.all(rev >= prev - 1e-15)
        prev = rev


def test_dewan_muirhead_exact_c4():
    rep = en.dewan_muirhead_check(C4, 0.4, 0.8, 3)
    assert rep.exact and rep.holds and rep.lhs <= rep.rhs
    same = en.dewan_muirhead_check(C4, 0.6, 0.6, 3)
    assert same.lhs == 0.0 and same.holds


def test_dewan_muirhead_mc_hierarchical():
    m = build_hierarchical(1, 2, 4, 0.5)
    rep = en.dewan_muirhead_check(m, 0.3, 0.5, 5, budget=50_000, seed=2)
    assert rep.holds and not rep.exact


def test_dm_chi_bounds_c4():
    r = en.dm_chi_bounds_exact(C4, 0.5, 0.7, 3)
    assert r.lhs <= r.bound1 <= r.bound2
    one = en.dm_chi_bounds_exact(C4, 0.5, 0.7, 1)
    assert one.lhs == pytest.approx(1.0, abs=1e-14) and one.bound2 >= 2.0
    zero = en.dm_chi_bounds_exact(C4, 0.5, 0.7, 0)
    assert zero.skipped_bound2
    eq = en.dm_chi_bounds_exact(C4, 0.5, 0.5, 3)
    assert eq.lhs <= eq.bound1
    with pytest.raises(ValueError):
        en.dm_chi_bounds_exact(C4, 0.7, 0.5, 3)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["C4", "C6", "H(1,2,2)", "H(1,2,3)", "LR-C5"]), st.floats(0.05, 1.5),
       st.floats(0.0, 1.5), st.integers(1, 6))
def test_tail_comparison_holds(name, b1, db, n):
    m = corpus([name])[0].model
    r = en.dm_chi_bounds_exact(m, b1, b1 + db, n)
    assert r.lhs <= r.bound1 + 1e-12 and r.bound1 <= r.bound2 + 1e-12
