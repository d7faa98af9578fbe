import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc import inequalities as iq
from mfperc.corpus import corpus
from mfperc.exact import exact_two_point
from mfperc.lattice import build_dimer, build_torus_nn

C4 = build_torus_nn(1, 4)
SMALL = [e.name for e in corpus() if e.model.vertex_count <= iq.TREE_GRAPH_MAX_VERTICES]


def test_differential_bounds_dimer_closed_form():
    beta = 0.7
    q = math.exp(-beta)
    p = 1 - q
    r = iq.differential_bounds(build_dimer(1.0), beta)
    assert r.chi == pytest.approx(2 - q) and r.nabla == pytest.approx(1 + 3 * p * p)
    assert r.chi_derivative == pytest.approx(q)
    gap = (2 - q) - (1 + 3 * p * p)
    assert r.derived_nabla == pytest.approx(max(gap, 0) ** 2 / (3 * beta**2 * r.nabla**2))
    with pytest.raises(ValueError):
        iq.differential_bounds(C4, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([e.name for e in corpus()]), st.floats(0.05, 3.0))
def test_derived_bounds_hold(name, beta):
    r = iq.differential_bounds(corpus([name])[0].model, beta)
    assert r.holds("derived_ab") and r.holds("derived_nabla")
    # the triangle form is the weaker of the two
    assert r.derived_nabla <= r.derived_ab * (1 + 1e-12) + 1e-15


def test_stated_bound_exceeds_derivative_at_small_beta():
    # chi (chi - nabla) / beta^2 stays of order 1/beta as beta -> 0 while d chi / d beta stays bounded
    r = iq.differential_bounds(C4, 0.2)
    assert not r.holds("stated_ab")
    assert r.holds("derived_ab")


@pytest.mark.parametrize("name", SMALL)
@pytest.mark.parametrize("beta", [0.3, 1.0, 2.5])
def test_tree_graph_bounds(name, beta):
    assert iq.tree_graph(corpus([name])[0].model, beta).holds()


def test_tree_graph_bounds_on_identity():
    three, four = iq.tree_graph_bounds(np.eye(3))
    assert three[0, 0] == 1.0 and three[1, 1] == 0.0
    assert four[0, 0, 0] == 3.0


def test_phi_lower_bound_singleton():
    T = exact_two_point(C4, 0.5)
    chi = T[0].sum()
    # S = {o}: (chi - 1)^2 / (beta^2 chi)
    assert iq.phi_lower_bound(T, chi, 0.5, [0]) == pytest.approx((chi - 1) ** 2 / (0.25 * chi))


@pytest.mark.parametrize("name", [e.name for e in corpus() if e.model.vertex_count <= iq.PHI_LEMMA_MAX_VERTICES])
def test_phi_lemma(name):
    m = corpus([name])[0].model
    rep = iq.phi_lemma(m, 0.8)
    assert rep.holds and rep.n_sets == 2 ** (m.vertex_count - 1)


def test_integrated_identity_and_bound():
    for b in iq.integrated_bound_check_all(C4, [0.2, 0.5, 1.0, 1.5]):
        assert b.identity_holds and b.holds
    with pytest.raises(ValueError):
        iq.integrated_bound(C4, 1.0, 0.5)
