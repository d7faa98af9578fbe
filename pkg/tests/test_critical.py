import math

import numpy as np
import pytest
from scipy.optimize import brentq

from mfperc import critical as cr
from mfperc.exact import exact_chi

F02 = cr.Family(1, 2, 0.2)


def _tail_brute(family, beta, n, kmax=700):
    d, L, a = family.d, family.L, family.alpha
    c = family.ball(1).c_J
    return math.fsum((L ** (d * k) - L ** (d * (k - 1))) * -math.expm1(-beta * c * L ** (-(d + a) * k))
                     for k in range(n + 1, kmax))


def test_linear_fit_identity_and_minimum_points():
    ns = np.arange(3, 9)
    fit = cr.linear_fit(ns, np.log(2.5 * 2.0 ** (0.2 * ns)))
    assert fit.slope == pytest.approx(0.2 * math.log(2), rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        cr.linear_fit([1, 2, 3], [1, 2, 3])


def test_phi_ball_beta_zero_and_n1_exact():
    assert cr.phi_ball(F02, 0.0, 3).value == 0.0
    beta = 1.0
    model = F02.ball(1)
    J = model.edges[2][0]
    expected = _tail_brute(F02, beta, 1) * (2 - math.exp(-beta * J))
    got = cr.phi_ball(F02, beta, 1)
    assert got.stderr == 0.0
    assert got.value == pytest.approx(expected, rel=1e-9)
    assert exact_chi(model, beta) == pytest.approx(2 - math.exp(-beta * J), rel=1e-14)


def test_phi_ball_monotone_in_beta():
    vals = [cr.phi_ball(F02, b, 2).value for b in (0.2, 0.5, 1.0, 1.5)]
    assert vals == sorted(vals)


def test_beta_1_matches_closed_form_root():
    J = F02.ball(1).edges[2][0]
    root = brentq(lambda b: _tail_brute(F02, b, 1) * (2 - math.exp(-b * J)) - 0.5, 1e-6, 10, xtol=1e-13)
    res = cr.beta_n_solve(F02, 1)
    assert res["beta_n"] == pytest.approx(root, abs=1e-6)


def test_beta_n_bracketing_failure_is_loud():
    with pytest.raises(RuntimeError):
        cr.beta_n_solve(F02, 1, bracket=(0.0, 1e-6), max_widen=0)


def test_beta_n_monotone_on_exact_levels():
    betas = [cr.beta_n_solve(F02, n)["beta_n"] for n in (1, 2, 3)]
    assert betas == sorted(betas)


def test_correlation_length_examples():
    table = {1: 0.5, 2: 0.8, 3: 1.0}
    assert cr.correlation_length(F02, 0.3, table) == 2.0
    assert cr.correlation_length(F02, 0.5, table) == 2.0
    assert cr.correlation_length(F02, 0.81, table) == 8.0
    assert cr.correlation_length(F02, 1.2, table) == math.inf
    xs = [cr.correlation_length(F02, b, table) for b in np.linspace(0, 1, 30)]
    assert xs == sorted(xs)
    with pytest.raises(ValueError):
        cr.correlation_length(F02, 0.1, {})


def test_correlation_length_trend_synthetic():
    bc, c = 1.3, 0.7
    table = {n: bc - c * 2.0 ** (-0.2 * n) for n in range(1, 9)}
    fit = cr.correlation_length_trend(F02, table, bc)
    assert fit.slope == pytest.approx(-1 / 0.2, rel=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.extra["mean_field_constant"] > 0


def test_beta_c_extrapolate_geometric():
    bc, r = 2.0, 0.6
    table = {n: bc - r**n for n in range(1, 9)}
    out = cr.beta_c_extrapolate(table)
    assert out["ratio"] == pytest.approx(r, rel=1e-10)
    assert out["beta_c"] == pytest.approx(bc, rel=1e-10)
    with pytest.raises(ValueError):
        cr.beta_c_extrapolate({1: 0.1, 2: 0.2})


def test_scaling_fit_chi_on_exact_levels():
    fit = cr.scaling_fit_chi(cr.Family(1, 2, 0.5), 2.0, range(1, 5))
    assert set(fit.extra["chi"]) == {1, 2, 3, 4}
    # levels up to the exact-oracle size carry no sampling error
    assert [fit.extra["stderr"][n] == 0.0 for n in (1, 2, 3, 4)] == [True, True, True, False]
    low = cr.scaling_fit_chi(cr.Family(1, 2, 0.5), 0.2, range(1, 5))
    assert low.slope < fit.slope


def test_nabla_regime_labels():
    fam = cr.Family(1, 2, 0.2)
    out = cr.nabla_growth_check(fam, 0.3, range(1, 5))
    assert out.extra["expected_regime"] == "bounded"
    assert out.extra["regime"] == "bounded"
    assert cr.nabla_growth_check(cr.Family(1, 2, 0.5), 0.3, range(1, 5)).extra["expected_regime"] == "exponential"
