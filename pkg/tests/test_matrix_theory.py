import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc import matrix_theory as mt
from mfperc.diagrams import diagram_A, diagram_B, nabla
from mfperc.exact import exact_two_point
from mfperc.lattice import build_hierarchical, build_torus_nn
from mfperc.percolation import make_rng

C4 = build_torus_nn(1, 4)
I2 = np.eye(2)


def test_is_psd_examples():
    c = mt.is_psd(np.eye(3))
    assert c.verdict == "pd" and c.min_eigenvalue == pytest.approx(1.0)
    c = mt.is_psd([[1, 2], [2, 1]])
    assert c.verdict == "not_psd" and c.min_eigenvalue == pytest.approx(-1.0)
    c = mt.is_psd(np.zeros((3, 3)))
    assert c.verdict == "psd" and c.min_eigenvalue == 0.0
    with pytest.raises(ValueError):
        mt.is_psd([[1, 2], [0, 1]])


def test_hadamard_examples():
    rng = make_rng(1)
    S = mt.random_psd(rng, 5)
    assert np.array_equal(mt.hadamard(S, np.eye(5)), np.diag(np.diag(S)))
    assert np.array_equal(mt.hadamard(np.ones((5, 5)), S), S)
    with pytest.raises(ValueError):
        mt.hadamard(S, np.eye(4))


def test_principal_sqrt():
    assert np.allclose(mt.principal_sqrt(np.eye(3)), np.eye(3))
    assert np.allclose(mt.principal_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    with pytest.raises(mt.NotPsdError):
        mt.principal_sqrt([[1, 2], [2, 1]])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 16))
def test_principal_sqrt_squares_back(seed, n):
    T = mt.random_psd(make_rng(seed), n)
    R = mt.principal_sqrt(T)
    assert np.allclose(R @ R, T, atol=1e-8 * (1 + np.linalg.norm(T)))
    assert mt.is_psd(R).psd


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 16))
def test_schur_random_pairs(seed, n):
    rng = make_rng(seed)
    assert mt.check_schur(mt.random_psd(rng, n), mt.random_psd(rng, n)).min_eigenvalue >= -1e-10


def test_schur_rank_one_identity():
    rng = make_rng(4)
    u, v = rng.standard_normal(6), rng.standard_normal(6)
    H = mt.hadamard(np.outer(u, u), np.outer(v, v))
    assert np.allclose(H, np.outer(u * v, u * v))
    assert np.linalg.matrix_rank(H, tol=1e-10) <= 1
    assert mt.check_schur(np.eye(3), np.eye(3)).verdict == "pd"
    with pytest.raises(mt.NotPsdError):
        mt.check_schur([[1, 2], [2, 1]], I2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 16))
def test_ando_commuting_pairs(seed, n):
    S, T = mt.commuting_psd_pair(make_rng(seed), n)
    assert mt.check_ando(S, T).min_eigenvalue >= -1e-9


def test_ando_equal_inputs_and_noncommuting():
    T = mt.random_psd(make_rng(2), 4)
    assert mt.check_ando(T, T).psd
    with pytest.raises(ValueError):
        mt.check_ando(np.diag([1.0, 2.0]), np.array([[1.0, 1.0], [1.0, 1.0]]))


def test_ando_power_hand_example():
    T = np.array([[2.0, 1.0], [1.0, 2.0]])
    T2, T3 = T @ T, T @ T @ T
    D = T * T3 - T2 * T2
    assert np.allclose(D, [[3, -3], [-3, 3]])
    assert np.allclose(np.linalg.eigvalsh(D), [0, 6])
    assert mt.check_ando_power(T).psd
    assert mt.check_ando_power(np.eye(4)).min_eigenvalue == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0, 2.0])
def test_ando_power_on_c4(beta):
    assert mt.check_ando_power(exact_two_point(C4, beta)).min_eigenvalue >= -1e-10


def test_block_equiv_examples():
    S = mt.random_psd(make_rng(3), 3)
    assert mt.check_block_equiv(S, np.eye(3), np.zeros((3, 3))) == (True, True)
    assert mt.check_block_equiv(I2, I2, I2) == (True, True)
    assert mt.check_block_equiv(I2, I2, 2 * I2) == (False, False)
    with pytest.raises(mt.NotPsdError):
        mt.check_block_equiv(I2, np.zeros((2, 2)), I2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8))
def test_block_equiv_agree_away_from_boundary(seed, n):
    rng = make_rng(seed)
    S, T = mt.random_psd(rng, n), mt.random_psd(rng, n) + 0.1 * np.eye(n)
    X = 0.5 * rng.standard_normal((n, n))
    m_block, m_schur = mt.block_margins(S, T, X)
    if min(abs(m_block), abs(m_schur)) > 1e-6:
        a, b = mt.check_block_equiv(S, T, X)
        assert a == b


def test_block_diff_examples():
    T = mt.random_psd(make_rng(5), 4)
    blk, diff = mt.check_block_diff(T, T)
    assert blk.psd and diff.psd
    blk, diff = mt.check_block_diff(np.eye(3), np.zeros((3, 3)))
    assert blk.psd and diff.verdict == "pd"


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 10))
def test_block_diff_implication(seed, n):
    rng = make_rng(seed)
    P, Q = mt.random_psd(rng, n), mt.random_psd(rng, n)
    # [[P+Q, P-Q], [P-Q, P+Q]] is psd; with S = (P+Q)/2 and T = (P-Q)/2 the difference S - T = Q
    blk, diff = mt.check_block_diff(0.5 * (P + Q), 0.5 * (P - Q))
    assert blk.psd and diff.psd


def test_tracial_checks_on_c4():
    T = exact_two_point(C4, 0.9)
    rep = mt.tracial_checks(T, T @ T, C4)
    assert rep["pass"] and rep["trace_identity"] == 1.0
    assert mt.normalized_trace(T @ T @ T) == pytest.approx(nabla(T), rel=1e-12)
    with pytest.raises(ValueError):
        mt.tracial_checks(np.diag([1.0, 2.0, 3.0, 4.0]), np.eye(4), C4)


def test_fejer_examples():
    assert mt.check_fejer(np.eye(4), np.eye(4), C4) == 1.0
    S = mt.invariant_psd(make_rng(0), C4)
    assert mt.check_fejer(S, np.zeros((4, 4)), C4) == 0.0


@pytest.mark.parametrize("model", [C4, build_hierarchical(1, 2, 3, 0.5)])
def test_fejer_reproduces_chain_step(model):
    T = exact_two_point(model, 0.8)
    T2, T3 = T @ T, T @ T @ T
    S = T * T3 - T2 * T2
    S = 0.5 * (S + S.T)
    val = mt.check_fejer(S, T2, model)
    assert val >= -1e-10
    assert val == pytest.approx(diagram_A(T) - diagram_B(T), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_fejer_random_invariant(seed):
    m = build_torus_nn(2, 3)
    rng = make_rng(seed)
    S, T = mt.invariant_psd(rng, m), mt.invariant_psd(rng, m)
    assert mt.is_invariant(S, m) and mt.check_fejer(S, T, m) >= -1e-10
