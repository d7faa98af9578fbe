import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfperc.lattice import (
    HierarchicalCoord,
    VertexCapError,
    boundary_tail_sum,
    build_dimer,
    build_hierarchical,
    build_model,
    build_torus_longrange,
    build_torus_nn,
    decode_coord,
    encode_coord,
    hierarchical_normalization,
    shell_size,
    ultrametric_distance,
)


def test_cycle_c4_edges():
    m = build_torus_nn(1, 4)
    u, v, J = m.edges
    assert m.vertex_count == 4 and m.edge_count == 4
    assert np.allclose(J, 0.5)
    assert list(zip(u.tolist(), v.tolist())) == [(0, 1), (0, 3), (1, 2), (2, 3)]


def test_torus_3x3_weight_sum():
    m = build_torus_nn(2, 3)
    assert m.vertex_count == 9
    assert m.offset_weights.sum() == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize("d,side", [(1, 2), (0, 4)])
def test_torus_rejects_bad_params(d, side):
    with pytest.raises(ValueError):
        build_torus_nn(d, side)


def test_hierarchical_two_level_distances():
    m = build_hierarchical(1, 2, 2, 0.5)
    assert m.vertex_count == 4
    dists = {ultrametric_distance(decode_coord(0, 1, 2, 2), decode_coord(i, 1, 2, 2)) for i in range(1, 4)}
    assert dists == {2.0, 4.0}


def test_hierarchical_normalization_matches_shell_sum():
    d, L, a = 1, 2, 0.5
    c = hierarchical_normalization(d, L, a)
    shells = math.fsum((L ** (d * k) - L ** (d * (k - 1))) * L ** (-(d + a) * k) for k in range(1, 400))
    assert c == pytest.approx(1.0 / shells, rel=1e-13)
    assert c == pytest.approx((1 - L**-a) / ((1 - L**-d) * L**-a), rel=1e-15)


def test_single_edge_ball():
    m = build_hierarchical(1, 2, 1, 0.5)
    assert m.vertex_count == 2 and m.edge_count == 1
    assert m.edges[2][0] == pytest.approx(m.c_J * 2**-1.5, rel=1e-15)


@pytest.mark.parametrize("d,L,a", [(1, 2, 0.2), (1, 3, 0.5), (2, 2, 1.3)])
def test_infinite_lattice_normalization(d, L, a):
    m = build_hierarchical(d, L, 1, a)
    assert m.weight_total_check == pytest.approx(1.0, abs=1e-12)


def test_hierarchical_rejects_bad_alpha_and_cap():
    with pytest.raises(ValueError):
        build_hierarchical(1, 2, 3, 1.0)
    with pytest.raises(VertexCapError):
        build_hierarchical(1, 2, 20, 0.5)
    with pytest.raises(VertexCapError):
        build_hierarchical(1, 2, 6, 0.5, vertex_cap=32)


def test_ultrametric_examples():
    x = HierarchicalCoord(((0,), (0,), (0,)), 2)
    assert ultrametric_distance(x, x) == 0.0
    y = HierarchicalCoord(((1,), (0,), (0,)), 2)
    assert ultrametric_distance(x, y) == 2.0
    a = HierarchicalCoord(((0,), (0,)), 3)
    b = HierarchicalCoord(((1,), (2,)), 3)
    assert ultrametric_distance(a, b) == 9.0
    with pytest.raises(ValueError):
        ultrametric_distance(x, a)


def test_ultrametric_inequality_exhaustive():
    d, L, n = 1, 2, 4
    coords = [decode_coord(i, d, L, n) for i in range(L ** (d * n))]
    for x, y, z in itertools.product(coords, repeat=3):
        assert ultrametric_distance(x, z) <= max(ultrametric_distance(x, y), ultrametric_distance(y, z))


@given(st.integers(0, 3**4 - 1), st.integers(0, 3**4 - 1))
def test_coord_codec_and_group_law(i, j):
    m = build_hierarchical(2, 3, 2, 0.7)
    x, y = decode_coord(i, 2, 3, 2), decode_coord(j, 2, 3, 2)
    assert encode_coord(x) == i
    assert encode_coord(x + y) == int(m.add(i, j))


def test_shell_counts():
    for d, L, n in [(1, 2, 5), (2, 2, 3), (1, 3, 4), (2, 3, 2)]:
        assert sum(shell_size(d, L, k) for k in range(1, n + 1)) + 1 == L ** (d * n)


@pytest.mark.parametrize("model", [build_torus_nn(2, 4), build_torus_longrange(1, 5, 1.0),
                                   build_hierarchical(1, 2, 3, 0.5), build_hierarchical(2, 2, 2, 0.5)])
def test_translation_invariance_and_symmetry(model):
    N = model.vertex_count
    idx = np.arange(N)
    W = model.offset_weights[model.difference_table]
    assert np.array_equal(W, W.T)
    for g in range(N):
        shifted = model.translation_table[g]
        assert np.array_equal(W[np.ix_(shifted, shifted)], W)
    assert np.all(model.offset_weights[model.sub(0, idx)] == model.offset_weights)


def test_longrange_torus_normalized_over_torus():
    m = build_torus_longrange(1, 5, 1.0)
    assert m.offset_weights.sum() == pytest.approx(1.0, abs=1e-15)
    assert m.offset_weights[1] == m.offset_weights[4]


def test_boundary_tail_sum_basic():
    m = build_hierarchical(1, 2, 3, 0.5)
    assert boundary_tail_sum(m, 0.0) == 0.0
    assert boundary_tail_sum(m, 0.5) < boundary_tail_sum(m, 0.6)
    with pytest.raises(ValueError):
        boundary_tail_sum(build_torus_nn(1, 4), 1.0)


def test_boundary_tail_sum_long_truncation():
    # brute-force shell sum, far beyond the truncation rule
    m = build_hierarchical(1, 2, 3, 0.5)
    c, beta = m.c_J, 1.0
    brute = math.fsum(2.0 ** (k - 1) * -math.expm1(-beta * c * 2.0 ** (-1.5 * k)) for k in range(4, 400))
    assert boundary_tail_sum(m, 1.0, 3) == pytest.approx(brute, rel=1e-10)


@settings(max_examples=30)
@given(st.floats(0.01, 3.0), st.integers(0, 6))
def test_boundary_tail_monotone(beta, n):
    m = build_hierarchical(1, 2, 2, 0.5)
    assert boundary_tail_sum(m, beta, n) < boundary_tail_sum(m, beta * 1.01, n)
    assert boundary_tail_sum(m, beta, n + 1) < boundary_tail_sum(m, beta, n)


def test_dimer_and_build_model():
    m = build_dimer(2.0)
    assert m.edge_count == 1 and m.edges[2][0] == 2.0
    h = build_model("hierarchical", d=1, L=2, n=2, alpha=0.5)
    assert h.vertex_count == 4
    with pytest.raises(ValueError):
        build_model("mystery")
