"""Exact percolation functionals on tiny models.

Two independent engines produce the law of the cluster of a root vertex,
optionally restricted to the edges inside a vertex region:

``enumerate``
    sums over all ``2**m`` edge configurations (``m <= EDGE_CAP``), with
    vectorised label propagation per chunk of configurations;
``subsets``
    the connected-set recursion
    ``conn(C) = 1 - sum_{D < C, D contains min C} conn(D) exp(-beta W(D, C \\ D))``
    over vertex subsets (``N <= SUBSET_CAP``), used when the edge count is
    above the enumeration cap.

Every quantity is also differentiated in ``beta`` exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lattice import LatticeModel
from .matrix_theory import PsdCertificate, is_psd

EDGE_CAP = 24
SUBSET_CAP = 13
CHUNK = 1 << 15


class OracleCapError(ValueError):
    pass


class _ArraySum:
    """Neumaier-compensated running sum of equally shaped arrays."""

    def __init__(self, shape):
        self.s = np.zeros(shape)
        self.c = np.zeros(shape)

    def add(self, x):
        t = self.s + x
        big = np.abs(self.s) >= np.abs(x)
        self.c += np.where(big, (self.s - t) + x, (x - t) + self.s)
        self.s = t

    @property
    def value(self):
        return self.s + self.c


@dataclass(frozen=True, eq=False)
class ClusterLaw:
    """Law of the root's cluster: ``prob[i] = P(K_root = masks[i])`` and its beta-derivative."""

    N: int
    root: int
    masks: np.ndarray
    prob: np.ndarray
    dprob: np.ndarray

    @property
    def indicator(self) -> np.ndarray:
        return ((self.masks[:, None] >> np.arange(self.N)) & 1).astype(bool)

    @property
    def sizes(self) -> np.ndarray:
        return self.indicator.sum(axis=1)

    def connection(self) -> np.ndarray:
        """``P(root <-> x)`` for every ``x``."""
        return self.prob @ self.indicator

    def connection_derivative(self) -> np.ndarray:
        return self.dprob @ self.indicator

    def mean_size(self) -> float:
        return float(self.prob @ self.sizes)

    def mean_size_derivative(self) -> float:
        return float(self.dprob @ self.sizes)

    def size_distribution(self) -> dict[int, float]:
        dist = np.bincount(self.sizes, weights=self.prob, minlength=self.N + 1)
        return {k: float(dist[k]) for k in range(1, self.N + 1) if dist[k] > 0 or k == 1}

    def tail(self, n: int) -> float:
        return float(self.prob[self.sizes >= n].sum())

    def three_point(self) -> np.ndarray:
        """``P(x, y in K_root)``."""
        ind = self.indicator.astype(float)
        return ind.T @ (self.prob[:, None] * ind)

    def four_point(self) -> np.ndarray:
        """``P(a, b, c in K_root)``."""
        ind = self.indicator.astype(float)
        return np.einsum("k,ka,kb,kc->abc", self.prob, ind, ind, ind, optimize=True)

    def expect(self, f) -> float:
        """``E[f(K)]`` for ``f`` acting on the ``(count, N)`` boolean indicator array."""
        return float(self.prob @ f(self.indicator))


# -- enumeration engine -------------------------------------------------------


def _region_edges(model: LatticeModel, region):
    u, v, J = model.edges
    if region is None:
        keep = np.ones(len(u), dtype=bool)
    else:
        inR = np.zeros(model.vertex_count, dtype=bool)
        inR[list(region)] = True
        keep = inR[u] & inR[v]
    return u, v, J, keep


def propagate_labels(bits: np.ndarray, u: np.ndarray, v: np.ndarray, N: int) -> np.ndarray:
    """Minimum-vertex label of the open cluster of every vertex, one row per configuration."""
    C = bits.shape[0]
    dtype = np.int8 if N < 127 else np.int32
    lab = np.broadcast_to(np.arange(N, dtype=dtype), (C, N)).copy()
    while True:
        changed = False
        for e in range(len(u)):
            a = lab[:, u[e]]
            b = lab[:, v[e]]
            o = bits[:, e]
            mn = np.minimum(a, b)
            na = np.where(o, mn, a)
            nb = np.where(o, mn, b)
            if not changed and (np.any(na != a) or np.any(nb != b)):
                changed = True
            lab[:, u[e]] = na
            lab[:, v[e]] = nb
        if not changed:
            return lab


def _config_weights(bits: np.ndarray, p: np.ndarray, J: np.ndarray, beta: float):
    """``P(omega)`` and ``dP(omega)/dbeta`` through prefix and suffix products (exact at beta = 0)."""
    q = 1.0 - p
    f = np.where(bits, p, q)
    df = np.where(bits, 1.0, -1.0) * J * np.exp(-beta * J)
    C, m = f.shape
    pre = np.ones((C, m + 1))
    suf = np.ones((C, m + 1))
    np.cumprod(f, axis=1, out=pre[:, 1:])
    np.cumprod(f[:, ::-1], axis=1, out=suf[:, 1:])
    suf = suf[:, ::-1]
    prob = pre[:, m]
    dprob = (df * pre[:, :m] * suf[:, 1:]).sum(axis=1)
    return prob, dprob


def iterate_configurations(model: LatticeModel, beta: float, *, edge_cap: int = EDGE_CAP,
                           chunk: int = CHUNK):
    """Yield ``(bits, prob, dprob)`` over all edge configurations in chunks."""
    u, v, J = model.edges
    m = len(J)
    if m > edge_cap:
        raise OracleCapError(f"{m} edges exceed the enumeration cap {edge_cap}")
    p = -np.expm1(-beta * J)
    total = 1 << m
    shifts = np.arange(m, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        bits = ((idx[:, None] >> shifts) & 1).astype(bool)
        prob, dprob = _config_weights(bits, p, J, beta)
        yield bits, prob, dprob


def _law_enumerate(model, beta, root, region, edge_cap):
    u, v, J, keep = _region_edges(model, region)
    N = model.vertex_count
    if N > 20:
        raise OracleCapError("enumeration engine stores cluster masks for at most 20 vertices")
    weights = (1 << np.arange(N, dtype=np.int64))
    acc_p = _ArraySum(1 << N)
    acc_d = _ArraySum(1 << N)
    for bits, prob, dprob in iterate_configurations(model, beta, edge_cap=edge_cap):
        lab = propagate_labels(bits[:, keep], u[keep], v[keep], N)
        ind = lab == lab[:, root:root + 1]
        masks = ind.astype(np.int64) @ weights
        acc_p.add(np.bincount(masks, weights=prob, minlength=1 << N))
        acc_d.add(np.bincount(masks, weights=dprob, minlength=1 << N))
    P, D = acc_p.value, acc_d.value
    support = np.flatnonzero((P != 0) | (D != 0))
    return ClusterLaw(N, root, support.astype(np.int64), P[support], D[support])


def enumerate_two_point(model: LatticeModel, beta: float, *, edge_cap: int = EDGE_CAP) -> np.ndarray:
    """Full matrix ``P(x <-> y)`` by enumeration, without using translation invariance."""
    u, v, J = model.edges
    N = model.vertex_count
    acc = _ArraySum((N, N))
    for bits, prob, _ in iterate_configurations(model, beta, edge_cap=edge_cap):
        lab = propagate_labels(bits, u, v, N)
        same = lab[:, :, None] == lab[:, None, :]
        acc.add(np.einsum("c,cxy->xy", prob, same.astype(float)))
    return acc.value


# -- subset engine --------------------------------------------------------------


def _self_weights(W: np.ndarray) -> np.ndarray:
    N = W.shape[0]
    out = np.zeros(1 << N)
    for mask in range(1, 1 << N):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        cross = W[low, [j for j in range(N) if rest >> j & 1]].sum() if rest else 0.0
        out[mask] = out[rest] + cross
    return out


@lru_cache(maxsize=64)
def _connected_table(model: LatticeModel, beta: float):
    """``conn[C] = P(C is internally connected)`` for every vertex subset, with derivative."""
    N = model.vertex_count
    if N > SUBSET_CAP:
        raise OracleCapError(f"{N} vertices exceed the subset-engine cap {SUBSET_CAP}")
    W = model.matrix_from_row(model.offset_weights)
    ws = _self_weights(W).tolist()
    conn = [0.0] * (1 << N)
    dconn = [0.0] * (1 << N)
    exp = math.exp
    for mask in range(1, 1 << N):
        low = mask & -mask
        rest = mask ^ low
        if rest == 0:
            conn[mask] = 1.0
            continue
        s = 0.0
        ds = 0.0
        w_mask = ws[mask]
        sub = rest
        # proper subsets D of mask containing the low bit: D = low | sub, sub a proper submask of rest
        sub = (sub - 1) & rest
        while True:
            D = low | sub
            E = mask ^ D
            w = w_mask - ws[D] - ws[E]
            q = exp(-beta * w)
            s += conn[D] * q
            ds += (dconn[D] - w * conn[D]) * q
            if sub == 0:
                break
            sub = (sub - 1) & rest
        conn[mask] = 1.0 - s
        dconn[mask] = -ds
    return np.array(conn), np.array(dconn), np.array(ws)


def _law_subsets(model, beta, root, region):
    N = model.vertex_count
    conn, dconn, ws = _connected_table(model, float(beta))
    R = sum(1 << i for i in region) if region is not None else (1 << N) - 1
    if not R >> root & 1:
        raise ValueError("root must lie in the region")
    masks = np.arange(1 << N, dtype=np.int64)
    masks = masks[((masks & ~R) == 0) & ((masks >> root) & 1 == 1)]
    w_out = ws[R] - ws[masks] - ws[R ^ masks]
    q = np.exp(-beta * w_out)
    prob = conn[masks] * q
    dprob = (dconn[masks] - w_out * conn[masks]) * q
    return ClusterLaw(N, root, masks, prob, dprob)


# -- public oracle API ---------------------------------------------------------


def _pick_method(model: LatticeModel, method: str, edge_cap: int) -> str:
    if method != "auto":
        return method
    if model.edge_count <= edge_cap:
        return "enumerate"
    if model.vertex_count <= SUBSET_CAP:
        return "subsets"
    raise OracleCapError(f"{model.label}: {model.edge_count} edges and {model.vertex_count} vertices "
                         "exceed both exact engines")


@lru_cache(maxsize=512)
def _law_cached(model, beta, root, region, method, edge_cap):
    if method == "enumerate":
        return _law_enumerate(model, beta, root, region, edge_cap)
    if method == "subsets":
        return _law_subsets(model, beta, root, region)
    raise ValueError(f"unknown method {method!r}")


def cluster_law(model: LatticeModel, beta: float, *, root: int = 0, region=None,
                method: str = "auto", edge_cap: int = EDGE_CAP) -> ClusterLaw:
    """Exact law of the cluster of ``root`` using only edges with both ends in ``region``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    method = _pick_method(model, method, edge_cap)
    region = None if region is None else tuple(sorted(set(int(x) for x in region)))
    if region is not None and root not in region:
        raise ValueError("root must lie in the region")
    return _law_cached(model, float(beta), int(root), region, method, edge_cap)


@dataclass(frozen=True, eq=False)
class ExactReport:
    beta: float
    two_point: np.ndarray
    chi: float
    chi_derivative: float
    size_distribution: dict
    min_eigenvalue: float
    method: str
    law: ClusterLaw


@lru_cache(maxsize=256)
def _report_cached(model, beta, method, edge_cap):
    law = _law_cached(model, beta, 0, None, method, edge_cap)
    row = law.connection()
    T = model.matrix_from_row(row)
    T = 0.5 * (T + T.T)
    np.fill_diagonal(T, 1.0)
    T.setflags(write=False)
    eig = float(np.linalg.eigvalsh(T)[0])
    return ExactReport(beta, T, law.mean_size(), law.mean_size_derivative(),
                       law.size_distribution(), eig, method, law)


def exact_report(model: LatticeModel, beta: float, *, method: str = "auto",
                 edge_cap: int = EDGE_CAP) -> ExactReport:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return _report_cached(model, float(beta), _pick_method(model, method, edge_cap), edge_cap)


def exact_two_point(model, beta, **kw) -> np.ndarray:
    return exact_report(model, beta, **kw).two_point


def exact_chi(model, beta, **kw) -> float:
    return exact_report(model, beta, **kw).chi


def exact_chi_derivative(model, beta, **kw) -> float:
    return exact_report(model, beta, **kw).chi_derivative


def exact_size_distribution(model, beta, **kw) -> dict[int, float]:
    return exact_report(model, beta, **kw).size_distribution


def exact_tail(model, beta, n: int, **kw) -> float:
    return exact_report(model, beta, **kw).law.tail(n)


def exact_three_point(model, beta, **kw) -> np.ndarray:
    return exact_report(model, beta, **kw).law.three_point()


def exact_four_point(model, beta, **kw) -> np.ndarray:
    return exact_report(model, beta, **kw).law.four_point()


def exact_off_set_connection(model: LatticeModel, beta: float, S, **kw) -> np.ndarray:
    """Matrix ``P(x <-> y off S)`` for ``x, y`` outside ``S`` (zero rows and columns on ``S``)."""
    N = model.vertex_count
    S = set(int(s) for s in S)
    region = [x for x in range(N) if x not in S]
    out = np.zeros((N, N))
    for x in region:
        out[x] = cluster_law(model, beta, root=x, region=region, **kw).connection()
    return out


def exact_Phi(model: LatticeModel, beta: float, S, **kw) -> float:
    """``sum_{e: e- in S, e+ not in S} sum_{v not in S} J_e P(e+ <-> v off S)``."""
    S = set(int(s) for s in S)
    N = model.vertex_count
    if len(S) == N:
        return 0.0
    off = exact_off_set_connection(model, beta, S, **kw)
    W = model.matrix_from_row(model.offset_weights)
    inS = np.zeros(N, dtype=bool)
    inS[list(S)] = True
    boundary = W[inS][:, ~inS].sum(axis=0)
    return float(boundary @ off[~inS].sum(axis=1))


def exact_phi_dct(model: LatticeModel, beta: float, S, v: int = 0, *, exterior=None, **kw) -> float:
    """``sum_{x in S} P(v <-> x inside S) * w_out(x)`` with ``w_out(x) = sum_{y not in S} (1 - e^{-beta J(x,y)})``.

    ``exterior`` optionally adds a per-vertex external contribution (for example
    the infinite-lattice tail of a hierarchical ball).
    """
    S = sorted(set(int(s) for s in S))
    if v not in S:
        raise ValueError("v must belong to S")
    N = model.vertex_count
    conn = cluster_law(model, beta, root=v, region=S, **kw).connection()
    W = model.matrix_from_row(model.offset_weights)
    outside = np.ones(N, dtype=bool)
    outside[S] = False
    w_out = (-np.expm1(-beta * W[:, outside])).sum(axis=1)
    if exterior is not None:
        w_out = w_out + exterior
    return float(conn[S] @ w_out[S])


def verify_psd_bound(model: LatticeModel, beta: float, **kw) -> tuple[PsdCertificate, float]:
    """Minimum eigenvalue of the exact two-point matrix against ``min_v prod_{e at v} e^{-beta J_e}``.

    Raises ``AssertionError`` on violation.
    """
    T = exact_two_point(model, beta, **kw)
    cert = is_psd(T)
    bound = math.exp(-beta * model.incident_weight())
    if cert.min_eigenvalue < bound - 1e-10:
        raise AssertionError(f"min eigenvalue {cert.min_eigenvalue} below singleton bound {bound}")
    return cert, bound


def configuration_probabilities(model: LatticeModel, beta: float, *, edge_cap: int = 20) -> np.ndarray:
    """Probability of every edge configuration, indexed by its bit pattern."""
    return np.concatenate([p for _, p, _ in iterate_configurations(model, beta, edge_cap=edge_cap)])
