"""Monte Carlo estimators built on the coupled batch engine.

Per-sample statistics are averaged over the symmetry classes of the model
(all translates, and for two-point functions all pairs in a distance class),
which reduces variance without bias.  Chunk sums are accumulated exactly as
fractions, so merging shards is associative and order independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .diagrams import TwoPointMatrix, clean_mc_matrix
from .lattice import LatticeModel, boundary_tail_sum
from .percolation import map_batches, open_probability, origin_cluster_sizes, vertex_mask

MIN_SAMPLES = 100
DEFAULT_SAMPLES = 100_000


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < MIN_SAMPLES:
            raise ValueError(f"at least {MIN_SAMPLES} samples are required")

    def within(self, exact: float, k: float = 4.0, extra: float = 0.0) -> bool:
        return abs(self.value - exact) <= k * math.hypot(self.stderr, extra) + 1e-12


@dataclass(frozen=True)
class Moments:
    """Running sums of per-sample vectors.

    Each chunk sum is correctly rounded (``math.fsum``) and stored as a
    ``Fraction``, so pooling chunks is exact and independent of merge order.
    """

    n: int
    s: tuple
    ss: tuple

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        s = tuple(Fraction(math.fsum(col)) for col in x.T)
        ss = tuple(Fraction(math.fsum(col)) for col in (x * x).T)
        return cls(x.shape[0], s, ss)

    def merge(self, other: "Moments") -> "Moments":
        return Moments(self.n + other.n, tuple(a + b for a, b in zip(self.s, other.s)),
                       tuple(a + b for a, b in zip(self.ss, other.ss)))

    @staticmethod
    def pool(parts) -> "Moments":
        parts = list(parts)
        out = parts[0]
        for p in parts[1:]:
            out = out.merge(p)
        return out

    def mean(self) -> np.ndarray:
        return np.array([float(a / self.n) for a in self.s])

    def stderr(self) -> np.ndarray:
        n = self.n
        if n < 2:
            return np.full(len(self.s), np.inf)
        out = []
        for a, b in zip(self.s, self.ss):
            var = (b - a * a / n) / (n - 1)
            out.append(math.sqrt(max(float(var), 0.0) / n))
        return np.array(out)

    def estimates(self, seed: int) -> list[McEstimate]:
        return [McEstimate(float(m), float(e), self.n, seed) for m, e in zip(self.mean(), self.stderr())]


def _pooled(parts, seed) -> list[McEstimate]:
    return Moments.pool(parts).estimates(seed)


# -- per-sample statistics --------------------------------------------------------


def sample_chi(labels: np.ndarray) -> np.ndarray:
    """Translation-averaged cluster size, ``sum_C |C|^2 / N`` per sample."""
    return origin_cluster_sizes(labels).mean(axis=1)


def sample_tails(labels: np.ndarray, ns) -> np.ndarray:
    sizes = origin_cluster_sizes(labels)
    return np.stack([(sizes >= n).mean(axis=1) for n in ns], axis=1)


def sample_class_connection(model: LatticeModel, labels: np.ndarray) -> np.ndarray:
    """Per-sample connection frequency averaged over each distance class, shape ``(B, classes)``."""
    B, N = labels.shape
    if model.kind == "hierarchical":
        return _hier_class_connection(model, labels)
    cls = model.offset_class
    table = model.translation_table
    out = np.zeros((B, model.class_count))
    for g in range(N):
        out[:, cls[g]] += (labels[:, table[g]] == labels).mean(axis=1)
    return out / model.class_sizes


def _hier_class_connection(model, labels):
    B, N = labels.shape
    base = model.L**model.d
    x = np.arange(N)
    sample_of = np.empty(labels.max() + 1, dtype=np.int64)
    sample_of[labels] = np.arange(B)[:, None]
    prev = np.full(B, float(N))
    out = np.zeros((B, model.n + 1))
    out[:, 0] = 1.0
    for k in range(1, model.n + 1):
        nb = N // base**k
        key = labels * nb + (x // base**k)
        uniq, counts = np.unique(key, return_counts=True)
        cur = np.bincount(sample_of[uniq // nb], weights=counts.astype(float) ** 2, minlength=B)
        out[:, k] = (cur - prev) / (N * (base**k - base ** (k - 1)))
        prev = cur
    return out


# -- estimators -------------------------------------------------------------------


def mc_two_point(model: LatticeModel, beta: float, n_samples: int = DEFAULT_SAMPLES, seed: int = 0, *,
                 threads: int = 1, raw: bool = False, stream: int = 0) -> TwoPointMatrix:
    """Class-averaged two-point matrix.  ``raw=True`` returns origin-row pair frequencies instead."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    bmax = max(beta, 1e-300)

    def fn(batch):
        lab = batch.labels(beta)
        if raw:
            return Moments.of(lab == lab[:, :1])
        return Moments.of(sample_class_connection(model, lab))

    est = _pooled(map_batches(model, bmax, n_samples, seed, fn, threads=threads, stream=stream), seed)
    vals = np.array([e.value for e in est])
    errs = np.array([e.stderr for e in est])
    if raw:
        row, row_se = vals, errs
    else:
        row, row_se = model.row_from_classes(vals), model.row_from_classes(errs)
    T = clean_mc_matrix(model.matrix_from_row(row), model.matrix_from_row(row_se), 0, beta,
                        {"class_estimates": est, "n_samples": n_samples, "seed": seed, "raw": raw})
    return T


def mc_chi(model, beta, n_samples=DEFAULT_SAMPLES, seed=0, *, threads=1, stream=0) -> McEstimate:
    parts = map_batches(model, max(beta, 1e-300), n_samples, seed,
                        lambda b: Moments.of(sample_chi(b.labels(beta))), threads=threads, stream=stream)
    return _pooled(parts, seed)[0]


def mc_tail(model, beta, ns, n_samples=DEFAULT_SAMPLES, seed=0, *, threads=1, stream=0) -> list[McEstimate]:
    ns = list(ns)
    parts = map_batches(model, max(beta, 1e-300), n_samples, seed,
                        lambda b: Moments.of(sample_tails(b.labels(beta), ns)), threads=threads, stream=stream)
    return _pooled(parts, seed)


def mc_chi_coupled(model, betas, n_samples=DEFAULT_SAMPLES, seed=0, *, threads=1,
                   stream=0) -> list[McEstimate]:
    """``chi`` at several ``beta`` from one set of coupled samples."""
    betas = list(betas)

    def fn(b):
        return Moments.of(np.stack([sample_chi(b.labels(x)) for x in betas], axis=1))

    return _pooled(map_batches(model, max(max(betas), 1e-300), n_samples, seed, fn, threads=threads,
                               stream=stream), seed)


def boundary_weights(model: LatticeModel, S) -> np.ndarray:
    """``sum_{s in S} J(s, t)`` for every vertex ``t`` (zero on ``S``)."""
    inS = vertex_mask(model.vertex_count, S)
    idx = np.arange(model.vertex_count)
    w = np.zeros(model.vertex_count)
    for s in np.flatnonzero(inS):
        w += model.offset_weights[model.sub(idx, s)]
    w[inS] = 0.0
    return w


def exterior_weights(model: LatticeModel, S, beta: float, *, infinite_exterior: bool | None = None) -> np.ndarray:
    """``sum_{y not in S} (1 - e^{-beta J(x, y)})`` for ``x`` in ``S``.

    For hierarchical balls the infinite-lattice exterior beyond the simulated
    ball is included analytically unless ``infinite_exterior=False``.
    """
    N = model.vertex_count
    inS = vertex_mask(N, S)
    if infinite_exterior is None:
        infinite_exterior = model.kind == "hierarchical"
    out = np.zeros(N)
    outside = np.flatnonzero(~inS)
    for x in np.flatnonzero(inS):
        out[x] = open_probability(beta, model.offset_weights[model.sub(outside, x)]).sum() if outside.size else 0.0
    if infinite_exterior:
        out[inS] += boundary_tail_sum(model, beta, model.n)
    out[~inS] = 0.0
    return out


def mc_Phi(model, S, beta, n_samples=DEFAULT_SAMPLES, seed=0, *, threads=1, stream=0) -> McEstimate:
    """``sum_{e in dS} sum_{v not in S} J_e P(e+ <-> v off S)`` from off-``S`` cluster sizes."""
    w = boundary_weights(model, S)

    def fn(b):
        keep = b.edge_filter(S, "off")
        sizes = origin_cluster_sizes(b.labels(beta, keep))
        return Moments.of(sizes @ w)

    return _pooled(map_batches(model, max(beta, 1e-300), n_samples, seed, fn, threads=threads,
                               stream=stream), seed)[0]


def mc_phi_dct(model, S, beta, n_samples=DEFAULT_SAMPLES, seed=0, *, v: int = 0, threads=1, stream=0,
               infinite_exterior: bool | None = None) -> McEstimate:
    """``sum_{x in S} P(v <-> x inside S) w_out(x)`` with all edges leaving ``S`` closed."""
    inS = vertex_mask(model.vertex_count, S)
    if not inS[v]:
        raise ValueError("v must belong to S")
    w = exterior_weights(model, S, beta, infinite_exterior=infinite_exterior)

    def fn(b):
        keep = b.edge_filter(S, "within")
        lab = b.labels(beta, keep)
        return Moments.of((lab == lab[:, v:v + 1]) @ w)

    return _pooled(map_batches(model, max(beta, 1e-300), n_samples, seed, fn, threads=threads,
                               stream=stream), seed)[0]


def chi_derivative_fd(model, beta, h, n_samples=DEFAULT_SAMPLES, seed=0, *, threads=1, coupled: bool = True,
                      stream=0) -> McEstimate:
    """Central difference ``(chi(beta+h) - chi(beta-h)) / 2h`` with common random numbers."""
    if h <= 0 or beta - h < 0:
        raise ValueError("need h > 0 and beta - h >= 0")
    lo, hi = beta - h, beta + h
    if coupled:
        def fn(b):
            return Moments.of((sample_chi(b.labels(hi)) - sample_chi(b.labels(lo))) / (2 * h))

        return _pooled(map_batches(model, hi, n_samples, seed, fn, threads=threads, stream=stream), seed)[0]
    a = mc_chi(model, hi, n_samples, seed, threads=threads, stream=stream + 1)
    b = mc_chi(model, lo, n_samples, seed, threads=threads, stream=stream + 2)
    return McEstimate((a.value - b.value) / (2 * h), math.hypot(a.stderr, b.stderr) / (2 * h), n_samples, seed)


def adaptive(estimate, target_stderr: float, n0: int = 1000, n_max: int = 1_000_000):
    """Double the sample count until ``stderr < target_stderr`` or ``n_max`` is reached."""
    n = n0
    while True:
        est = estimate(n)
        se = est.stderr if isinstance(est, McEstimate) else max(e.stderr for e in est)
        if se < target_stderr or n >= n_max:
            return est
        n = min(2 * n, n_max)
