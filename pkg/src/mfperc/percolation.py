"""Bernoulli bond percolation: single samples, union-find, and a coupled batch engine.

An edge of weight ``J`` is open with probability ``1 - exp(-beta J)``.

The batch engine draws, for every edge and sample, a uniform ``U`` and
declares the edge open at ``beta`` iff ``U < p(beta, J)``.  Only edges with
``U < p(beta_max, J)`` are materialised (via geometric skipping when the
probability is small), so one batch serves every ``beta <= beta_max`` with a
monotone coupling.  Streams are Philox generators keyed by
``(seed, chunk_index)``; chunk sizes depend only on the model and
``beta_max``, so results do not depend on the thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .lattice import LatticeModel

DENSE_THRESHOLD = 0.2
MAX_CANDIDATES = 2_000_000


def open_probability(beta, J):
    """``1 - exp(-beta J)``, accurate for small ``beta J``."""
    beta = np.asarray(beta, dtype=float)
    J = np.asarray(J, dtype=float)
    if np.any(beta < 0) or np.any(J < 0):
        raise ValueError("beta and J must be nonnegative")
    out = -np.expm1(-beta * J)
    return float(out) if out.ndim == 0 else out


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based stream for ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, key)])))


# -- single samples ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BondConfiguration:
    model: LatticeModel
    open_edges: np.ndarray
    beta: float
    seed: tuple | None = None

    def __post_init__(self):
        if self.open_edges.shape != (self.model.edge_count,):
            raise ValueError("bit vector length must equal the edge count")

    @property
    def n_open(self) -> int:
        return int(self.open_edges.sum())

    def open_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        u, v, _ = self.model.edges
        return u[self.open_edges], v[self.open_edges]


def edge_index(model: LatticeModel, x: int, y: int) -> int:
    """Position of edge ``{x, y}`` in the canonical (lexicographic) ordering."""
    u, v, _ = model.edges
    a, b = min(x, y), max(x, y)
    hit = np.flatnonzero((u == a) & (v == b))
    if hit.size == 0:
        raise KeyError(f"({x}, {y}) is not an edge")
    return int(hit[0])


def sample(model: LatticeModel, beta: float, rng: np.random.Generator, *,
           seed: tuple | None = None) -> BondConfiguration:
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    _, _, J = model.edges
    U = rng.random(len(J))
    return BondConfiguration(model, U < open_probability(beta, J), float(beta), seed)


def sample_off_set(model: LatticeModel, beta: float, S, rng: np.random.Generator, *,
                   seed: tuple | None = None) -> BondConfiguration:
    """Sample with every edge touching ``S`` forced closed.

    The same uniforms as :func:`sample` are consumed, so the result is the
    plain sample with the ``S`` edges removed.
    """
    config = sample(model, beta, rng, seed=seed)
    inS = vertex_mask(model.vertex_count, S)
    u, v, _ = model.edges
    return BondConfiguration(model, config.open_edges & ~(inS[u] | inS[v]), config.beta, seed)


def vertex_mask(N: int, S) -> np.ndarray:
    mask = np.zeros(N, dtype=bool)
    S = np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64)
    if S.size and (S.min() < 0 or S.max() >= N):
        raise ValueError("vertex set is not inside the model")
    mask[S] = True
    return mask


class ClusterPartition:
    """Union-find with union by rank and path compression."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int8)
        self.size = np.ones(n, dtype=np.int64)

    @classmethod
    def from_edges(cls, n: int, u, v) -> "ClusterPartition":
        cp = cls(n)
        for a, b in zip(np.asarray(u).tolist(), np.asarray(v).tolist()):
            cp.union(a, b)
        return cp

    def find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return int(root)

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        return True

    def connected(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)

    def labels(self) -> np.ndarray:
        return np.array([self.find(i) for i in range(len(self.parent))], dtype=np.int64)

    @property
    def cluster_sizes(self) -> list[int]:
        roots = self.labels()
        return sorted(np.bincount(roots)[np.unique(roots)].tolist(), reverse=True)

    @property
    def cluster_of_origin_size(self) -> int:
        return int(self.size[self.find(0)])


def clusters(config: BondConfiguration) -> ClusterPartition:
    u, v = config.open_pairs()
    return ClusterPartition.from_edges(config.model.vertex_count, u, v)


# -- coupled batches --------------------------------------------------------


@dataclass(eq=False)
class CoupledBatch:
    """Candidate edges of ``size`` independent samples drawn at ``beta_max``."""

    N: int
    size: int
    start: int
    beta_max: float
    sample: np.ndarray
    u: np.ndarray
    v: np.ndarray
    J: np.ndarray
    U: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def open_mask(self, beta: float) -> np.ndarray:
        if beta > self.beta_max * (1 + 1e-12):
            raise ValueError("beta above the batch coupling level")
        return self.U < open_probability(beta, self.J)

    def labels(self, beta: float, keep: np.ndarray | None = None) -> np.ndarray:
        """Component labels, shape ``(size, N)``; labels are unique across the batch."""
        key = (float(beta), None if keep is None else id(keep))
        if keep is None and key in self._cache:
            return self._cache[key]
        mask = self.open_mask(beta)
        if keep is not None:
            mask &= keep
        lab = batch_labels(self.N, self.size, self.sample[mask], self.u[mask], self.v[mask])
        if keep is None:
            self._cache.clear()
            self._cache[key] = lab
        return lab

    def edge_filter(self, S, mode: str) -> np.ndarray:
        """``mode='off'`` removes edges touching ``S``; ``'within'`` keeps edges inside ``S``."""
        inS = vertex_mask(self.N, S)
        if mode == "off":
            return ~(inS[self.u] | inS[self.v])
        if mode == "within":
            return inS[self.u] & inS[self.v]
        raise ValueError(mode)


def batch_labels(N: int, B: int, s, u, v) -> np.ndarray:
    nodes = B * N
    a = s * N + u
    b = s * N + v
    graph = coo_matrix((np.ones(len(a), dtype=np.int8), (a, b)), shape=(nodes, nodes)).tocsr()
    _, lab = connected_components(graph, directed=False)
    return lab.reshape(B, N).astype(np.int64)


def _bernoulli_positions(total: int, p: float, rng: np.random.Generator):
    """Positions in ``[0, total)`` with ``U < p`` and their uniforms ``U``."""
    if p <= 0 or total == 0:
        return np.empty(0, dtype=np.int64), np.empty(0)
    if p >= DENSE_THRESHOLD:
        U = rng.random(total)
        pos = np.flatnonzero(U < p)
        return pos, U[pos]
    if p < 1e-12:
        # geometric gaps of order 1/p would overflow int64; draw the count, then uniform positions
        k = int(rng.binomial(total, p))
        pos = np.sort(rng.choice(total, size=k, replace=False)) if k else np.empty(0, dtype=np.int64)
        return pos.astype(np.int64), rng.random(k) * p
    mean = total * p
    draws = []
    last = -1
    while True:
        k = int(mean + 6.0 * np.sqrt(mean) + 16)
        gaps = rng.geometric(p, size=k)
        pos = last + np.cumsum(gaps)
        draws.append(pos)
        last = int(pos[-1])
        if last >= total:
            break
    pos = np.concatenate(draws)
    pos = pos[pos < total]
    return pos, rng.random(len(pos)) * p


def _cost_per_sample(model: LatticeModel, beta_max: float) -> float:
    cost = 0.0
    for count, J in _weight_groups(model):
        p = open_probability(beta_max, J)
        cost += count * (1.0 if p >= DENSE_THRESHOLD else p)
    return max(cost, 1.0) + model.vertex_count


def _weight_groups(model: LatticeModel):
    """``(number of candidate positions per sample, J)`` per weight group."""
    if model.kind == "hierarchical":
        N = model.vertex_count
        base = model.L**model.d
        c = model.c_J
        return [(N * (base**k - base ** (k - 1)), c * float(model.L) ** (-(model.d + model.alpha) * k))
                for k in range(1, model.n + 1)]
    _, _, J = model.edges
    vals, counts = np.unique(J, return_counts=True)
    return list(zip(counts.tolist(), vals.tolist()))


def _use_implicit(model: LatticeModel) -> bool:
    return model.kind == "hierarchical" and model.vertex_count > 256


def chunk_size(model: LatticeModel, beta_max: float, *, max_candidates: int = MAX_CANDIDATES) -> int:
    return int(max(1, min(8192, max_candidates // _cost_per_sample(model, beta_max))))


def draw_batch(model: LatticeModel, beta_max: float, size: int, rng: np.random.Generator,
               start: int = 0) -> CoupledBatch:
    N = model.vertex_count
    parts = []
    if _use_implicit(model):
        base = model.L**model.d
        for k, (count, J) in enumerate(_weight_groups(model), start=1):
            p = open_probability(beta_max, J)
            per_x = count // N
            pos, U = _bernoulli_positions(size * count, p, rng)
            s, rest = np.divmod(pos, count)
            x, j = np.divmod(rest, per_x)
            y = model.add(x, base ** (k - 1) + j)
            keep = x < y
            parts.append((s[keep], x[keep], y[keep], np.full(int(keep.sum()), J), U[keep]))
    else:
        eu, ev, eJ = model.edges
        vals, inverse = np.unique(eJ, return_inverse=True)
        for g, J in enumerate(vals.tolist()):
            idx = np.flatnonzero(inverse == g)
            p = open_probability(beta_max, J)
            pos, U = _bernoulli_positions(size * len(idx), p, rng)
            s, j = np.divmod(pos, len(idx))
            e = idx[j]
            parts.append((s, eu[e], ev[e], eJ[e], U))
    if parts:
        s, u, v, J, U = (np.concatenate(a) for a in zip(*parts))
    else:
        s = u = v = np.empty(0, dtype=np.int64)
        J = U = np.empty(0)
    return CoupledBatch(N, size, start, float(beta_max), s.astype(np.int64), u.astype(np.int64),
                        v.astype(np.int64), J.astype(float), U.astype(float))


def map_batches(model: LatticeModel, beta_max: float, n_samples: int, seed: int, fn, *,
                threads: int = 1, max_candidates: int = MAX_CANDIDATES, stream: int = 0) -> list:
    """Apply ``fn(batch)`` to every chunk of ``n_samples`` coupled samples; results in chunk order.

    ``stream`` separates independent experiments that share a seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    B = chunk_size(model, beta_max, max_candidates=max_candidates)
    jobs = [(c, start, min(B, n_samples - start)) for c, start in enumerate(range(0, n_samples, B))]

    def run(job):
        c, start, size = job
        rng = make_rng(seed, stream, c)
        return fn(draw_batch(model, beta_max, size, rng, start))

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, jobs))
    return [run(j) for j in jobs]


def origin_cluster_sizes(labels: np.ndarray) -> np.ndarray:
    """Cluster size of every vertex in every sample, shape ``(B, N)``."""
    sizes = np.bincount(labels.ravel())
    return sizes[labels]
