"""Relative entropy comparison of cluster tails across two values of beta.

Contents: Bernoulli KL and its exponential-parameter bound, the generalised
Pinsker inequality, a breadth-first cluster exploration tree with revealment
bookkeeping (sampled or exact), and the two comparison inequalities for
``P(|K| >= n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr

from .exact import cluster_law, configuration_probabilities
from .lattice import LatticeModel
from .percolation import BondConfiguration, clusters, make_rng, open_probability, sample


def bernoulli_kl(p: float, q: float) -> float:
    """``KL(Ber(p) || Ber(q))`` for ``p, q`` in the open unit interval."""
    if not (0 < p < 1 and 0 < q < 1):
        raise ValueError("p and q must lie in (0, 1)")
    return float(rel_entr(p, q) + rel_entr(1 - p, 1 - q))


def kl_exp(a: float, b: float) -> float:
    """``KL(Ber(e^{-a}) || Ber(e^{-b}))``, evaluated without cancellation for small ``a, b``."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    p = math.exp(-a)
    one_p = -math.expm1(-a)
    one_q = -math.expm1(-b)
    # the divergence is nonnegative; clamp the rounding residue at a == b
    return max(p * (b - a) + one_p * (math.log(one_p) - math.log(one_q)), 0.0)


def kl_exp_bound_check(a: float, b: float) -> tuple[float, float]:
    """``(kl, |a-b|^2 / (2 min(a, b)))``."""
    return kl_exp(a, b), (a - b) ** 2 / (2.0 * min(a, b))


def pinsker_check(muA: float, nuA: float, D: float) -> bool:
    """``|muA - nuA|^2 <= 2 D max(muA, nuA)``."""
    for x in (muA, nuA):
        if not 0 <= x <= 1:
            raise ValueError("probabilities must lie in [0, 1]")
    if D < 0:
        raise ValueError("D must be nonnegative")
    return (muA - nuA) ** 2 <= 2.0 * D * max(muA, nuA) + 1e-12


def atom_kl(P: np.ndarray, Q: np.ndarray) -> float:
    """``sum_omega P log(P/Q)`` over configuration atoms."""
    return math.fsum(rel_entr(P, Q).tolist())


def product_kl(model: LatticeModel, beta1: float, beta2: float) -> float:
    """Edge-by-edge sum ``sum_e KL(Ber(p1_e) || Ber(p2_e))`` for two product measures."""
    _, _, J = model.edges
    return math.fsum(kl_exp(beta1 * j, beta2 * j) for j in J.tolist())


def percolation_kl(model: LatticeModel, beta1: float, beta2: float) -> tuple[float, float]:
    """Atom-sum and edge-sum KL between the percolation measures; equal by the chain rule."""
    P = configuration_probabilities(model, beta1)
    Q = configuration_probabilities(model, beta2)
    return atom_kl(P, Q), product_kl(model, beta1, beta2)


# -- exploration tree ------------------------------------------------------------


@dataclass
class RevealmentLedger:
    """Per-edge query frequencies of the exploration tree."""

    counts: np.ndarray
    J: np.ndarray
    n_target: int
    n_runs: int = 0
    weighted: list = field(default_factory=list)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.n_runs, 1)

    @property
    def weighted_sum(self) -> float:
        return float(self.frequencies @ self.J)

    @property
    def weighted_stderr(self) -> float:
        w = np.asarray(self.weighted)
        if len(w) < 2:
            return 0.0
        return float(w.std(ddof=1) / math.sqrt(len(w)))

    def merge(self, other: "RevealmentLedger") -> "RevealmentLedger":
        return RevealmentLedger(self.counts + other.counts, self.J, self.n_target,
                                self.n_runs + other.n_runs, self.weighted + other.weighted)


@dataclass(frozen=True)
class ExplorationResult:
    found: int
    reached: bool
    queried: tuple


def adjacency(model: LatticeModel):
    """For each vertex, ``(neighbour, edge index)`` in ascending edge index."""
    u, v, _ = model.edges
    adj = [[] for _ in range(model.vertex_count)]
    for e, (a, b) in enumerate(zip(u.tolist(), v.tolist())):
        adj[a].append((b, e))
        adj[b].append((a, e))
    for lst in adj:
        lst.sort(key=lambda t: t[1])
    return adj


def explore(adj, is_open, n_target: int, root: int = 0) -> ExplorationResult:
    """Breadth-first exploration of the root cluster, halting once ``n_target`` vertices are found.

    Edges are queried only toward undiscovered vertices, in ascending
    (discovery position, edge index) order.
    """
    if n_target < 1:
        raise ValueError("n_target must be >= 1")
    found = [root]
    seen = {root}
    queried = []
    if n_target == 1:
        return ExplorationResult(1, True, ())
    i = 0
    while i < len(found):
        for y, e in adj[found[i]]:
            if y in seen:
                continue
            queried.append(e)
            if is_open(e):
                found.append(y)
                seen.add(y)
                if len(found) >= n_target:
                    return ExplorationResult(len(found), True, tuple(queried))
        i += 1
    return ExplorationResult(len(found), False, tuple(queried))


def explore_cluster(model: LatticeModel, beta: float, n_target: int, rng, *,
                    config: BondConfiguration | None = None) -> tuple[ExplorationResult, RevealmentLedger]:
    """Explore one sample (drawn from ``rng`` unless ``config`` is given)."""
    if config is None:
        config = sample(model, beta, rng)
    bits = config.open_edges
    res = explore(adjacency(model), lambda e: bool(bits[e]), n_target)
    _, _, J = model.edges
    counts = np.zeros(len(J))
    counts[list(res.queried)] = 1
    w = float(J[list(res.queried)].sum()) if res.queried else 0.0
    return res, RevealmentLedger(counts, J.copy(), n_target, 1, [w])


def mc_revealment(model: LatticeModel, beta: float, n_target: int, n_samples: int, seed: int, *,
                  check_verdict: bool = False, stream: int = 0) -> tuple[RevealmentLedger, float, float]:
    """Sampled revealment ledger plus the estimate of ``P(|K| >= n_target)`` (value, stderr).

    With ``check_verdict`` the tree verdict is compared with the union-find
    cluster size on every sample.
    """
    adj = adjacency(model)
    _, _, J = model.edges
    p = open_probability(beta, J)
    counts = np.zeros(len(J))
    weighted = []
    hits = 0
    block = 4096
    rng = make_rng(seed, 7, stream)
    for start in range(0, n_samples, block):
        U = rng.random((min(block, n_samples - start), len(J)))
        bits_all = U < p
        for bits in bits_all:
            res = explore(adj, bits.__getitem__, n_target)
            q = list(res.queried)
            counts[q] += 1
            weighted.append(float(J[q].sum()))
            hits += res.reached
            if check_verdict:
                cfg = BondConfiguration(model, bits, beta)
                if (clusters(cfg).cluster_of_origin_size >= n_target) != res.reached:
                    raise AssertionError("decision tree disagrees with the cluster decomposition")
    ph = hits / n_samples
    return (RevealmentLedger(counts, J.copy(), n_target, n_samples, weighted), ph,
            math.sqrt(max(ph * (1 - ph), 0.0) / n_samples))


def exact_revealment(model: LatticeModel, beta: float, n_target: int, *, max_nodes: int = 5_000_000):
    """Exact revealment of every edge and ``P(tree reaches n_target)`` by walking the decision tree."""
    adj = adjacency(model)
    _, _, J = model.edges
    p = open_probability(beta, J).tolist()
    rev = [0.0] * len(J)
    reached = [0.0]
    nodes = [0]
    if n_target <= 1:
        return np.zeros(len(J)), 1.0

    def walk(prob, found, seen, i, j):
        nodes[0] += 1
        if nodes[0] > max_nodes:
            raise RuntimeError("decision tree too large for exact revealment")
        while i < len(found):
            nbrs = adj[found[i]]
            while j < len(nbrs):
                y, e = nbrs[j]
                j += 1
                if y in seen:
                    continue
                rev[e] += prob
                pe = p[e]
                if pe > 0:
                    if len(found) + 1 >= n_target:
                        reached[0] += prob * pe
                    else:
                        walk(prob * pe, found + (y,), seen | {y}, i, j)
                prob *= 1.0 - pe
                if prob == 0.0:
                    return
            i += 1
            j = 0

    walk(1.0, (0,), frozenset([0]), 0, 0)
    return np.array(rev), reached[0]


# -- comparison inequalities -----------------------------------------------------


@dataclass(frozen=True)
class DewanMuirheadReport:
    p1: float
    p2: float
    weighted_revealment: float
    lhs: float
    rhs: float
    slack: float
    holds: bool
    exact: bool


def dewan_muirhead_rhs(beta1, beta2, p1, p2, weighted_rev) -> float:
    return (beta1 - beta2) ** 2 / min(beta1, beta2) * max(p1, p2) * weighted_rev


def dewan_muirhead_check(model: LatticeModel, beta1: float, beta2: float, n_target: int, *,
                         budget: int | None = None, seed: int = 0) -> DewanMuirheadReport:
    """``|P1(A) - P2(A)|^2`` against the revealment bound for ``A = {|K| >= n_target}``.

    Exact when ``budget`` is None (tiny models), otherwise sampled with a
    four standard error allowance on every input.
    """
    if not (beta1 > 0 and beta2 > 0):
        raise ValueError("betas must be positive")
    if budget is None:
        p1 = cluster_law(model, beta1).tail(n_target)
        p2 = cluster_law(model, beta2).tail(n_target)
        rev, _ = exact_revealment(model, beta1, n_target)
        R = float(rev @ model.edges[2])
        lhs = (p1 - p2) ** 2
        rhs = dewan_muirhead_rhs(beta1, beta2, p1, p2, R)
        return DewanMuirheadReport(p1, p2, R, lhs, rhs, 1e-12, lhs <= rhs + 1e-12, True)
    ledger, p1, s1 = mc_revealment(model, beta1, n_target, budget, seed, stream=1)
    _, p2, s2 = mc_revealment(model, beta2, n_target, budget, seed, stream=2)
    R, sR = ledger.weighted_sum, ledger.weighted_stderr
    lhs = (p1 - p2) ** 2
    rhs = dewan_muirhead_rhs(beta1, beta2, p1, p2, R)
    diff_lo = max(0.0, abs(p1 - p2) - 4 * math.hypot(s1, s2))
    rhs_hi = dewan_muirhead_rhs(beta1, beta2, p1 + 4 * s1, p2 + 4 * s2, R + 4 * sR)
    return DewanMuirheadReport(p1, p2, R, lhs, rhs, rhs_hi - rhs, diff_lo**2 <= rhs_hi, False)


@dataclass(frozen=True)
class TailComparison:
    lhs: float
    bound1: float
    bound2: float
    skipped_bound2: bool = False


def dm_chi_bounds(tail1, tail2_n: float, beta1: float, beta2: float, n: int, chi1: float) -> TailComparison:
    """``P2(|K|>=n) <= 2 P1(|K|>=n) + (4/b1) db^2 sum_{k<=n} P1(|K|>=k) <= (2/n + (4/b1) db^2) chi1``.

    ``tail1(k)`` returns ``P_{beta1}(|K| >= k)``.  For ``n = 0`` the second
    bound is infinite and flagged as skipped.
    """
    if not (beta2 >= beta1 > 0):
        raise ValueError("need beta2 >= beta1 > 0")
    c = 4.0 / beta1 * (beta2 - beta1) ** 2
    bound1 = 2.0 * tail1(n) + c * math.fsum(tail1(k) for k in range(1, n + 1))
    if n == 0:
        return TailComparison(tail2_n, bound1, math.inf, True)
    return TailComparison(tail2_n, bound1, (2.0 / n + c) * chi1)


def dm_chi_bounds_exact(model: LatticeModel, beta1: float, beta2: float, n: int) -> TailComparison:
    law1 = cluster_law(model, beta1)
    law2 = cluster_law(model, beta2)
    return dm_chi_bounds(law1.tail, law2.tail(n) if n > 0 else 1.0, beta1, beta2, n, law1.mean_size())


# -- exact configuration-space helpers ---------------------------------------------


def configuration_cluster_sizes(model: LatticeModel, *, edge_cap: int = 20) -> np.ndarray:
    """``|K|`` of the origin for every edge configuration, in the order of ``configuration_probabilities``."""
    from .exact import iterate_configurations, propagate_labels

    u, v, _ = model.edges
    out = []
    for bits, _, _ in iterate_configurations(model, 0.0, edge_cap=edge_cap):
        lab = propagate_labels(bits, u, v, model.vertex_count)
        out.append((lab == lab[:, :1]).sum(axis=1))
    return np.concatenate(out)


def exhaustive_tree_check(model: LatticeModel, n_targets, *, edge_cap: int = 12) -> int:
    """Number of (configuration, n_target) pairs where the tree verdict differs from ``|K| >= n_target``."""
    adj = adjacency(model)
    sizes = configuration_cluster_sizes(model, edge_cap=edge_cap)
    m = model.edge_count
    bad = 0
    for idx in range(1 << m):
        bits = [(idx >> e) & 1 for e in range(m)]
        for n in n_targets:
            res = explore(adj, bits.__getitem__, n)
            bad += res.reached != (sizes[idx] >= n)
    return bad
