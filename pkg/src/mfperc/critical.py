"""Finite-scale critical analysis on hierarchical balls.

For the ball ``Lambda_n`` every vertex sees the same infinite-lattice
exterior, so ``phi_beta(Lambda_n, 0) = tail(beta, n) * chi_n(beta)`` where
``chi_n`` is the susceptibility of ``Lambda_n`` as a standalone model.
``beta_n`` solves ``phi = 1/2``; ``beta_c`` is estimated by geometric
extrapolation of the ``beta_n`` sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .diagrams import nabla
from .estimators import McEstimate, Moments, mc_chi, mc_chi_coupled, mc_two_point, sample_chi
from .lattice import LatticeModel, boundary_tail_sum, build_hierarchical
from .percolation import draw_batch, make_rng

EXACT_MAX_VERTICES = 8


@dataclass(frozen=True)
class Family:
    d: int
    L: int
    alpha: float

    def ball(self, n: int, **kw) -> LatticeModel:
        return build_hierarchical(self.d, self.L, n, self.alpha, **kw)


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    n_range: tuple
    extra: dict = field(default_factory=dict)


def linear_fit(x, y, n_range=None) -> ScalingFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 4:
        raise ValueError("a scaling fit needs at least 4 points")
    A = np.stack([x, np.ones_like(x)], axis=1)
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    sst = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid**2).sum()) / sst if sst > 0 else 1.0
    return ScalingFit(float(slope), float(intercept), r2, tuple(n_range) if n_range is not None else (x[0], x[-1]))


# -- phi on balls ---------------------------------------------------------------


class _ChiBall:
    """``chi_n(beta)`` for one ball: exact when small, else a fixed set of coupled samples."""

    def __init__(self, model: LatticeModel, beta_hi: float, n_samples: int, seed: int):
        self.model = model
        self.beta_hi = beta_hi
        self.n_samples = n_samples
        self.seed = seed
        self.exact = model.vertex_count <= EXACT_MAX_VERTICES
        self._batches = None

    def _load(self):
        if self._batches is None:
            from .percolation import chunk_size

            B = chunk_size(self.model, self.beta_hi)
            self._batches = [draw_batch(self.model, self.beta_hi, min(B, self.n_samples - s),
                                        make_rng(self.seed, 11, self.model.n, c), s)
                             for c, s in enumerate(range(0, self.n_samples, B))]
        return self._batches

    def __call__(self, beta: float) -> McEstimate:
        if self.exact:
            return McEstimate(exact.exact_chi(self.model, beta), 0.0, max(self.n_samples, 100), self.seed)
        if beta > self.beta_hi:
            raise ValueError("beta above the coupled sample level")
        parts = [Moments.of(sample_chi(b.labels(beta))) for b in self._load()]
        return Moments.pool(parts).estimates(self.seed)[0]


def phi_ball(family: Family, beta: float, n: int, budget: int = 20_000, seed: int = 0, *,
             threads: int = 1) -> McEstimate:
    """``tail(beta, n) * chi_n(beta)``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    model = family.ball(n)
    if beta == 0:
        return McEstimate(0.0, 0.0, max(budget, 100), seed)
    tail = boundary_tail_sum(model, beta, n)
    if model.vertex_count <= EXACT_MAX_VERTICES:
        chi = McEstimate(exact.exact_chi(model, beta), 0.0, max(budget, 100), seed)
    else:
        chi = mc_chi(model, beta, budget, seed, threads=threads, stream=13)
    return McEstimate(tail * chi.value, tail * chi.stderr, chi.n_samples, seed)


def beta_n_solve(family: Family, n: int, target: float = 0.5, tol: float = 1e-4, *,
                 budget: int = 20_000, seed: int = 0, bracket=(0.0, 4.0), max_widen: int = 6,
                 stderr_target: float | None = None, max_budget: int = 4_000_000, threads: int = 1) -> dict:
    """Root of ``phi_beta(Lambda_n, 0) = target`` on a coupled, deterministic estimate.

    Bisection runs on one set of coupled samples drawn at the upper bracket and
    stops once ``|phi - target| < tol`` or the bracket is below 1e-6; levels
    small enough for the exact oracle always bisect to the 1e-6 bracket.
    With ``stderr_target`` the root is then refined: ``phi`` is estimated on a
    grid around the root from one larger set of coupled samples (sized from
    the first-stage standard error) and the root of the monotone piecewise
    linear interpolant is returned.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    model = family.ball(n)
    lo, hi = bracket
    for _ in range(max_widen + 1):
        chi = _ChiBall(model, hi, budget, seed)
        if boundary_tail_sum(model, hi, n) * chi(hi).value > target:
            break
        lo, hi = hi, 2 * hi
    else:
        raise RuntimeError(f"could not bracket the root for n={n}")

    def phi(b):
        est = chi(b)
        t = boundary_tail_sum(model, b, n) if b > 0 else 0.0
        return t * est.value, t * est.stderr

    iters = 0
    root = 0.5 * (lo + hi)
    while hi - lo > 1e-6:
        root = 0.5 * (lo + hi)
        val, _ = phi(root)
        iters += 1
        if not chi.exact and abs(val - target) < tol:
            # deterministic levels always run down to the 1e-6 bracket
            break
        if val <= target:
            lo = root
        else:
            hi = root
    else:
        root = 0.5 * (lo + hi)
    val, se = phi(root)
    out = {"n": n, "beta_n": root, "phi": val, "phi_stderr": se, "iterations": iters,
           "exact": chi.exact, "n_samples": budget, "refined": False}
    if stderr_target is None or chi.exact or se <= stderr_target:
        return out
    size = int(min(max_budget, math.ceil(1.2 * budget * (se / stderr_target) ** 2)))
    return _refine_root(model, n, target, out, size, seed, threads)


def _refine_root(model, n, target, first, size, seed, threads, points: int = 9, max_shift: int = 4):
    """Grid refinement of a first-stage root with ``size`` coupled samples."""
    root = first["beta_n"]
    slope = _phi_slope(model, n, root, target)
    half = 6.0 * first["phi_stderr"] / slope
    for _ in range(max_shift):
        grid = np.linspace(max(root - half, 1e-9), root + half, points)
        chis = mc_chi_coupled(model, grid, size, seed, threads=threads, stream=23)
        tails = np.array([boundary_tail_sum(model, b, n) for b in grid])
        vals = tails * np.array([c.value for c in chis])
        errs = tails * np.array([c.stderr for c in chis])
        if vals[0] > target:
            root -= 1.5 * half
            continue
        if vals[-1] < target:
            root += 1.5 * half
            continue
        k = int(np.searchsorted(vals, target))
        k = min(max(k, 1), points - 1)
        w = (target - vals[k - 1]) / (vals[k] - vals[k - 1]) if vals[k] > vals[k - 1] else 0.5
        beta = float(grid[k - 1] + w * (grid[k] - grid[k - 1]))
        val = float(vals[k - 1] + w * (vals[k] - vals[k - 1]))
        se = float(max(errs[k - 1], errs[k]))
        return {**first, "beta_n": beta, "phi": val, "phi_stderr": se, "n_samples": size, "refined": True,
                "first_stage": {"beta_n": first["beta_n"], "phi": first["phi"],
                                "phi_stderr": first["phi_stderr"], "n_samples": first["n_samples"]}}
    raise RuntimeError(f"refinement grid failed to bracket the root for n={n}")


def _phi_slope(model, n, beta, target, h=1e-3):
    """Lower bound ``target * d log(tail) / d beta`` on ``d phi / d beta`` near the root."""
    t0 = boundary_tail_sum(model, beta - h, n)
    t1 = boundary_tail_sum(model, beta + h, n)
    return max(target * (t1 - t0) / (2 * h) / max(boundary_tail_sum(model, beta, n), 1e-300), 1e-3)


def beta_c_extrapolate(beta_n: dict[int, float], n_fit: int = 4) -> dict:
    """``beta_nmax + delta * r / (1 - r)`` with ``r`` fitted to the last consecutive differences."""
    ns = sorted(beta_n)
    if len(ns) < 3:
        raise ValueError("need at least three beta_n values")
    diffs = np.array([beta_n[b] - beta_n[a] for a, b in zip(ns[:-1], ns[1:])])
    use = diffs[-n_fit:]
    if np.all(use > 0):
        k = np.arange(len(use))
        r = float(np.exp(np.polyfit(k, np.log(use), 1)[0])) if len(use) >= 2 else 0.5
    else:
        r = float("nan")
    if not (0 < r < 1):
        r_used = 0.9
    else:
        r_used = r
    last = float(diffs[-1])
    est = beta_n[ns[-1]] + max(last, 0.0) * r_used / (1 - r_used)
    return {"beta_c": float(est), "ratio": r, "ratio_used": r_used, "last_increment": last}


def correlation_length(family: Family, beta: float, beta_n_table: dict[int, float]) -> float:
    """``L^{n(beta)}`` with ``n(beta) = min{n : beta <= beta_n}``; ``inf`` above the table."""
    if not beta_n_table:
        raise ValueError("empty beta_n table")
    for n in sorted(beta_n_table):
        if beta <= beta_n_table[n]:
            return float(family.L**n)
    return math.inf


# -- scaling checks ------------------------------------------------------------


def chi_ball(family: Family, n: int, beta: float, budget: int, seed: int, threads: int = 1) -> McEstimate:
    model = family.ball(n)
    if model.vertex_count <= EXACT_MAX_VERTICES:
        return McEstimate(exact.exact_chi(model, beta), 0.0, max(budget, 100), seed)
    return mc_chi(model, beta, budget, seed, threads=threads, stream=17)


def nabla_ball(family: Family, n: int, beta: float, budget: int, seed: int, threads: int = 1) -> float:
    model = family.ball(n)
    if model.vertex_count <= EXACT_MAX_VERTICES:
        return nabla(exact.exact_two_point(model, beta))
    return nabla(mc_two_point(model, beta, budget, seed, threads=threads, stream=19))


def scaling_fit_chi(family: Family, beta: float, n_range, budget: int = 20_000, seed: int = 0, *,
                    threads: int = 1) -> ScalingFit:
    ns = list(n_range)
    chis = {n: chi_ball(family, n, beta, budget, seed, threads) for n in ns}
    fit = linear_fit(ns, [math.log(chis[n].value) for n in ns], (ns[0], ns[-1]))
    return ScalingFit(fit.slope, fit.intercept, fit.r_squared, fit.n_range,
                      {"chi": {n: chis[n].value for n in ns}, "stderr": {n: chis[n].stderr for n in ns},
                       "target_slope": family.alpha * math.log(family.L)})


def nabla_growth_check(family: Family, beta: float, n_range, budget: int = 20_000, seed: int = 0, *,
                       threads: int = 1) -> ScalingFit:
    """Growth of ``nabla_n`` and the regime it matches: bounded, linear in ``n``, or exponential."""
    ns = list(n_range)
    vals = {n: nabla_ball(family, n, beta, budget, seed, threads) for n in ns}
    y = np.log([vals[n] for n in ns])
    fit = linear_fit(ns, y, (ns[0], ns[-1]))
    ratio = max(vals.values()) / min(vals.values())
    lin = linear_fit(np.log(np.array(ns) + 1.0), y)
    if ratio <= 2.0:
        regime = "bounded"
    elif lin.r_squared > fit.r_squared:
        regime = "linear"
    else:
        regime = "exponential"
    d, a, L = family.d, family.alpha, family.L
    return ScalingFit(fit.slope, fit.intercept, fit.r_squared, fit.n_range,
                      {"nabla": vals, "max_over_min": ratio, "regime": regime,
                       "expected_regime": "bounded" if 3 * a < d else ("linear" if 3 * a == d else "exponential"),
                       "target_slope": max(3 * a - d, 0.0) * math.log(L)})


def correlation_length_trend(family: Family, beta_n_table: dict[int, float], beta_c: float,
                             betas=None) -> ScalingFit:
    """Fit ``log xi`` against ``log(beta_c - beta)``; default grid is the ``beta_n`` values."""
    if betas is None:
        betas = [beta_n_table[n] for n in sorted(beta_n_table)]
    betas = [b for b in betas if b < beta_c]
    xi = [correlation_length(family, b, beta_n_table) for b in betas]
    x = np.log(beta_c - np.array(betas))
    y = np.log(xi)
    fit = linear_fit(x, y)
    a, d = family.alpha, family.d
    mf = np.array(xi) * (beta_c - np.array(betas)) ** (1.0 / a)
    return ScalingFit(fit.slope, fit.intercept, fit.r_squared, fit.n_range,
                      {"target_slope": -1.0 / a, "alt_target_slope": -1.0 / (2 * d - 5 * a) if a > d / 3 else None,
                       "xi": dict(zip(betas, xi)), "mean_field_constant": float(mf.min())})


@dataclass
class CriticalEstimate:
    family: Family
    beta_n: dict
    beta_c_estimate: float
    xi_table: dict
    chi_table: dict
    solver: dict = field(default_factory=dict)
    extrapolation: dict = field(default_factory=dict)


def critical_scan(family: Family, n_max: int, *, budget: int = 20_000, seed: int = 0,
                  tol: float = 1e-4, stderr_target: float | None = None, threads: int = 1) -> CriticalEstimate:
    solver = {}
    beta_n = {}
    for n in range(1, n_max + 1):
        res = beta_n_solve(family, n, tol=tol, budget=budget, seed=seed, stderr_target=stderr_target,
                           threads=threads)
        solver[n] = res
        beta_n[n] = res["beta_n"]
    ext = beta_c_extrapolate(beta_n)
    bc = max(ext["beta_c"], max(beta_n.values()))
    xi = {b: correlation_length(family, b, beta_n) for b in beta_n.values()}
    return CriticalEstimate(family, beta_n, bc, xi, {}, solver, ext)
