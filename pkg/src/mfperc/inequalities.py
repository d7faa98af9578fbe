"""Exact-model checks of the susceptibility differential inequalities and their ingredients.

All quantities come from the exact oracle, so every check is a deterministic
comparison of two numbers.

* ``differential_bounds``: ``d chi / d beta`` against the bounds built from
  ``(chi, nabla, A, B)``.  Two families are reported.  The *stated* bounds
  carry the factor ``chi (chi - nabla)``.  The *derived* bounds carry
  ``max(chi - nabla, 0)^2``, which is what the Cauchy-Schwarz argument combined with
  the tree-graph estimates actually delivers.  The stated bounds fail for
  small ``beta`` on every model (their right-hand side grows like
  ``1 / beta``), so the two are kept apart.
* ``tree_graph``: the three- and four-point tree-graph bounds entrywise, and
  their summed forms ``E sum_{x,y in K} T(x,y) <= chi nabla`` and
  ``E sum_{a,b,c in K} T(a,b) T(a,c) <= (2A + B) chi``.
* ``phi_lemma``: the lower bound on the boundary functional ``Phi_beta(S)``
  for every ``S`` containing the origin.
* ``integrated_bound``: the finite-volume rendition of the integrated
  susceptibility bound, with the upper integration limit set to the largest
  grid value.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import exact
from .diagrams import diagram_A, diagram_B, nabla
from .lattice import LatticeModel

TREE_GRAPH_MAX_VERTICES = 10
PHI_LEMMA_MAX_VERTICES = 8


@dataclass(frozen=True)
class DifferentialBounds:
    beta: float
    chi: float
    chi_derivative: float
    nabla: float
    A: float
    B: float
    stated_ab: float
    stated_nabla: float
    derived_ab: float
    derived_nabla: float

    def holds(self, which: str, slack: float = 1e-9) -> bool:
        return self.chi_derivative >= getattr(self, which) - slack


def differential_bounds(model: LatticeModel, beta: float) -> DifferentialBounds:
    """``d chi / d beta`` and the four right-hand sides at ``beta > 0``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    rep = exact.exact_report(model, beta)
    T = rep.two_point
    chi, nab, A, B = rep.chi, nabla(T), diagram_A(T), diagram_B(T)
    gap = chi - nab
    b2 = beta * beta
    return DifferentialBounds(
        beta, chi, rep.chi_derivative, nab, A, B,
        stated_ab=chi * gap / (b2 * (2 * A + B)),
        stated_nabla=chi * gap / (3 * b2 * nab * nab),
        derived_ab=max(gap, 0.0) ** 2 / (b2 * (2 * A + B)),
        derived_nabla=max(gap, 0.0) ** 2 / (3 * b2 * nab * nab),
    )


# -- tree-graph bounds -------------------------------------------------------------


@dataclass(frozen=True)
class TreeGraphReport:
    three_point_margin: float
    four_point_margin: float
    pair_sum: float
    pair_bound: float
    triple_sum: float
    triple_bound: float

    def holds(self, tol: float = 1e-12) -> bool:
        return (self.three_point_margin >= -tol and self.four_point_margin >= -tol
                and self.pair_sum <= self.pair_bound * (1 + tol) + tol
                and self.triple_sum <= self.triple_bound * (1 + tol) + tol)


def tree_graph_bounds(T: np.ndarray, origin: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of the three-point and four-point tree-graph inequalities."""
    t = T[origin]
    three = np.einsum("w,wx,wy->xy", t, T, T, optimize=True)
    first = np.einsum("x,xa,xy,yb,yc->abc", t, T, T, T, T, optimize=True)
    four = first + first.transpose(1, 0, 2) + first.transpose(1, 2, 0)
    return three, four


def tree_graph(model: LatticeModel, beta: float) -> TreeGraphReport:
    N = model.vertex_count
    if N > TREE_GRAPH_MAX_VERTICES:
        raise ValueError(f"tree-graph checks are limited to {TREE_GRAPH_MAX_VERTICES} vertices")
    rep = exact.exact_report(model, beta)
    T = rep.two_point
    three_bound, four_bound = tree_graph_bounds(T)
    three = rep.law.three_point()
    four = rep.law.four_point()
    return TreeGraphReport(
        three_point_margin=float((three_bound - three).min()),
        four_point_margin=float((four_bound - four).min()),
        pair_sum=float(np.sum(three * T)),
        pair_bound=rep.chi * nabla(T),
        triple_sum=float(np.einsum("abc,ab,ac->", four, T, T, optimize=True)),
        triple_bound=(2 * diagram_A(T) + diagram_B(T)) * rep.chi,
    )


# -- boundary functional lower bound ----------------------------------------------


@dataclass(frozen=True)
class PhiLemmaReport:
    n_sets: int
    worst_set: tuple
    worst_margin: float
    worst_lhs: float
    worst_rhs: float

    @property
    def holds(self) -> bool:
        return self.worst_margin >= -1e-10 * (1 + abs(self.worst_rhs))


def phi_lower_bound(T: np.ndarray, chi: float, beta: float, S) -> float:
    """``(chi |S| - sum_{u,v in S} T(u,v))^2 / (beta^2 chi sum_{u,v,w in S} T(u,v) T(u,w))``.

    The numerator is squared only when positive; a nonpositive base gives the
    trivial bound 0.
    """
    S = list(S)
    TS = T[np.ix_(S, S)]
    base = chi * len(S) - TS.sum()
    denom = beta**2 * chi * float((TS.sum(axis=1) ** 2).sum())
    return max(base, 0.0) ** 2 / denom


def phi_lemma(model: LatticeModel, beta: float) -> PhiLemmaReport:
    """Exact ``Phi_beta(S)`` against its lower bound for every ``S`` containing the origin."""
    N = model.vertex_count
    if N > PHI_LEMMA_MAX_VERTICES:
        raise ValueError(f"the boundary functional check is limited to {PHI_LEMMA_MAX_VERTICES} vertices")
    if not beta > 0:
        raise ValueError("beta must be positive")
    rep = exact.exact_report(model, beta)
    method = "subsets" if N <= exact.SUBSET_CAP else "auto"
    worst = None
    count = 0
    for r in range(0, N):
        for rest in itertools.combinations(range(1, N), r):
            S = (0,) + rest
            lhs = exact.exact_Phi(model, beta, S, method=method)
            rhs = phi_lower_bound(rep.two_point, rep.chi, beta, S)
            count += 1
            margin = lhs - rhs
            if worst is None or margin < worst[1]:
                worst = (S, margin, lhs, rhs)
    return PhiLemmaReport(count, worst[0], worst[1], worst[2], worst[3])


# -- integrated bound ---------------------------------------------------------------


@dataclass(frozen=True)
class IntegratedBound:
    beta: float
    beta_top: float
    identity_lhs: float
    identity_rhs: float
    identity_error_budget: float
    lhs: float
    rhs: float
    discretization_budget: float

    @property
    def identity_holds(self) -> bool:
        return abs(self.identity_lhs - self.identity_rhs) <= self.identity_error_budget

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - self.discretization_budget


def _trapezoid_with_error(f, a: float, b: float, points: int):
    """Trapezoid value on ``points`` nodes and a Richardson error estimate from the half grid."""
    x = np.linspace(a, b, points)
    y = np.array([f(t) for t in x])
    fine = float(np.trapezoid(y, x))
    coarse = float(np.trapezoid(y[::2], x[::2]))
    return fine, abs(fine - coarse) / 3.0


def integrated_bound(model: LatticeModel, beta: float, beta_top: float, *, points: int = 65) -> IntegratedBound:
    """Finite-volume rendition of the integrated bound, with ``beta_top`` in place of the critical point.

    Identity: ``1/chi(beta) - 1/chi(beta_top) = int chi' / chi^2``.
    Inequality, obtained by integrating the stated bound: ``(1/chi(beta)) (1 + (top - beta) / (3 beta top))
    >= int 1/(3 l^2 nabla_l^2) dl + 1/chi(top)``.  Both integrals use the trapezoid rule on exact values.
    """
    if not 0 < beta < beta_top:
        raise ValueError("need 0 < beta < beta_top")
    if points % 2 == 0:
        points += 1

    def rep(t):
        return exact.exact_report(model, t)

    ident, e1 = _trapezoid_with_error(lambda t: rep(t).chi_derivative / rep(t).chi ** 2, beta, beta_top, points)
    integral, e2 = _trapezoid_with_error(lambda t: 1.0 / (3 * t * t * nabla(rep(t).two_point) ** 2),
                                         beta, beta_top, points)
    chi_b = rep(beta).chi
    chi_t = rep(beta_top).chi
    prefactor = 1.0 + (beta_top - beta) / (3 * beta * beta_top)
    return IntegratedBound(beta, beta_top, 1.0 / chi_b - 1.0 / chi_t, ident, 10 * e1 + 1e-12,
                           prefactor / chi_b, integral + 1.0 / chi_t, 10 * e2 + 1e-12)


def integrated_bound_check_all(model: LatticeModel, betas) -> list[IntegratedBound]:
    betas = sorted(betas)
    top = betas[-1]
    return [integrated_bound(model, b, top) for b in betas[:-1] if b > 0]

