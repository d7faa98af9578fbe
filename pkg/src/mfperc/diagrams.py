"""Diagrammatic sums of a two-point matrix.

``chi = sum_x T(o,x)``, ``nabla = T^3(o,o)`` and the two six-edge diagrams

    A = sum_x T(o,x) T^2(o,x) T^3(o,x),      B = sum_w T^2(o,w)^3,

computed three ways: from origin rows of matrix powers, by direct
four-index summation of the diagrams pinned at a degree-two vertex (equal to
the row forms by mass transport on transitive models), and on tori by the
DFT of the translation-invariant row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

QUADSUM_CAP = 40


@dataclass(frozen=True, eq=False)
class TwoPointMatrix:
    values: np.ndarray
    origin: int = 0
    stderr: np.ndarray | None = None
    provenance: str = "exact"
    beta: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in ("exact", "monte_carlo"):
            raise ValueError("provenance must be 'exact' or 'monte_carlo'")
        V = self.values
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError("two-point matrix must be square")
        if not np.allclose(V, V.T, atol=1e-12, rtol=0):
            raise ValueError("two-point matrix must be symmetric")


def clean_mc_matrix(values, stderr=None, origin: int = 0, beta=None, meta=None) -> TwoPointMatrix:
    """Clamp to ``[0, 1]``, symmetrise and set the diagonal to 1."""
    V = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    V = 0.5 * (V + V.T)
    np.fill_diagonal(V, 1.0)
    return TwoPointMatrix(V, origin, stderr, "monte_carlo", beta, meta or {})


def _values(T) -> tuple[np.ndarray, int]:
    if isinstance(T, TwoPointMatrix):
        return T.values, T.origin
    return np.asarray(T, dtype=float), 0


def _rows(T):
    M, o = _values(T)
    e = np.zeros(M.shape[0])
    e[o] = 1.0
    r1 = M @ e
    r2 = M @ r1
    r3 = M @ r2
    return r1, r2, r3, o


def chi(T) -> float:
    M, o = _values(T)
    return float(M[o].sum())


def nabla(T) -> float:
    r1, r2, _, _ = _rows(T)
    return float(r1 @ r2)


def nabla_power(T) -> float:
    """``T^3(o,o)`` from the explicit matrix cube."""
    M, o = _values(T)
    return float(np.linalg.matrix_power(M, 3)[o, o])


def diagram_A(T) -> float:
    r1, r2, r3, _ = _rows(T)
    return float(np.sum(r1 * r2 * r3))


def diagram_B(T) -> float:
    _, r2, _, _ = _rows(T)
    return float(np.sum(r2**3))


def nabla_triple_sum(T) -> float:
    M, o = _values(T)
    return float(np.einsum("x,xy,y->", M[o], M, M[:, o], optimize=False))


def _check_quad(M):
    if M.shape[0] > QUADSUM_CAP:
        raise ValueError(f"four-index sums are limited to {QUADSUM_CAP} vertices")


def diagram_A_quadsum(T) -> float:
    """``sum_{v,w,x,y} T(o,w)T(o,v)T(w,x)T(v,x)T(v,y)T(y,x)``."""
    M, o = _values(T)
    _check_quad(M)
    t = M[o]
    return float(np.einsum("w,v,wx,vx,vy,yx->", t, t, M, M, M, M, optimize=False))


def diagram_B_quadsum(T) -> float:
    """``sum_{v,w,x,y} T(o,w)T(o,v)T(w,x)T(v,x)T(w,y)T(v,y)``."""
    M, o = _values(T)
    _check_quad(M)
    t = M[o]
    return float(np.einsum("w,v,wx,vx,wy,vy->", t, t, M, M, M, M, optimize=False))


def _torus_grid(model, row):
    return np.asarray(row, dtype=float).reshape(model.radices[::-1])


def fourier_diagrams(model, tau_row) -> dict:
    """``nabla``, ``A``, ``B`` and ``min tau_hat`` from the DFT of the origin row of a torus.

    Convolutions of ``tau_hat**k`` are evaluated at zero through the inverse
    transform, ``[f * g](0) = sum_x f_check(x) g_check(x)``.
    """
    if model.kind not in ("torus_nn", "torus_longrange"):
        raise ValueError("Fourier route needs a torus model")
    grid = _torus_grid(model, tau_row)
    tau_hat = np.fft.fftn(grid)
    if np.abs(tau_hat.imag).max() > 1e-9 * (1 + np.abs(tau_hat).max()):
        raise ValueError("row is not symmetric: transform is not real")
    th = tau_hat.real

    def inv(f):
        return np.fft.ifftn(f).real

    t1, t2, t3 = inv(th), inv(th**2), inv(th**3)
    return {
        "nabla": float(np.sum(t1 * t2)),
        "A": float(np.sum(t1 * t2 * t3)),
        "B": float(np.sum(t2**3)),
        "min_tau_hat": float(th.min()),
    }


@dataclass(frozen=True)
class DiagramReport:
    chi: float
    nabla: float
    A: float
    B: float
    A_quad: float | None = None
    B_quad: float | None = None
    fourier_nabla: float | None = None
    fourier_A: float | None = None
    fourier_B: float | None = None
    min_tau_hat: float | None = None
    nabla_power: float | None = None
    max_cross_route_discrepancy: float = 0.0

    def chain(self) -> tuple[float, float, float]:
        return self.B, self.A, self.nabla**2

    def chain_holds(self, rel_tol: float = 1e-10) -> bool:
        b, a, n2 = self.chain()
        return b <= a * (1 + rel_tol) + rel_tol and a <= n2 * (1 + rel_tol) + rel_tol


def diagram_report(T, model=None, *, quadsum: bool | None = None) -> DiagramReport:
    M, o = _values(T)
    N = M.shape[0]
    base = dict(chi=chi(T), nabla=nabla(T), A=diagram_A(T), B=diagram_B(T), nabla_power=nabla_power(T))
    disc = [abs(base["nabla"] - base["nabla_power"]) / max(1.0, base["nabla"])]
    if quadsum is None:
        quadsum = N <= 16
    if quadsum:
        base["A_quad"] = diagram_A_quadsum(T)
        base["B_quad"] = diagram_B_quadsum(T)
        disc += [abs(base["A_quad"] - base["A"]) / max(1.0, base["A"]),
                 abs(base["B_quad"] - base["B"]) / max(1.0, base["B"])]
    if model is not None and model.kind in ("torus_nn", "torus_longrange"):
        f = fourier_diagrams(model, M[o])
        base.update(fourier_nabla=f["nabla"], fourier_A=f["A"], fourier_B=f["B"], min_tau_hat=f["min_tau_hat"])
        disc += [abs(f[k] - base[k]) / max(1.0, base[k]) for k in ("nabla", "A", "B")]
    return DiagramReport(**base, max_cross_route_discrepancy=float(max(disc)))
