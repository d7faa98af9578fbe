"""Positive semidefinite matrices, Hadamard products and the normalised trace.

The symmetric eigendecomposition is the only PSD test used anywhere.  The
default tolerance is ``1e-10 * (1 + ||M||_F)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_DIM = 4096
ASYMMETRY_TOL = 1e-12


class EigenSolverError(RuntimeError):
    pass


class NotPsdError(ValueError):
    pass


def default_tol(M: np.ndarray) -> float:
    return 1e-10 * (1.0 + float(np.linalg.norm(M)))


def as_symmetric(M) -> np.ndarray:
    """Validate symmetry and return the symmetrised float copy."""
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    if M.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {M.shape[0]} above {MAX_DIM}")
    scale = 1.0 + (np.abs(M).max() if M.size else 0.0)
    if M.size and np.abs(M - M.T).max() > ASYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class PsdCertificate:
    min_eigenvalue: float
    tolerance: float
    verdict: str

    @property
    def psd(self) -> bool:
        return self.verdict in ("psd", "pd")


def _eigh(M):
    try:
        return np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigenSolverError(str(exc)) from exc


def _eigvalsh(M):
    try:
        return np.linalg.eigvalsh(M)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise EigenSolverError(str(exc)) from exc


def is_psd(M, tol: float | None = None) -> PsdCertificate:
    M = as_symmetric(M)
    tol = default_tol(M) if tol is None else float(tol)
    lam = float(_eigvalsh(M)[0]) if M.size else 0.0
    if lam > tol:
        verdict = "pd"
    elif lam >= -tol:
        verdict = "psd"
    else:
        verdict = "not_psd"
    return PsdCertificate(lam, tol, verdict)


def hadamard(S, T) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    if S.shape != T.shape:
        raise ValueError(f"shape mismatch {S.shape} vs {T.shape}")
    return S * T


def principal_sqrt(T, tol: float | None = None) -> np.ndarray:
    T = as_symmetric(T)
    tol = default_tol(T) if tol is None else float(tol)
    lam, V = _eigh(T)
    if lam.size and lam[0] < -tol:
        raise NotPsdError(f"eigenvalue {lam[0]:.3e} below -{tol:.1e}")
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def check_schur(S, T, tol: float | None = None) -> PsdCertificate:
    for M in (S, T):
        if not is_psd(M, 1e-10 if tol is None else tol).psd:
            raise NotPsdError("Schur check needs psd inputs")
    return is_psd(hadamard(S, T), tol)


def commutator_norm(S, T) -> float:
    S = np.asarray(S)
    T = np.asarray(T)
    return float(np.linalg.norm(S @ T - T @ S))


def check_ando(S, T, commute_tol: float = 1e-10, tol: float | None = None) -> PsdCertificate:
    """Certificate for ``S o T - (ST)^{1/2} o (ST)^{1/2}`` with commuting psd ``S, T``."""
    S = as_symmetric(S)
    T = as_symmetric(T)
    scale = max(np.linalg.norm(S) * np.linalg.norm(T), 1e-300)
    if commutator_norm(S, T) > commute_tol * scale:
        raise ValueError("inputs do not commute")
    ST = S @ T
    ST = 0.5 * (ST + ST.T)
    lam, V = _eigh(ST)
    # eigenvalues below the rounding floor of ST are zero; their square roots would be pure noise
    floor = ST.shape[0] * np.finfo(float).eps * max(np.abs(lam).max(), 1e-300)
    if lam.min() < -1e-8 * (1 + np.linalg.norm(ST)):
        raise NotPsdError("product of commuting psd inputs is not psd")
    root = np.sqrt(np.where(lam > floor, lam, 0.0))
    R = (V * root) @ V.T
    R = 0.5 * (R + R.T)
    return is_psd(hadamard(S, T) - hadamard(R, R), tol)


def check_ando_power(T, tol: float | None = None) -> PsdCertificate:
    """Certificate for ``T o T^3 - T^2 o T^2``."""
    T = as_symmetric(T)
    T2 = T @ T
    T3 = T2 @ T
    D = hadamard(T, 0.5 * (T3 + T3.T)) - hadamard(T2, T2)
    return is_psd(0.5 * (D + D.T), tol)


def check_block_equiv(S, T, X, tol: float = 1e-9) -> tuple[bool, bool]:
    """``([[S, X], [X^T, T]] psd, S - X T^{-1} X^T psd)`` for positive definite ``T``."""
    S = as_symmetric(S)
    T = as_symmetric(T)
    X = np.asarray(X, dtype=float)
    if is_psd(T, tol).verdict != "pd":
        raise NotPsdError("T must be positive definite")
    block = np.block([[S, X], [X.T, T]])
    schur = S - X @ np.linalg.solve(T, X.T)
    return is_psd(block, tol).psd, is_psd(0.5 * (schur + schur.T), tol).psd


def block_margins(S, T, X) -> tuple[float, float]:
    S = as_symmetric(S)
    T = as_symmetric(T)
    X = np.asarray(X, dtype=float)
    block = np.block([[S, X], [X.T, T]])
    schur = S - X @ np.linalg.solve(T, X.T)
    return float(_eigvalsh(block)[0]), float(_eigvalsh(0.5 * (schur + schur.T))[0])


def check_block_diff(S, T, tol: float | None = None) -> tuple[PsdCertificate, PsdCertificate]:
    """Certificates for ``[[S, T], [T, S]]`` and ``S - T``."""
    S = as_symmetric(S)
    T = as_symmetric(T)
    if S.shape != T.shape:
        raise ValueError("shape mismatch")
    return is_psd(np.block([[S, T], [T, S]]), tol), is_psd(S - T, tol)


# -- invariant matrices and the normalised trace ---------------------------------


def is_invariant(M, model, tol: float = 1e-12) -> bool:
    """``M(x, y)`` depends only on ``y - x`` in the model's group."""
    M = np.asarray(M)
    row = M[0]
    return bool(np.abs(M - row[model.difference_table]).max() <= tol * (1 + np.abs(M).max()))


def normalized_trace(T, origin: int = 0) -> float:
    return float(np.asarray(T)[origin, origin])


def tracial_checks(S, T, model, origin: int = 0) -> dict:
    """Numerical versions of the tracial-state properties for invariant ``S, T``."""
    S = np.asarray(S, dtype=float)
    T = np.asarray(T, dtype=float)
    if not (is_invariant(S, model) and is_invariant(T, model)):
        raise ValueError("tracial checks need translation-invariant inputs")
    tr = normalized_trace
    a, b = 0.7, -1.3
    lin = abs(tr(a * S + b * T, origin) - (a * tr(S, origin) + b * tr(T, origin)))
    ident = tr(np.eye(S.shape[0]), origin)
    pos = tr(T @ T.T, origin)
    zero_iff = (pos <= 1e-12) == (np.abs(T).max() <= 1e-12)
    comm = abs(tr(S @ T, origin) - tr(T @ S, origin))
    return {
        "linearity_error": lin,
        "trace_identity": ident,
        "positivity": pos,
        "faithful": bool(pos >= -1e-12 and zero_iff),
        "commutation_error": comm,
        "pass": bool(lin <= 1e-12 * (1 + abs(tr(S, origin)) + abs(tr(T, origin)))
                     and ident == 1.0 and pos >= -1e-12 and zero_iff
                     and comm <= 1e-10 * (1 + abs(tr(S @ T, origin)))),
    }


def check_fejer(S, T, model, origin: int = 0, tol: float = 1e-10) -> float:
    """``Tr(ST)`` for invariant psd ``S, T``."""
    if not (is_invariant(S, model, 1e-9) and is_invariant(T, model, 1e-9)):
        raise ValueError("Fejer check needs invariant inputs")
    for M in (S, T):
        if not is_psd(M, tol * (1 + np.linalg.norm(M))).psd:
            raise NotPsdError("Fejer check needs psd inputs")
    return float(np.asarray(S)[origin] @ np.asarray(T)[:, origin])


# -- random instances ---------------------------------------------------------


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    G = rng.standard_normal((rank or n, n))
    M = G.T @ G
    return 0.5 * (M + M.T)


def random_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def commuting_psd_pair(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    Q = random_orthogonal(rng, n)
    a = rng.exponential(size=n) * (rng.random(n) > 0.2)
    b = rng.exponential(size=n) * (rng.random(n) > 0.2)
    S = (Q * a) @ Q.T
    T = (Q * b) @ Q.T
    return 0.5 * (S + S.T), 0.5 * (T + T.T)


def invariant_psd(rng: np.random.Generator, model) -> np.ndarray:
    """``A A^T`` for a random translation-invariant ``A``; invariant and psd."""
    A = model.matrix_from_row(rng.standard_normal(model.vertex_count))
    M = A @ A.T
    return 0.5 * (M + M.T)
