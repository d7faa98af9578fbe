"""Finite transitive weighted graphs.

Every model here is the Cayley graph of a finite abelian group
``Z/r_1 x ... x Z/r_k`` (stored as mixed-radix integers) with a symmetric
weight function on group elements, so ``J(x, y) = J(y - x)``.  Vertex ``0``
is the origin.

Supported kinds:

``torus_nn``
    nearest-neighbour torus ``(Z/side)^d`` with weight ``1/(2d)`` per edge.
``torus_longrange``
    torus with ``J(x) = c_J |x|^{-d-alpha}`` (minimal-image Euclidean norm),
    normalised over the torus.
``hierarchical``
    the ball ``Lambda_n`` of the hierarchical lattice with
    ``J(x) = c_J L^{-(d+alpha) h(x)}``, where ``c_J`` normalises the sum over
    the *infinite* lattice.
``dimer``
    two vertices joined by one edge of weight ``J``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

DEFAULT_VERTEX_CAP = 65536
KINDS = ("torus_nn", "torus_longrange", "hierarchical", "dimer")


class VertexCapError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LatticeModel:
    kind: str
    d: int
    L: int
    n: int | None
    alpha: float | None
    c_J: float
    radices: tuple[int, ...]
    offset_weights: np.ndarray = field(repr=False)
    weight_total_check: float = 1.0

    def __post_init__(self):
        self.offset_weights.setflags(write=False)

    @property
    def vertex_count(self) -> int:
        return int(self.offset_weights.shape[0])

    @property
    def label(self) -> str:
        if self.kind == "hierarchical":
            return f"H(d={self.d},L={self.L},n={self.n},alpha={self.alpha:g})"
        if self.kind == "torus_nn":
            return f"T(d={self.d},side={self.L})"
        if self.kind == "torus_longrange":
            return f"LR(d={self.d},side={self.L},alpha={self.alpha:g})"
        return f"dimer(J={self.offset_weights[1]:g})"

    def params(self) -> dict:
        return {"kind": self.kind, "d": self.d, "L": self.L, "n": self.n, "alpha": self.alpha}

    # -- group arithmetic -------------------------------------------------

    @cached_property
    def _strides(self) -> np.ndarray:
        return np.concatenate([[1], np.cumprod(self.radices[:-1])]).astype(np.int64)

    def digits(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        return (idx[..., None] // self._strides) % np.asarray(self.radices)

    def from_digits(self, digits) -> np.ndarray:
        digits = np.asarray(digits, dtype=np.int64) % np.asarray(self.radices)
        return digits @ self._strides

    def add(self, x, g) -> np.ndarray:
        return self.from_digits(self.digits(x) + self.digits(g))

    def sub(self, y, x) -> np.ndarray:
        """Group difference ``y - x``."""
        return self.from_digits(self.digits(y) - self.digits(x))

    def weight(self, x, y) -> np.ndarray:
        return self.offset_weights[self.sub(y, x)]

    @cached_property
    def translation_table(self) -> np.ndarray:
        """``table[g, x] = x + g``; memory is ``vertex_count**2``."""
        idx = np.arange(self.vertex_count)
        dig = self.digits(idx)
        table = self.from_digits(dig[:, None, :] + dig[None, :, :])
        table.setflags(write=False)
        return table

    @cached_property
    def difference_table(self) -> np.ndarray:
        """``table[x, y] = y - x``."""
        idx = np.arange(self.vertex_count)
        dig = self.digits(idx)
        table = self.from_digits(dig[None, :, :] - dig[:, None, :])
        table.setflags(write=False)
        return table

    # -- edges --------------------------------------------------------------

    @cached_property
    def edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Edges ``(u, v, J)`` with ``u < v``, sorted lexicographically."""
        N = self.vertex_count
        us, vs = np.triu_indices(N, k=1)
        w = self.offset_weights[self.sub(vs, us)]
        keep = w > 0
        out = (us[keep].astype(np.int64), vs[keep].astype(np.int64), w[keep].astype(float))
        for a in out:
            a.setflags(write=False)
        return out

    @property
    def edge_count(self) -> int:
        return int(self.edges[0].shape[0])

    def incident_weight(self) -> float:
        """Weight sum over edges at a vertex *within* the finite model."""
        return float(self.offset_weights.sum())

    # -- symmetry classes ---------------------------------------------------

    @cached_property
    def offset_class(self) -> np.ndarray:
        """Class id of every group element; the two-point function is constant on classes.

        Hierarchical: ultrametric level.  Tori: orbit under coordinate
        permutations and reflections.  Class 0 is always the identity.
        """
        N = self.vertex_count
        if self.kind == "hierarchical":
            cls = hierarchical_level(np.arange(N), self.d, self.L)
        elif self.kind == "dimer":
            cls = np.arange(N)
        else:
            dig = self.digits(np.arange(N))
            folded = np.sort(np.minimum(dig, self.L - dig), axis=1)
            _, cls = np.unique(folded, axis=0, return_inverse=True)
            cls = cls.reshape(-1)
        cls = np.asarray(cls, dtype=np.int64)
        cls.setflags(write=False)
        return cls

    @property
    def class_count(self) -> int:
        return int(self.offset_class.max()) + 1

    @cached_property
    def class_sizes(self) -> np.ndarray:
        return np.bincount(self.offset_class, minlength=self.class_count)

    def matrix_from_row(self, row) -> np.ndarray:
        """Translation-invariant matrix ``M(x, y) = row[y - x]``."""
        row = np.asarray(row)
        return row[self.difference_table]

    def row_from_classes(self, values) -> np.ndarray:
        return np.asarray(values)[self.offset_class]


def hierarchical_level(g, d: int, L: int) -> np.ndarray:
    """Ultrametric level ``h`` of group elements given as indices (0 for the identity).

    Level-1 digits are least significant, so the ball ``Lambda_k`` is the
    index range ``[0, L^{dk})``.
    """
    g = np.asarray(g, dtype=np.int64)
    base = L**d
    level = np.zeros_like(g)
    bound = np.ones_like(g)
    rest = g.copy()
    while np.any(rest > 0):
        mask = rest > 0
        level[mask] += 1
        rest = rest // base
        bound = bound * base
    return level


def hierarchical_normalization(d: int, L: int, alpha: float) -> float:
    """``c_J`` such that ``sum_{x != 0} c_J L^{-(d+alpha) h(x)} = 1`` on the infinite lattice."""
    r = L ** (-alpha)
    return (1.0 - r) / ((1.0 - L ** (-d)) * r)


def shell_size(d: int, L: int, k: int) -> int:
    """Number of points at ultrametric distance exactly ``L^k``."""
    return L ** (d * k) - L ** (d * (k - 1))


def _check_cap(N: int, cap: int):
    if N > cap:
        raise VertexCapError(f"model has {N} vertices, above the cap {cap}")


def build_torus_nn(d: int, side: int, *, vertex_cap: int = DEFAULT_VERTEX_CAP) -> LatticeModel:
    if d < 1:
        raise ValueError("d must be >= 1")
    if side < 3:
        raise ValueError("side must be >= 3 to avoid doubled edges")
    N = side**d
    _check_cap(N, vertex_cap)
    radices = (side,) * d
    J = np.zeros(N)
    strides = [side**i for i in range(d)]
    for s in strides:
        J[s] = 1.0 / (2 * d)
        J[(side - 1) * s] = 1.0 / (2 * d)
    return LatticeModel("torus_nn", d, side, None, None, 1.0 / (2 * d), radices, J, float(J.sum()))


def build_torus_longrange(d: int, side: int, alpha: float, *,
                          vertex_cap: int = DEFAULT_VERTEX_CAP) -> LatticeModel:
    if d < 1 or side < 2:
        raise ValueError("need d >= 1 and side >= 2")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    N = side**d
    _check_cap(N, vertex_cap)
    radices = (side,) * d
    dig = np.array(list(itertools.product(range(side), repeat=d)))[:, ::-1]
    idx = dig @ np.array([side**i for i in range(d)])
    folded = np.minimum(dig, side - dig).astype(float)
    norm = np.sqrt((folded**2).sum(axis=1))
    raw = np.zeros(N)
    nz = norm > 0
    raw[idx[nz]] = norm[nz] ** (-(d + alpha))
    c = 1.0 / raw.sum()
    J = c * raw
    return LatticeModel("torus_longrange", d, side, None, float(alpha), c, radices, J, float(J.sum()))


def build_hierarchical(d: int, L: int, n: int, alpha: float, *,
                       vertex_cap: int = DEFAULT_VERTEX_CAP) -> LatticeModel:
    if d < 1 or L < 2 or n < 1:
        raise ValueError("need d >= 1, L >= 2, n >= 1")
    if not 0 < alpha < d:
        raise ValueError("alpha must lie in (0, d)")
    N = L ** (d * n)
    _check_cap(N, vertex_cap)
    c = hierarchical_normalization(d, L, alpha)
    level = hierarchical_level(np.arange(N), d, L)
    J = np.where(level > 0, c * float(L) ** (-(d + alpha) * level.astype(float)), 0.0)
    total = _infinite_shell_total(d, L, alpha, c)
    return LatticeModel("hierarchical", d, L, n, float(alpha), c, (L,) * (d * n), J, total)


def build_dimer(J: float = 1.0) -> LatticeModel:
    if not J > 0:
        raise ValueError("J must be positive")
    w = np.array([0.0, float(J)])
    return LatticeModel("dimer", 1, 2, None, None, float(J), (2,), w, float(J))


def build_model(kind: str, **params) -> LatticeModel:
    if kind == "torus_nn":
        return build_torus_nn(params["d"], params["L"], **_cap(params))
    if kind == "torus_longrange":
        return build_torus_longrange(params["d"], params["L"], params["alpha"], **_cap(params))
    if kind == "hierarchical":
        return build_hierarchical(params["d"], params["L"], params["n"], params["alpha"], **_cap(params))
    if kind == "dimer":
        return build_dimer(params.get("J", 1.0))
    raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")


def _cap(params):
    return {"vertex_cap": params["vertex_cap"]} if params.get("vertex_cap") else {}


def _infinite_shell_total(d, L, alpha, c) -> float:
    # sum_k (L^{dk} - L^{d(k-1)}) c L^{-(d+alpha)k} = c (1 - L^{-d}) sum_k L^{-alpha k}
    total = 0.0
    k = 1
    r = L ** (-alpha)
    while True:
        term = c * (1.0 - L ** (-d)) * r**k
        total += term
        if term < 1e-17 * total:
            return total
        k += 1


# -- hierarchical coordinates ------------------------------------------------


@dataclass(frozen=True)
class HierarchicalCoord:
    """Digits ``(x_1, ..., x_n)``, each a ``d``-tuple in ``Z/L``; ``x_1`` is the finest level."""

    digits: tuple[tuple[int, ...], ...]
    L: int

    def __post_init__(self):
        for block in self.digits:
            if any(not 0 <= v < self.L for v in block):
                raise ValueError(f"digit out of range in {block} for L={self.L}")

    @property
    def n(self) -> int:
        return len(self.digits)

    def __add__(self, other: "HierarchicalCoord") -> "HierarchicalCoord":
        _check_compatible(self, other)
        return HierarchicalCoord(
            tuple(tuple((a + b) % self.L for a, b in zip(x, y)) for x, y in zip(self.digits, other.digits)),
            self.L,
        )


def _check_compatible(x: HierarchicalCoord, y: HierarchicalCoord):
    if x.L != y.L or x.n != y.n or {len(b) for b in x.digits} != {len(b) for b in y.digits}:
        raise ValueError("coordinates live on different balls")


def encode_coord(coord: HierarchicalCoord) -> int:
    idx = 0
    stride = 1
    for block in coord.digits:
        for v in block:
            idx += v * stride
            stride *= coord.L
    return idx


def decode_coord(index: int, d: int, L: int, n: int) -> HierarchicalCoord:
    if not 0 <= index < L ** (d * n):
        raise ValueError("index outside the ball")
    blocks = []
    for _ in range(n):
        block = []
        for _ in range(d):
            block.append(index % L)
            index //= L
        blocks.append(tuple(block))
    return HierarchicalCoord(tuple(blocks), L)


def ultrametric_distance(x: HierarchicalCoord, y: HierarchicalCoord) -> float:
    _check_compatible(x, y)
    h = 0
    for i, (a, b) in enumerate(zip(x.digits, y.digits), start=1):
        if a != b:
            h = i
    return 0.0 if h == 0 else float(x.L**h)


def boundary_tail_sum(model: LatticeModel, beta: float, n: int | None = None, *,
                      rel_tol: float = 1e-12) -> float:
    """``sum_{||y|| > L^n} (1 - exp(-beta J(y)))`` over the infinite hierarchical lattice.

    Summed shell by shell; stops once the geometric bound on the remainder,
    ``beta c_J sum_{k>K} L^{-alpha k}``, is below ``rel_tol`` times the partial sum.
    """
    if model.kind != "hierarchical":
        raise ValueError("boundary_tail_sum needs a hierarchical model")
    if beta < 0:
        raise ValueError("beta must be >= 0")
    n = model.n if n is None else n
    if n < 0:
        raise ValueError("n must be >= 0")
    if beta == 0:
        return 0.0
    d, L, alpha, c = model.d, model.L, model.alpha, model.c_J
    r = L ** (-alpha)
    total = 0.0
    k = n + 1
    while True:
        total += _shell_term(d, L, alpha, c, beta, k)
        remainder = beta * c * r ** (k + 1) / (1.0 - r)
        if remainder < rel_tol * total:
            return total
        k += 1


def _shell_term(d, L, alpha, c, beta, k) -> float:
    x = beta * c * math.exp(-(d + alpha) * k * math.log(L))
    # count * (1 - e^{-x}) with count = L^{dk}(1 - L^{-d}); written to avoid overflow
    scaled = beta * c * (1.0 - L ** (-d)) * math.exp(-alpha * k * math.log(L))
    if x < 1e-8:
        return scaled * (1.0 - x / 2.0 + x * x / 6.0)
    return scaled * (-math.expm1(-x)) / x
