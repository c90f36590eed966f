"""Matrix pseudo-polynomials, Hermitian spectral fields and Kronecker group indexing.

A pseudo-polynomial of size ``m`` and order ``n`` is the Hermitian matrix function

    Sigma(theta) = S_0 + 1/2 * sum_{t=1..n} (S_t exp(-i t theta) + S_t^T exp(i t theta))

with real ``S_t`` and symmetric ``S_0``. All frequency-domain work happens on a
uniform grid ``theta_g = -pi + 2 pi g / G``.

Component ``(h, k)`` of a Kronecker-structured vector (module ``h``, node ``k``)
sits at index ``h * m2 + k``. Indices are zero-based throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "FreqGrid",
    "PseudoPoly",
    "SpectralField",
    "KroneckerSupport",
    "GroupIndex",
    "evaluate",
    "fourier_coefficients",
    "invert_field",
    "min_grid_eigenvalue",
    "build_group_index",
    "kron_support",
]


@dataclass(frozen=True)
class FreqGrid:
    """Uniform frequency grid on [-pi, pi) with ``size`` points (power of two)."""

    size: int = 256

    def __post_init__(self):
        G = self.size
        if G < 2 or G & (G - 1):
            raise ValueError(f"grid size must be a power of two >= 2, got {G}")

    @cached_property
    def theta(self) -> np.ndarray:
        return -np.pi + 2.0 * np.pi * np.arange(self.size) / self.size

    def phases(self, n: int) -> np.ndarray:
        """``exp(-i t theta_g)`` for t = 0..n, shape (G, n+1)."""
        return np.exp(-1j * np.outer(self.theta, np.arange(n + 1)))


class PseudoPoly:
    """Coefficients ``S_0..S_n`` of a real matrix pseudo-polynomial.

    ``S_0`` is rebuilt from its lower triangle, so it is exactly symmetric no
    matter what was passed in the upper triangle.
    """

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[1] != c.shape[2]:
            raise ValueError(f"coefficients must have shape (n+1, m, m), got {c.shape}")
        low = np.tril(c[0])
        c[0] = low + np.tril(low, -1).T
        self.coeffs = c

    @property
    def m(self) -> int:
        return self.coeffs.shape[1]

    @property
    def n(self) -> int:
        return self.coeffs.shape[0] - 1

    @classmethod
    def identity(cls, m: int, n: int = 0) -> "PseudoPoly":
        c = np.zeros((n + 1, m, m))
        c[0] = np.eye(m)
        return cls(c)

    @classmethod
    def zeros(cls, m: int, n: int = 0) -> "PseudoPoly":
        return cls(np.zeros((n + 1, m, m)))

    def copy(self) -> "PseudoPoly":
        return PseudoPoly(self.coeffs.copy())

    def _padded(self, other):
        if self.m != other.m:
            raise ValueError("pseudo-polynomials of different sizes")
        n = max(self.n, other.n)
        a = np.zeros((n + 1, self.m, self.m))
        b = np.zeros_like(a)
        a[: self.n + 1] = self.coeffs
        b[: other.n + 1] = other.coeffs
        return a, b

    def __add__(self, other):
        if not isinstance(other, PseudoPoly):
            return NotImplemented
        a, b = self._padded(other)
        return PseudoPoly(a + b)

    def __sub__(self, other):
        if not isinstance(other, PseudoPoly):
            return NotImplemented
        a, b = self._padded(other)
        return PseudoPoly(a - b)

    def __mul__(self, a):
        return PseudoPoly(float(a) * self.coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        return f"PseudoPoly(m={self.m}, n={self.n})"

    def laurent(self) -> np.ndarray:
        """Two-sided coefficients ``Q_{-n}..Q_n`` of exp(-i s theta), shape (2n+1, m, m)."""
        n = self.n
        Q = np.empty((2 * n + 1, self.m, self.m))
        Q[n] = self.coeffs[0]
        for t in range(1, n + 1):
            Q[n + t] = 0.5 * self.coeffs[t]
            Q[n - t] = 0.5 * self.coeffs[t].T
        return Q


@dataclass
class SpectralField:
    """Values of a Hermitian matrix function on a :class:`FreqGrid`, shape (G, m, m)."""

    grid: FreqGrid
    values: np.ndarray

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    def hermitian_defect(self) -> float:
        v = self.values
        scale = max(np.abs(v).max(), 1.0)
        return float(np.abs(v - np.conj(np.swapaxes(v, -1, -2))).max() / scale)


def evaluate(poly: PseudoPoly, grid: FreqGrid) -> SpectralField:
    ph = grid.phases(poly.n)[:, 1:]
    half = np.einsum("gt,tij->gij", ph, 0.5 * poly.coeffs[1:])
    vals = poly.coeffs[0] + half + np.conj(np.swapaxes(half, -1, -2))
    return SpectralField(grid, vals)


def fourier_coefficients(field: SpectralField, n: int) -> np.ndarray:
    """Return ``C_t = (1/2pi) int F(theta) exp(i t theta) dtheta`` for t = 0..n.

    Uses the rectangle rule on the grid (exact for trigonometric polynomials of
    degree < G). Imaginary residue is discarded and ``C_0`` is symmetrized.
    """
    G = field.grid.size
    if 2 * n >= G:
        raise ValueError(f"grid too coarse: need G > 2n, got G={G}, n={n}")
    ph = np.conj(field.grid.phases(n))
    C = np.einsum("gt,gij->tij", ph, field.values).real / G
    C[0] = 0.5 * (C[0] + C[0].T)
    return C


def coefficients_to_poly(C: np.ndarray) -> PseudoPoly:
    """Inverse of ``fourier_coefficients(evaluate(p))``: S_0 = C_0, S_t = 2 C_t."""
    S = np.array(C, dtype=float)
    S[1:] *= 2.0
    return PseudoPoly(S)


def invert_field(field: SpectralField) -> SpectralField:
    vals = field.values
    try:
        inv = np.linalg.inv(vals)
    except np.linalg.LinAlgError:
        inv = None
    if inv is None or not np.all(np.isfinite(inv)):
        cond = np.linalg.cond(vals)
        g = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise np.linalg.LinAlgError(
            f"spectral field is singular at theta={field.grid.theta[g]:.6g} (grid index {g})"
        )
    inv = 0.5 * (inv + np.conj(np.swapaxes(inv, -1, -2)))
    return SpectralField(field.grid, inv)


def min_grid_eigenvalue(field: SpectralField) -> float:
    return float(np.linalg.eigvalsh(field.values).min())


@dataclass
class KroneckerSupport:
    """Binary symmetric adjacency matrices for modules (E1) and nodes (E2)."""

    E1: np.ndarray
    E2: np.ndarray

    def __post_init__(self):
        self.E1 = np.asarray(self.E1).astype(np.int8)
        self.E2 = np.asarray(self.E2).astype(np.int8)
        for name, E in (("E1", self.E1), ("E2", self.E2)):
            if E.ndim != 2 or E.shape[0] != E.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.array_equal(E, E.T):
                raise ValueError(f"{name} must be symmetric")
            if not np.all(np.diag(E) == 1):
                raise ValueError(f"{name} must have unit diagonal")
            if not np.all((E == 0) | (E == 1)):
                raise ValueError(f"{name} must be binary")

    @property
    def m1(self) -> int:
        return self.E1.shape[0]

    @property
    def m2(self) -> int:
        return self.E2.shape[0]

    @classmethod
    def full(cls, m1: int, m2: int) -> "KroneckerSupport":
        return cls(np.ones((m1, m1)), np.ones((m2, m2)))


def kron_support(ks: KroneckerSupport) -> np.ndarray:
    return np.kron(ks.E1, ks.E2).astype(np.int8)


def group_alpha(h: int, k: int, j: int, l: int, n: int) -> int:
    """Parameter count of the group for tuple (h, k, j, l) with h >= j, k >= l."""
    if h == j and k == l:
        return n + 1
    if h == j or k == l:
        return 2 * n + 1
    return 4 * n + 2


@dataclass
class GroupIndex:
    """Partition of the free coefficients of a size m1*m2 pseudo-polynomial into groups.

    One group per tuple ``(h, k, j, l)`` with ``h >= j`` and ``k >= l``. Parameters are
    laid out contiguously group by group, so a parameter vector ``x`` has
    ``x[offsets[g]:offsets[g+1]]`` as the entries of group ``g``. Entries of ``S_0`` are
    stored once (lower triangle).
    """

    m1: int
    m2: int
    n: int
    tuples: np.ndarray  # (T, 4) rows (h, k, j, l)
    alpha: np.ndarray  # (T,)
    offsets: np.ndarray  # (T+1,)
    pos_t: np.ndarray  # (P,)
    pos_row: np.ndarray
    pos_col: np.ndarray
    lam_pairs: list = field(repr=False)  # lower-triangle (h, j) pairs of Lambda
    gam_pairs: list = field(repr=False)
    lam_of: np.ndarray = field(repr=False)  # (T,) index into lam_pairs
    gam_of: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.m1 * self.m2

    @property
    def n_groups(self) -> int:
        return len(self.alpha)

    @property
    def n_params(self) -> int:
        return len(self.pos_t)

    @cached_property
    def group_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_groups), np.diff(self.offsets))

    @cached_property
    def param_scale(self) -> np.ndarray:
        """Multiplicity of each parameter in the full coefficient array (2 for off-diagonal S_0)."""
        return np.where((self.pos_t == 0) & (self.pos_row != self.pos_col), 2.0, 1.0)

    @cached_property
    def size_classes(self) -> list:
        """``[(groups, index_matrix)]`` for each distinct group size, for batched group ops."""
        sizes = np.diff(self.offsets)
        out = []
        for s in np.unique(sizes):
            g = np.flatnonzero(sizes == s)
            out.append((g, self.offsets[g][:, None] + np.arange(s)[None, :]))
        return out

    def to_params(self, poly) -> np.ndarray:
        c = poly.coeffs if isinstance(poly, PseudoPoly) else poly
        return c[self.pos_t, self.pos_row, self.pos_col].copy()

    def to_coeffs(self, x: np.ndarray) -> np.ndarray:
        c = np.zeros((self.n + 1, self.m, self.m))
        c[self.pos_t, self.pos_row, self.pos_col] = x
        z = self.pos_t == 0
        c[0, self.pos_col[z], self.pos_row[z]] = x[z]
        return c

    def to_poly(self, x: np.ndarray) -> PseudoPoly:
        return PseudoPoly(self.to_coeffs(x))

    def group_max(self, x: np.ndarray) -> np.ndarray:
        """Per-group maximum absolute value of the parameters."""
        q = np.zeros(self.n_groups)
        a = np.abs(x)
        for g, idx in self.size_classes:
            q[g] = a[idx].max(axis=1)
        return q


def build_group_index(m1: int, m2: int, n: int) -> GroupIndex:
    if m1 < 1 or m2 < 1 or n < 0:
        raise ValueError("need m1, m2 >= 1 and n >= 0")

    def r(a, b):
        return a * m2 + b

    lam_pairs = [(h, j) for h in range(m1) for j in range(h + 1)]
    gam_pairs = [(k, l) for k in range(m2) for l in range(k + 1)]
    lam_id = {p: i for i, p in enumerate(lam_pairs)}
    gam_id = {p: i for i, p in enumerate(gam_pairs)}

    tuples, alpha, offsets = [], [], [0]
    pt, pr, pc, lam_of, gam_of = [], [], [], [], []
    for h, j in lam_pairs:
        for k, l in gam_pairs:
            cand = [(r(h, k), r(j, l)), (r(h, l), r(j, k)), (r(j, l), r(h, k)), (r(j, k), r(h, l))]
            lag0 = sorted({(max(a, b), min(a, b)) for a, b in cand})
            lagt = sorted(set(cand))
            for a, b in lag0:
                pt.append(0)
                pr.append(a)
                pc.append(b)
            for t in range(1, n + 1):
                for a, b in lagt:
                    pt.append(t)
                    pr.append(a)
                    pc.append(b)
            tuples.append((h, k, j, l))
            alpha.append(group_alpha(h, k, j, l, n))
            offsets.append(len(pt))
            lam_of.append(lam_id[(h, j)])
            gam_of.append(gam_id[(k, l)])
    gi = GroupIndex(
        m1=m1,
        m2=m2,
        n=n,
        tuples=np.array(tuples, dtype=int).reshape(-1, 4),
        alpha=np.array(alpha, dtype=float),
        offsets=np.array(offsets, dtype=int),
        pos_t=np.array(pt, dtype=int),
        pos_row=np.array(pr, dtype=int),
        pos_col=np.array(pc, dtype=int),
        lam_pairs=lam_pairs,
        gam_pairs=gam_pairs,
        lam_of=np.array(lam_of, dtype=int),
        gam_of=np.array(gam_of, dtype=int),
    )
    assert np.array_equal(np.diff(gi.offsets), gi.alpha.astype(int))
    return gi
