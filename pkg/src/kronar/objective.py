"""Whittle-type negative log-likelihood, group values, penalties and surrogate bounds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import CovLags
from .spectral import FreqGrid, GroupIndex, PseudoPoly, build_group_index

__all__ = [
    "NotPositiveDefinite",
    "HyperParams",
    "SparseWeights",
    "WhittleLikelihood",
    "neg_loglike",
    "neg_loglike_gradient",
    "trace_term_grid",
    "q_values",
    "max_weights",
    "mult_weights",
    "penalty_max",
    "penalty_mult",
    "penalty_sparse",
    "surrogate_max",
    "surrogate_mult",
    "surrogate_sparse",
    "sparse_group_index",
]


class NotPositiveDefinite(ValueError):
    """A pseudo-polynomial is not positive definite on the frequency grid."""


@dataclass
class HyperParams:
    """Symmetric nonnegative Lambda (m1 x m1) and Gamma (m2 x m2), stored by lower triangle.

    ``lam[i]`` is the entry at ``gi.lam_pairs[i]``; likewise ``gam``.
    """

    lam: np.ndarray
    gam: np.ndarray

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float)
        self.gam = np.asarray(self.gam, dtype=float)
        if np.any(self.lam < 0) or np.any(self.gam < 0):
            raise ValueError("hyperparameters must be nonnegative")

    @classmethod
    def constant(cls, gi: GroupIndex, lam: float = 1.0, gam: float = 1.0) -> "HyperParams":
        return cls(np.full(len(gi.lam_pairs), lam), np.full(len(gi.gam_pairs), gam))

    @classmethod
    def from_matrices(cls, gi: GroupIndex, Lambda, Gamma) -> "HyperParams":
        Lambda, Gamma = np.asarray(Lambda, float), np.asarray(Gamma, float)
        return cls(
            np.array([Lambda[h, j] for h, j in gi.lam_pairs]),
            np.array([Gamma[k, l] for k, l in gi.gam_pairs]),
        )

    def matrices(self, gi: GroupIndex) -> tuple[np.ndarray, np.ndarray]:
        L = np.zeros((gi.m1, gi.m1))
        for v, (h, j) in zip(self.lam, gi.lam_pairs):
            L[h, j] = L[j, h] = v
        Gm = np.zeros((gi.m2, gi.m2))
        for v, (k, l) in zip(self.gam, gi.gam_pairs):
            Gm[k, l] = Gm[l, k] = v
        return L, Gm

    def copy(self) -> "HyperParams":
        return HyperParams(self.lam.copy(), self.gam.copy())


def sparse_group_index(m: int, n: int) -> GroupIndex:
    """Groups of the unstructured sparse penalty: one per entry pair (a, b), a >= b."""
    return build_group_index(1, m, n)


@dataclass
class SparseWeights:
    """Symmetric nonnegative weights over entry pairs (a, b), a >= b, in ``sparse_group_index`` order."""

    omega: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        if np.any(self.omega < 0):
            raise ValueError("weights must be nonnegative")

    def matrix(self, m: int) -> np.ndarray:
        W = np.zeros((m, m))
        i = 0
        for a in range(m):
            for b in range(a + 1):
                W[a, b] = W[b, a] = self.omega[i]
                i += 1
        return W


class WhittleLikelihood:
    """l(Sigma) = (N-n)/(4 pi) int [-log|Sigma| + tr(Phi_p Sigma)] dtheta, constant dropped.

    The trace term is evaluated exactly in coefficient space; the log-determinant by
    the rectangle rule on the grid. Only the half grid theta in [-pi, 0] is
    visited, using Sigma(-theta) = conj(Sigma(theta)).
    """

    def __init__(self, lags: CovLags, grid: FreqGrid | None = None, N: int | None = None):
        self.grid = grid or FreqGrid()
        self.lags = lags
        self.N = lags.N if N is None else N
        self.n = lags.n
        self.m = lags.m
        if 2 * self.n >= self.grid.size:
            raise ValueError("grid too coarse for this order")
        self.kappa = 0.5 * (self.N - self.n)
        G = self.grid.size
        H = G // 2 + 1
        self._ph = self.grid.phases(self.n)[:H]  # exp(-i t theta) on the half grid
        w = np.full(H, 2.0 / G)
        w[0] = w[-1] = 1.0 / G
        self._w = w

    def _values(self, coeffs: np.ndarray) -> np.ndarray:
        half = np.einsum("gt,tij->gij", self._ph[:, 1:], 0.5 * coeffs[1:])
        return coeffs[0] + half + np.conj(np.swapaxes(half, -1, -2))

    def _trace(self, coeffs: np.ndarray) -> float:
        R = self.lags.R
        return float(np.sum(R[0] * coeffs[0]) + np.sum(R[1:] * coeffs[1:]))

    def _chol(self, coeffs: np.ndarray, margin: float):
        """Half-grid values and their Cholesky factors; ``(None, None)`` if some squared pivot is <= margin."""
        V = self._values(coeffs)
        try:
            L = np.linalg.cholesky(V)
        except np.linalg.LinAlgError:
            return None, None
        if margin > 0 and np.min(np.diagonal(L, axis1=1, axis2=2).real) ** 2 <= margin:
            return None, None
        return V, L

    def value(self, coeffs, margin: float = 0.0) -> float:
        """Objective value; ``inf`` if not positive definite (beyond ``margin``) on the grid."""
        c = coeffs.coeffs if isinstance(coeffs, PseudoPoly) else coeffs
        V, L = self._chol(c, margin)
        if L is None:
            return np.inf
        logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2).real).sum(axis=1)
        return self.kappa * (-float(self._w @ logdet) + self._trace(c))

    def inverse_coefficients(self, V: np.ndarray) -> np.ndarray:
        """Fourier coefficients C_0..C_n of the pointwise inverse of half-grid values V."""
        F = np.linalg.inv(V)
        C = np.einsum("g,gt,gij->tij", self._w, np.conj(self._ph), F).real
        C[0] = 0.5 * (C[0] + C[0].T)
        return C

    def value_and_grad(self, coeffs: np.ndarray, margin: float = 0.0):
        """Value and full-coefficient gradient kappa * (R_t - C_t(Sigma^-1)); ``(inf, None)`` if infeasible."""
        V, L = self._chol(coeffs, margin)
        if L is None:
            return np.inf, None
        logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2).real).sum(axis=1)
        val = self.kappa * (-float(self._w @ logdet) + self._trace(coeffs))
        grad = self.kappa * (self.lags.R - self.inverse_coefficients(V))
        return val, grad


def neg_loglike(poly: PseudoPoly, lags: CovLags, N: int | None = None, grid: FreqGrid | None = None) -> float:
    val = WhittleLikelihood(lags, grid, N).value(poly.coeffs)
    if not np.isfinite(val):
        raise NotPositiveDefinite("pseudo-polynomial is not positive definite on the grid")
    return val


def neg_loglike_gradient(
    poly: PseudoPoly, lags: CovLags, N: int | None = None, grid: FreqGrid | None = None
) -> np.ndarray:
    """Gradient w.r.t. the free parameters, laid out like the coefficients.

    Entry ``[t, a, b]`` is the derivative w.r.t. ``(S_t)_{ab}`` for t >= 1, and w.r.t. the
    lower-triangular entry ``(S_0)_{ab}``, a >= b, for t = 0 (which moves both symmetric
    entries). The strict upper triangle of ``[0]`` is zero.
    """
    val, g = WhittleLikelihood(lags, grid, N).value_and_grad(poly.coeffs)
    if g is None:
        raise NotPositiveDefinite("pseudo-polynomial is not positive definite on the grid")
    g0 = 2.0 * np.tril(g[0], -1) + np.diag(np.diag(g[0]))
    g[0] = g0
    return g


def trace_term_grid(poly: PseudoPoly, lags: CovLags, grid: FreqGrid) -> float:
    """(1/2pi) int tr(Phi_p Sigma) dtheta by quadrature on the full grid (check path)."""
    from .data import truncated_periodogram
    from .spectral import evaluate

    P = truncated_periodogram(lags, grid).values
    S = evaluate(poly, grid).values
    return float(np.einsum("gij,gji->g", P, S).real.mean())


def q_values(poly, gi: GroupIndex) -> np.ndarray:
    """Per-group max |coefficient| over the group's positions and all lags."""
    return gi.group_max(gi.to_params(poly))


def max_weights(gi: GroupIndex, hp: HyperParams) -> np.ndarray:
    return np.maximum(hp.lam[gi.lam_of], hp.gam[gi.gam_of])


def mult_weights(gi: GroupIndex, hp: HyperParams) -> np.ndarray:
    return hp.lam[gi.lam_of] * hp.gam[gi.gam_of]


def penalty_max(q, gi: GroupIndex, hp: HyperParams) -> float:
    return float(max_weights(gi, hp) @ np.asarray(q))


def penalty_mult(q, gi: GroupIndex, hp: HyperParams) -> float:
    return float(mult_weights(gi, hp) @ np.asarray(q))


def penalty_sparse(poly: PseudoPoly, sw: SparseWeights) -> float:
    gs = sparse_group_index(poly.m, poly.n)
    return float(sw.omega @ q_values(poly, gs))


def _log_term(w: np.ndarray, alpha: np.ndarray) -> float:
    if np.any(w <= 0):
        return -np.inf
    return float(alpha @ np.log(w))


def surrogate_max(ell: float, q, gi: GroupIndex, hp: HyperParams, eps: float) -> float:
    """Upper bound on the joint negative log-posterior under the max prior; ``inf`` if a weight is 0."""
    w = max_weights(gi, hp)
    lt = _log_term(w, gi.alpha)
    if not np.isfinite(lt):
        return np.inf
    return ell + float(w @ np.asarray(q)) - lt + eps * (hp.lam.sum() + hp.gam.sum())


def surrogate_mult(ell: float, q, gi: GroupIndex, hp: HyperParams, eps: float) -> float:
    """Same bound under the multiplicative prior; ``inf`` if any lambda or gamma is 0."""
    if np.any(hp.lam <= 0) or np.any(hp.gam <= 0):
        return np.inf
    w = mult_weights(gi, hp)
    return ell + float(w @ np.asarray(q)) - _log_term(w, gi.alpha) + eps * (hp.lam.sum() + hp.gam.sum())


def surrogate_sparse(ell: float, q_s, gs: GroupIndex, sw: SparseWeights, eps: float) -> float:
    """Bound for the unstructured sparse penalty with one weight per entry pair."""
    lt = _log_term(sw.omega, gs.alpha)
    if not np.isfinite(lt):
        return np.inf
    return ell + float(sw.omega @ np.asarray(q_s)) - lt + eps * sw.omega.sum()
