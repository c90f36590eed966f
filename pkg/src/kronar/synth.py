"""Ground-truth Kronecker models, spectral factorization, AR simulation, the
maximum-entropy (Yule-Walker) estimator and error metrics.

Conventions: R_s = E[y(t) y(t+s)^T] and the spectrum is Phi(theta) = sum_s R_s exp(-i s theta),
so ``fourier_coefficients(Phi, n)`` returns R_0..R_n. An AR model

    A_0 y(t) + A_1 y(t-1) + ... + A_n y(t-n) = e(t),   e ~ N(0, I)

has inverse spectrum Sigma(theta) = A(theta)^T conj(A(theta)), A(theta) = sum_k A_k exp(-i k theta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import CovLags, Series, block_toeplitz
from .spectral import (
    FreqGrid,
    KroneckerSupport,
    PseudoPoly,
    evaluate,
    kron_support,
    min_grid_eigenvalue,
)

__all__ = [
    "ARModel",
    "FactorizationError",
    "random_support",
    "random_kgm_model",
    "ar_to_poly",
    "spectral_factorize",
    "factorization_residual",
    "simulate",
    "yule_walker_me",
    "metric_esp",
    "metric_err",
]


class FactorizationError(RuntimeError):
    pass


@dataclass
class ARModel:
    """AR coefficients A_0..A_n, shape (n+1, m, m); A_0 lower triangular with positive diagonal."""

    A: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0] - 1

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def companion(self) -> np.ndarray:
        m, n = self.m, self.n
        if n == 0:
            return np.zeros((0, 0))
        A0inv = np.linalg.inv(self.A[0])
        C = np.zeros((m * n, m * n))
        for k in range(1, n + 1):
            C[:m, (k - 1) * m:k * m] = -A0inv @ self.A[k]
        C[m:, :-m] = np.eye(m * (n - 1))
        return C

    def spectral_radius(self) -> float:
        C = self.companion()
        return float(np.abs(np.linalg.eigvals(C)).max()) if C.size else 0.0


def random_support(m: int, eta: float, rng: np.random.Generator) -> np.ndarray:
    """Symmetric 0/1 matrix with unit diagonal and round(eta * m(m-1)/2) off-diagonal pairs.

    Halves round up, so m=6, eta=0.3 gives 5 pairs.
    """
    if not 0 <= eta <= 1:
        raise ValueError("eta must lie in [0, 1]")
    pairs = [(a, b) for a in range(m) for b in range(a)]
    npairs = int(np.floor(eta * len(pairs) + 0.5))
    E = np.eye(m, dtype=np.int8)
    if npairs:
        for i in rng.choice(len(pairs), size=npairs, replace=False):
            a, b = pairs[i]
            E[a, b] = E[b, a] = 1
    return E


def random_kgm_model(
    m1: int,
    m2: int,
    n: int,
    eta1: float,
    eta2: float,
    rng: np.random.Generator,
    amplitude: float | None = None,
    margin: float = 0.5,
    grid: FreqGrid | None = None,
) -> tuple[PseudoPoly, KroneckerSupport]:
    """Random positive pseudo-polynomial whose support is exactly E1 kron E2.

    Entries on the allowed positions are uniform on [-a, a] (a = 0.4/(n+1) by default);
    S_0 is then shifted by a multiple of the identity so that its minimum grid
    eigenvalue is at least ``margin``.
    """
    grid = grid or FreqGrid()
    a = 0.4 / (n + 1) if amplitude is None else amplitude
    ks = KroneckerSupport(random_support(m1, eta1, rng), random_support(m2, eta2, rng))
    mask = kron_support(ks).astype(float)
    m = m1 * m2
    S = rng.uniform(-a, a, size=(n + 1, m, m)) * mask
    S[0] = np.tril(S[0]) + np.tril(S[0], -1).T
    poly = PseudoPoly(S)
    lo = min_grid_eigenvalue(evaluate(poly, grid))
    S[0] += (max(0.0, -lo) + margin) * np.eye(m)
    return PseudoPoly(S), ks


def ar_to_poly(A: np.ndarray) -> PseudoPoly:
    """Pseudo-polynomial A(theta)^T conj(A(theta)) of an AR coefficient array."""
    n = A.shape[0] - 1
    S = np.empty_like(A, dtype=float)
    for t in range(n + 1):
        Q = sum(A[k].T @ A[k - t] for k in range(t, n + 1))
        S[t] = Q if t == 0 else 2.0 * Q
    return PseudoPoly(S)


def factorization_residual(poly: PseudoPoly, A: np.ndarray, grid: FreqGrid | None = None) -> float:
    grid = grid or FreqGrid()
    S = evaluate(poly, grid).values
    F = evaluate(ar_to_poly(A), grid).values
    return float(np.linalg.norm(S - F) / np.linalg.norm(S))


def _normalize_factor(A: np.ndarray) -> np.ndarray:
    """Left-multiply by an orthogonal matrix so that A_0 is lower triangular, positive diagonal."""
    J = np.eye(A.shape[1])[::-1]
    Qr, Rr = np.linalg.qr(J @ A[0] @ J)
    U = (J @ Qr @ J).T
    low = J @ Rr @ J
    D = np.sign(np.diag(low))
    D[D == 0] = 1.0
    return np.einsum("i,ij,tjk->tik", D, U, A)


def spectral_factorize(
    poly: PseudoPoly,
    depth: int = 32,
    tol: float = 1e-6,
    max_depth: int = 4096,
    grid: FreqGrid | None = None,
) -> ARModel:
    """Minimum-phase AR factor of a positive pseudo-polynomial by Bauer's method.

    Runs the banded block Cholesky recursion of the block-Toeplitz matrix built from
    the coefficients of ``poly``; the last block row converges to the factor. The
    relative Frobenius residual on the grid is checked at depths 32, 64, ... and the
    recursion continues until it is at most ``tol``.
    """
    grid = grid or FreqGrid()
    n, m = poly.n, poly.m
    Q = poly.laurent()  # Q[n + d] multiplies exp(-i d theta)

    def T(d):
        return Q[n + d]

    rows = []  # last n+1 rows of L: rows[-1][d] = L_{i, i-d}
    check = depth
    for i in range(max_depth):
        row = [None] * (n + 1)
        for d in range(min(i, n), 0, -1):
            k = i - d
            acc = T(d).copy()
            for p in range(max(0, i - n), k):
                acc -= row[i - p] @ rows[-(i - k)][k - p].T
            row[d] = scipy.linalg.solve_triangular(rows[-(i - k)][0], acc.T, lower=True).T
        acc = T(0).copy()
        for d in range(1, min(i, n) + 1):
            acc -= row[d] @ row[d].T
        try:
            row[0] = np.linalg.cholesky(acc)
        except np.linalg.LinAlgError:
            raise FactorizationError("block Toeplitz matrix lost positive definiteness") from None
        rows.append(row)
        if len(rows) > n + 1:
            rows.pop(0)
        if i + 1 == check or i + 1 == max_depth:
            if i >= n:
                A = np.array([row[d].T for d in range(n + 1)])
                if factorization_residual(poly, A, grid) <= tol:
                    return ARModel(_normalize_factor(A))
            check *= 2
    raise FactorizationError(f"factorization not converged at depth {max_depth}")


def simulate(ar: ARModel, N: int, rng: np.random.Generator, burnin: int = 1000) -> Series:
    """Simulate N samples of the AR recursion from zero initial state, discarding ``burnin``."""
    n, m = ar.n, ar.m
    A0inv = np.linalg.inv(ar.A[0])
    Phi = [-A0inv @ ar.A[k] for k in range(1, n + 1)]
    total = N + burnin
    e = rng.standard_normal((total, m)) @ A0inv.T
    y = np.zeros((total + n, m))
    for t in range(total):
        acc = e[t].copy()
        for k in range(n):
            acc += Phi[k] @ y[t + n - 1 - k]
        y[t + n] = acc
    return Series(y[n + burnin:])


def yule_walker_me(lags: CovLags) -> PseudoPoly:
    """Maximum-entropy inverse spectrum matching R_0..R_n, via the block Yule-Walker equations."""
    R, n, m = lags.R, lags.n, lags.m
    if n == 0:
        return PseudoPoly(np.linalg.inv(R[0])[None])

    def lag(d):
        return R[d] if d >= 0 else R[-d].T

    # sum_k Abar_k R_{k-j} = R_j^T, j = 1..n
    M = np.block([[lag(k - j) for j in range(1, n + 1)] for k in range(1, n + 1)])
    B = np.hstack([R[j].T for j in range(1, n + 1)])
    try:
        X = scipy.linalg.solve(M.T, B.T, assume_a="sym" if np.allclose(M, M.T) else "gen").T
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("singular block-Toeplitz lag matrix") from None
    Abar = X.reshape(m, n, m).transpose(1, 0, 2)
    inn = R[0] - sum(Abar[k - 1] @ R[k] for k in range(1, n + 1))
    inn = 0.5 * (inn + inn.T)
    try:
        Lc = np.linalg.cholesky(inn)
    except np.linalg.LinAlgError:
        raise np.linalg.LinAlgError("innovation covariance is not positive definite") from None
    A0 = np.linalg.inv(Lc)
    A = np.concatenate([A0[None], -np.einsum("ij,tjk->tik", A0, Abar)])
    return ar_to_poly(A)


def metric_esp(true: KroneckerSupport, est) -> float:
    """Fraction of mismatched entries between E1 kron E2 and the estimated support.

    ``est`` is a :class:`KroneckerSupport` or an m x m 0/1 matrix.
    """
    T = kron_support(true)
    E = kron_support(est) if isinstance(est, KroneckerSupport) else np.asarray(est).astype(np.int8)
    if E.shape != T.shape:
        raise ValueError("support shapes differ")
    return float(np.count_nonzero(T != E)) / T.size


def metric_err(sigma_hat: PseudoPoly, sigma_true: PseudoPoly, grid: FreqGrid | None = None) -> float:
    """int ||Sigma_hat - Sigma||_F^2 / int ||Sigma||_F^2 by grid quadrature."""
    grid = grid or FreqGrid()
    A = evaluate(sigma_hat, grid).values
    B = evaluate(sigma_true, grid).values
    return float(np.sum(np.abs(A - B) ** 2) / np.sum(np.abs(B) ** 2))
