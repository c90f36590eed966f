"""Proximal gradient solver for the group sup-norm regularized Whittle likelihood.

Minimizes  l(Sigma) + sum_g w_g * max_{i in g} |x_i|  over positive definite
pseudo-polynomials, where ``x`` are the free coefficients laid out by a
:class:`~kronar.spectral.GroupIndex`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .data import CovLags
from .objective import WhittleLikelihood
from .spectral import FreqGrid, GroupIndex, PseudoPoly

__all__ = [
    "SolverOptions",
    "SolveResult",
    "project_l1_ball",
    "project_l1_rows",
    "prox_group_supnorm",
    "prox_groups",
    "solve_regml",
]

logger = logging.getLogger(__name__)


@dataclass
class SolverOptions:
    max_iter: int = 5000
    tol: float = 1e-7
    step0: float | None = None
    backtrack: float = 0.5
    margin: float = 1e-9
    accelerate: bool = False
    bb_steps: bool = True

    def __post_init__(self):
        if self.tol <= 0 or self.max_iter < 1 or self.margin < 0:
            raise ValueError("tolerances and caps must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")


@dataclass
class SolveResult:
    poly: PseudoPoly
    x: np.ndarray
    objective: list = field(default_factory=list)
    iterations: int = 0
    status: str = "converged"
    ell: float = np.nan


def project_l1_rows(V: np.ndarray, radius) -> np.ndarray:
    """Row-wise Euclidean projection of ``V`` (k, s) onto l1 balls with radii ``radius`` (k,)."""
    V = np.atleast_2d(V)
    k, s = V.shape
    r = np.broadcast_to(np.asarray(radius, dtype=float), (k,))
    A = np.abs(V)
    U = -np.sort(-A, axis=1)
    css = np.cumsum(U, axis=1)
    j = np.arange(1, s + 1)
    cond = U - (css - r[:, None]) / j > 0
    cond[:, 0] = True  # holds exactly for r > 0; rounding can lose it when r is tiny
    rho = s - np.argmax(cond[:, ::-1], axis=1)
    theta = (css[np.arange(k), rho - 1] - r) / rho
    X = np.sign(V) * np.maximum(A - theta[:, None], 0.0)
    inside = A.sum(axis=1) <= r
    X[inside] = V[inside]
    X[r <= 0] = 0.0
    return X


def project_l1_ball(v, radius: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto {x : sum |x_i| <= radius} (sort and threshold)."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    v = np.asarray(v, dtype=float)
    return project_l1_rows(v.reshape(1, -1), radius).reshape(v.shape)


def prox_group_supnorm(v, w: float, step: float) -> np.ndarray:
    """argmin_x 1/2 ||x - v||^2 + step * w * max_i |x_i|, via Moreau decomposition."""
    v = np.asarray(v, dtype=float)
    return v - project_l1_ball(v, step * w)


def prox_groups(x: np.ndarray, gi: GroupIndex, weights: np.ndarray, step: float) -> np.ndarray:
    out = x.copy()
    for g, idx in gi.size_classes:
        V = x[idx]
        out[idx] = V - project_l1_rows(V, step * weights[g])
    return out


def _penalty(x, gi, weights):
    return float(weights @ gi.group_max(x))


def _initial_step(like, gi, x, grad_x, margin, active, iters=8):
    """1 / (power-iteration estimate of the largest Hessian eigenvalue), by gradient differences."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(x.size) * active
    lam = 1.0
    for _ in range(iters):
        nv = np.linalg.norm(v)
        if nv == 0:
            break
        v /= nv
        delta = 1e-6 * max(1.0, np.linalg.norm(x))
        for _ in range(30):
            val, g = like.value_and_grad(gi.to_coeffs(x + delta * v), margin)
            if g is not None:
                break
            delta *= 0.1
        else:
            return 1e-6
        hv = (_grad_params(gi, g) - grad_x) / delta * active
        lam = float(v @ hv)
        v = hv
    return 1.0 / max(abs(lam), 1e-12)


def _grad_params(gi: GroupIndex, g: np.ndarray) -> np.ndarray:
    return g[gi.pos_t, gi.pos_row, gi.pos_col] * gi.param_scale


def solve_regml(
    lags: CovLags,
    gi: GroupIndex,
    weights,
    init: PseudoPoly,
    opts: SolverOptions | None = None,
    N: int | None = None,
    grid: FreqGrid | None = None,
    active: np.ndarray | None = None,
    like: WhittleLikelihood | None = None,
) -> SolveResult:
    """Minimize the group-penalized likelihood from a feasible ``init``.

    ``weights`` holds one nonnegative weight per group of ``gi``. ``active`` is an
    optional boolean mask over groups; inactive groups are held at exactly zero.
    Returns the last accepted iterate; the recorded objective never increases.
    """
    opts = opts or SolverOptions()
    like = like or WhittleLikelihood(lags, grid, N)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (gi.n_groups,) or np.any(weights < 0):
        raise ValueError("need one nonnegative weight per group")

    x = gi.to_params(init)
    if active is None:
        amask = np.ones(gi.n_params)
    else:
        amask = np.asarray(active, dtype=bool)[gi.group_of].astype(float)
        x = x * amask

    ell, g = like.value_and_grad(gi.to_coeffs(x), opts.margin)
    if g is None:
        raise ValueError("initial point is not positive definite on the grid")
    gx = _grad_params(gi, g) * amask
    F = ell + _penalty(x, gi, weights)
    trace = [F]

    step = opts.step0 or _initial_step(like, gi, x, gx, opts.margin, amask)
    status = "max-iters"
    it = 0
    x_prev, gx_prev = None, None
    y, gy, ell_y = x, gx, ell
    t_acc = 1.0
    for it in range(1, opts.max_iter + 1):
        if opts.bb_steps and x_prev is not None and not opts.accelerate:
            dx, dg = x - x_prev, gx - gx_prev
            curv = float(dx @ dg)
            if curv > 0:
                step = float(dx @ dx) / curv
        accepted = False
        for _ in range(60):
            z = prox_groups(y - step * gy, gi, weights, step) * amask
            ell_z = like.value(gi.to_coeffs(z), opts.margin)
            d = z - y
            if np.isfinite(ell_z) and ell_z <= ell_y + gy @ d + (d @ d) / (2 * step) + 1e-12 * abs(ell_y):
                F_z = ell_z + _penalty(z, gi, weights)
                if F_z <= F or not opts.accelerate:
                    accepted = True
                    break
                # momentum overshot: restart from the current iterate
                y, gy, ell_y, t_acc = x, gx, ell, 1.0
                continue
            step *= opts.backtrack
        if not accepted:
            status = "stalled"
            break

        ell_z, gz_full = like.value_and_grad(gi.to_coeffs(z), opts.margin)
        gz = _grad_params(gi, gz_full) * amask
        F_new = ell_z + _penalty(z, gi, weights)
        x_prev, gx_prev = x, gx
        if F_new > F:
            # can only happen through rounding at convergence
            F_new = F
            z, gz, ell_z = x, gx, ell
        rel = (F - F_new) / max(1.0, abs(F_new))
        x, gx, ell, F = z, gz, ell_z, F_new
        trace.append(F)
        if opts.accelerate:
            t_next = 0.5 * (1 + np.sqrt(1 + 4 * t_acc * t_acc))
            yv = x + ((t_acc - 1) / t_next) * (x - x_prev)
            ell_yv, gy_full = like.value_and_grad(gi.to_coeffs(yv), opts.margin)
            if gy_full is None:
                y, gy, ell_y, t_acc = x, gx, ell, 1.0
            else:
                y, gy, ell_y, t_acc = yv, _grad_params(gi, gy_full) * amask, ell_yv, t_next
        else:
            y, gy, ell_y = x, gx, ell
        if rel < opts.tol:
            status = "converged"
            break

    return SolveResult(gi.to_poly(x), x, trace, it, status, ell)
