"""Outer estimation loops (K1, K2, P1, P2, S, BURG, HARD), support extraction and
edge residual spectra."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .data import CovLags, Series, covariance_lags, toeplitz_check
from .hyper import (
    init_hyper,
    update_all_gamma_max,
    update_all_gamma_mult,
    update_all_lambda_max,
    update_all_lambda_mult,
    update_omega_sparse,
)
from .objective import (
    HyperParams,
    SparseWeights,
    WhittleLikelihood,
    max_weights,
    mult_weights,
    q_values,
    sparse_group_index,
    surrogate_max,
    surrogate_mult,
    surrogate_sparse,
)
from .solver import SolverOptions, solve_regml
from .spectral import (
    FreqGrid,
    GroupIndex,
    KroneckerSupport,
    PseudoPoly,
    build_group_index,
    evaluate,
    kron_support,
    min_grid_eigenvalue,
)
from .synth import yule_walker_me

__all__ = [
    "METHODS",
    "EstimationError",
    "EstimationConfig",
    "EstimationResult",
    "SupportEstimate",
    "estimate",
    "extract_support",
    "edge_residual_spectrum",
    "surrogate_value",
]

logger = logging.getLogger(__name__)

METHODS = ("K1", "K2", "P1", "P2", "S", "BURG", "HARD")


class EstimationError(RuntimeError):
    """Raised when the data cannot support an estimate (e.g. a singular lag matrix)."""


@dataclass
class EstimationConfig:
    method: str = "K1"
    m1: int = 1
    m2: int = 1
    n: int = 1
    eps: float = 1e-3
    outer_tol: float = 1e-3
    max_outer: int = 50
    eps_tilde: float = 1e-4
    max_init_sweeps: int = 100
    threshold: str = "relative"
    delta: float = 1e-4
    tau: float | None = None
    grid: int = 256
    solver: SolverOptions = field(default_factory=SolverOptions)
    E1: np.ndarray | None = None
    E2: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if min(self.m1, self.m2) < 1 or self.n < 0:
            raise ValueError("m1, m2 must be >= 1 and n >= 0")
        if self.eps <= 0 or self.outer_tol <= 0 or self.max_outer < 1 or self.eps_tilde <= 0:
            raise ValueError("eps, outer_tol, eps_tilde and max_outer must be positive")
        if self.threshold not in ("relative", "absolute"):
            raise ValueError("threshold must be 'relative' or 'absolute'")
        if self.threshold == "absolute" and (self.tau is None or self.tau < 0):
            raise ValueError("absolute threshold needs tau >= 0")
        if self.method == "HARD" and (self.E1 is None or self.E2 is None):
            raise ValueError("HARD needs known supports E1 and E2")

    @property
    def m(self) -> int:
        return self.m1 * self.m2


@dataclass
class SupportEstimate:
    raw: np.ndarray  # per-tuple booleans, GroupIndex order
    E1: np.ndarray
    E2: np.ndarray
    defect: float

    @property
    def kron(self) -> KroneckerSupport:
        return KroneckerSupport(self.E1, self.E2)


@dataclass
class EstimationResult:
    method: str
    poly: PseudoPoly
    support: np.ndarray  # m x m estimated support of Sigma
    E1: np.ndarray | None = None
    E2: np.ndarray | None = None
    raw: np.ndarray | None = None
    defect: float = 0.0
    hyper: HyperParams | None = None
    omega: SparseWeights | None = None
    trace: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    status: str = "converged"
    ell: float = np.nan
    timings: dict = field(default_factory=dict)

    @property
    def kron(self) -> KroneckerSupport | None:
        if self.E1 is None:
            return None
        return KroneckerSupport(self.E1, self.E2)


def extract_support(poly: PseudoPoly, gi: GroupIndex, rule: str = "relative", delta: float = 1e-4, tau=None):
    """Per-tuple activity and the smallest Kronecker support containing it.

    A tuple is active when its group value exceeds ``delta * max q`` (``rule="relative"``)
    or ``tau`` (``rule="absolute"``).
    """
    q = q_values(poly, gi)
    if rule == "relative":
        thr = delta * (q.max() if q.size else 0.0)
    elif rule == "absolute":
        thr = float(tau)
    else:
        raise ValueError(f"unknown threshold rule {rule!r}")
    raw = q > thr
    E1 = np.eye(gi.m1, dtype=np.int8)
    E2 = np.eye(gi.m2, dtype=np.int8)
    for (h, k, j, l), on in zip(gi.tuples, raw):
        if on:
            E1[h, j] = E1[j, h] = 1
            E2[k, l] = E2[l, k] = 1
    implied = np.array([E1[h, j] and E2[k, l] for h, k, j, l in gi.tuples], dtype=bool)
    defect = float(np.count_nonzero(implied != raw)) / len(raw)
    return SupportEstimate(raw, E1, E2, defect)


def _entry_support(poly: PseudoPoly, rule: str, delta: float, tau) -> np.ndarray:
    """m x m support from per-entry maxima over lags (used by the unstructured baseline)."""
    Q = np.abs(poly.coeffs).max(axis=0)
    Q = np.maximum(Q, Q.T)
    thr = delta * Q.max() if rule == "relative" else float(tau)
    E = (Q > thr).astype(np.int8)
    np.fill_diagonal(E, 1)
    return E


def surrogate_value(method: str, ell: float, poly: PseudoPoly, gi: GroupIndex, hyper, eps: float) -> float:
    """The surrogate objective tracked by the outer loop of ``method``."""
    if method in ("K1", "K2"):
        return surrogate_max(ell, q_values(poly, gi), gi, hyper, eps)
    if method in ("P1", "P2"):
        return surrogate_mult(ell, q_values(poly, gi), gi, hyper, eps)
    if method == "S":
        return surrogate_sparse(ell, q_values(poly, gi), gi, hyper, eps)
    raise ValueError(f"no surrogate for method {method!r}")


def _as_lags(data, n: int) -> CovLags:
    if isinstance(data, CovLags):
        if data.n != n:
            raise ValueError(f"lags have order {data.n}, config asks for {n}")
        return data
    return covariance_lags(data if isinstance(data, Series) else Series(data), n)


def _safe_start(lags: CovLags) -> PseudoPoly:
    """Diagonal feasible point, used when the ME estimate cannot seed a constrained solve."""
    S = np.zeros_like(lags.R)
    S[0] = np.diag(1.0 / np.diag(lags.R[0]))
    return PseudoPoly(S)


def estimate(data, cfg: EstimationConfig) -> EstimationResult:
    """Estimate Sigma = Phi^-1 and its Kronecker support from a series or from covariance lags."""
    t0 = time.perf_counter()
    lags = _as_lags(data, cfg.n)
    if lags.m != cfg.m:
        raise ValueError(f"series has {lags.m} channels but m1*m2 = {cfg.m}")
    lam_min, pd = toeplitz_check(lags)
    if not pd:
        raise EstimationError(f"block-Toeplitz lag matrix is not positive definite (min eigenvalue {lam_min:.3e})")

    grid = FreqGrid(cfg.grid)
    like = WhittleLikelihood(lags, grid)
    try:
        me = yule_walker_me(lags)
    except np.linalg.LinAlgError as exc:
        raise EstimationError(str(exc)) from None
    timings = {"setup": time.perf_counter() - t0}

    if cfg.method == "BURG":
        m = cfg.m
        return EstimationResult(
            "BURG", me, np.ones((m, m), dtype=np.int8),
            E1=np.ones((cfg.m1, cfg.m1), dtype=np.int8), E2=np.ones((cfg.m2, cfg.m2), dtype=np.int8),
            ell=like.value(me.coeffs), timings=timings,
        )

    gi = build_group_index(cfg.m1, cfg.m2, cfg.n)
    if cfg.method == "HARD":
        return _estimate_hard(lags, cfg, gi, like, me, timings)
    if cfg.method == "S":
        return _estimate_sparse(lags, cfg, like, me, timings)
    return _estimate_kron(lags, cfg, gi, like, me, timings)


def _estimate_hard(lags, cfg, gi, like, me, timings):
    E1 = np.asarray(cfg.E1, dtype=np.int8)
    E2 = np.asarray(cfg.E2, dtype=np.int8)
    ks = KroneckerSupport(E1, E2)
    if (ks.m1, ks.m2) != (cfg.m1, cfg.m2):
        raise ValueError("known supports do not match m1, m2")
    active = np.array([E1[h, j] and E2[k, l] for h, k, j, l in gi.tuples], dtype=bool)
    t = time.perf_counter()
    res = solve_regml(lags, gi, np.zeros(gi.n_groups), _safe_start(lags), cfg.solver, active=active, like=like)
    timings["solve"] = time.perf_counter() - t
    return EstimationResult(
        "HARD", res.poly, kron_support(ks), E1=E1, E2=E2, raw=active,
        trace=[res.objective[-1]], inner_iterations=[res.iterations],
        status=res.status, ell=res.ell, timings=timings,
    )


def _estimate_kron(lags, cfg, gi, like, me, timings):
    method = cfg.method
    prior = "max" if method in ("K1", "K2") else "mult"
    if prior == "max":
        upd_l, upd_g, wfun = update_all_lambda_max, update_all_gamma_max, max_weights
    else:
        upd_l, upd_g, wfun = update_all_lambda_mult, update_all_gamma_mult, mult_weights
    lambda_first = method in ("K1", "P1")

    t = time.perf_counter()
    hp, info = init_hyper(me, gi, cfg.eps, cfg.eps_tilde, cfg.max_init_sweeps, prior)
    timings["init"] = time.perf_counter() - t
    poly = me
    ell = like.value(poly.coeffs)
    trace = [surrogate_value(method, ell, poly, gi, hp, cfg.eps)]
    inner = []
    status = "max-outer"
    t = time.perf_counter()
    for r in range(cfg.max_outer):
        res = solve_regml(lags, gi, wfun(gi, hp), poly, cfg.solver, like=like)
        poly, ell = res.poly, res.ell
        inner.append(res.iterations)
        q = q_values(poly, gi)
        if lambda_first:
            hp.lam = upd_l(q, gi, hp, cfg.eps)
            hp.gam = upd_g(q, gi, hp, cfg.eps)
        else:
            hp.gam = upd_g(q, gi, hp, cfg.eps)
            hp.lam = upd_l(q, gi, hp, cfg.eps)
        trace.append(surrogate_value(method, ell, poly, gi, hp, cfg.eps))
        if abs(trace[-1] - trace[-2]) <= cfg.outer_tol:
            status = "converged"
            break
    else:
        logger.warning("%s: outer loop hit the %d-iteration cap", method, cfg.max_outer)
    timings["outer"] = time.perf_counter() - t

    sup = extract_support(poly, gi, cfg.threshold, cfg.delta, cfg.tau)
    return EstimationResult(
        method, poly, kron_support(sup.kron), E1=sup.E1, E2=sup.E2, raw=sup.raw, defect=sup.defect,
        hyper=hp, trace=trace, inner_iterations=inner, status=status, ell=ell, timings=timings,
    )


def _estimate_sparse(lags, cfg, like, me, timings):
    gs = sparse_group_index(cfg.m, cfg.n)
    poly = me
    ell = like.value(poly.coeffs)
    omega = update_omega_sparse(q_values(poly, gs), gs, cfg.eps)
    trace = [surrogate_sparse(ell, q_values(poly, gs), gs, omega, cfg.eps)]
    inner = []
    status = "max-outer"
    t = time.perf_counter()
    for r in range(cfg.max_outer):
        res = solve_regml(lags, gs, omega.omega, poly, cfg.solver, like=like)
        poly, ell = res.poly, res.ell
        inner.append(res.iterations)
        q = q_values(poly, gs)
        omega = update_omega_sparse(q, gs, cfg.eps)
        trace.append(surrogate_sparse(ell, q, gs, omega, cfg.eps))
        if abs(trace[-1] - trace[-2]) <= cfg.outer_tol:
            status = "converged"
            break
    else:
        logger.warning("S: outer loop hit the %d-iteration cap", cfg.max_outer)
    timings["outer"] = time.perf_counter() - t
    support = _entry_support(poly, cfg.threshold, cfg.delta, cfg.tau)
    return EstimationResult(
        "S", poly, support, omega=omega, trace=trace, inner_iterations=inner,
        status=status, ell=ell, timings=timings,
    )


def _pair_components(m1: int, m2: int, grouping: str, pair) -> tuple[list, list]:
    a, b = (int(p) for p in pair)
    if grouping == "modules":
        if not (0 <= a < m1 and 0 <= b < m1) or a == b:
            raise ValueError(f"invalid module pair {pair} for m1={m1}")
        return [a * m2 + k for k in range(m2)], [b * m2 + k for k in range(m2)]
    if grouping == "nodes":
        if not (0 <= a < m2 and 0 <= b < m2) or a == b:
            raise ValueError(f"invalid node pair {pair} for m2={m2}")
        return [h * m2 + a for h in range(m1)], [h * m2 + b for h in range(m1)]
    raise ValueError(f"grouping must be 'modules' or 'nodes', got {grouping!r}")


def edge_residual_spectrum(
    poly: PseudoPoly, m1: int, m2: int, grouping: str, pair, grid: FreqGrid | None = None
) -> np.ndarray:
    """Frobenius norm of the cross block of the residual spectrum of a module or node pair.

    At each grid point the principal block of Sigma(theta) on the pair's components is
    inverted; the returned curve is the norm of its off-diagonal block.
    """
    grid = grid or FreqGrid()
    if poly.m != m1 * m2:
        raise ValueError("m1 * m2 does not match the dimension of Sigma")
    first, second = _pair_components(m1, m2, grouping, pair)
    idx = np.array(first + second)
    V = evaluate(poly, grid).values
    if min_grid_eigenvalue(evaluate(poly, grid)) <= 0:
        raise ValueError("Sigma is not positive definite on the grid")
    B = V[:, idx[:, None], idx[None, :]]
    P = np.linalg.inv(B)
    s = len(first)
    return np.linalg.norm(P[:, :s, s:], axis=(1, 2))
