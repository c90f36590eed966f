import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from kronar.data import CovLags
from kronar.objective import WhittleLikelihood, q_values
from kronar.solver import (
    SolverOptions,
    project_l1_ball,
    project_l1_rows,
    prox_group_supnorm,
    prox_groups,
    solve_regml,
)
from kronar.spectral import KroneckerSupport, PseudoPoly, build_group_index, kron_support
from kronar.synth import metric_err, yule_walker_me

from helpers import simulated_lags


def prox_oracle(v, r):
    """Prox of r * max|x| via the 1-D dual: clip |v| at tau with sum (|v| - tau)_+ = r."""
    a = np.abs(v)
    if a.sum() <= r:
        return np.zeros_like(v)
    if r == 0:
        return v.copy()
    tau = brentq(lambda t: np.maximum(a - t, 0).sum() - r, 0.0, a.max(), xtol=1e-15, rtol=1e-15)
    return np.sign(v) * np.minimum(a, tau)


def test_projection_examples():
    assert np.allclose(project_l1_ball([0.2, -0.3], 1.0), [0.2, -0.3])
    assert np.allclose(project_l1_ball([3.0, 0.0], 1.0), [1.0, 0.0])
    assert np.allclose(project_l1_ball([2.0, 1.0], 1.0), [1.0, 0.0])
    assert np.allclose(project_l1_ball([1.0, 1.0], 1.0), [0.5, 0.5])
    assert np.all(project_l1_ball([1.0, -2.0], 0.0) == 0)


def test_projection_against_brute_force(rng):
    # fine search over the boundary of the 2-D l1 ball
    for _ in range(20):
        v = rng.normal(scale=2, size=2)
        r = rng.uniform(0.1, 2)
        if np.abs(v).sum() <= r:
            continue
        s = np.linspace(0, 1, 400_001)
        pts = []
        for sx in (-1, 1):
            for sy in (-1, 1):
                pts.append(np.stack([sx * r * s, sy * r * (1 - s)], 1))
        pts = np.concatenate(pts)
        best = pts[np.argmin(((pts - v) ** 2).sum(1))]
        assert np.allclose(project_l1_ball(v, r), best, atol=1e-5)


def test_prox_simple_cases():
    v = np.array([0.3, -1.2, 0.7])
    assert np.array_equal(prox_group_supnorm(v, 0.0, 1.0), v)
    assert prox_group_supnorm(np.array([1.0]), 0.3, 1.0)[0] == pytest.approx(0.7)
    assert np.all(prox_group_supnorm(v, 10.0, 1.0) == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0.0, 3.0), st.integers(0, 2**32 - 1))
def test_prox_matches_dual_search(size, r, seed):
    v = np.random.default_rng(seed).normal(size=size)
    assert np.allclose(prox_group_supnorm(v, r, 1.0), prox_oracle(v, r), atol=1e-10)


def test_batched_projection_matches_single(rng):
    V = rng.normal(size=(30, 5))
    r = rng.uniform(0, 3, size=30)
    B = project_l1_rows(V, r)
    for i in range(30):
        assert np.allclose(B[i], project_l1_ball(V[i], r[i]))


def test_prox_groups_is_groupwise(rng):
    gi = build_group_index(2, 2, 1)
    x = rng.normal(size=gi.n_params)
    w = rng.random(gi.n_groups)
    out = prox_groups(x, gi, w, 0.7)
    for g in range(gi.n_groups):
        sl = slice(gi.offsets[g], gi.offsets[g + 1])
        assert np.allclose(out[sl], prox_group_supnorm(x[sl], w[g], 0.7))


def test_scalar_penalized_solution():
    r, N, w = 0.8, 100, 7.0
    lags = CovLags(np.array([[[r]]]), N)
    gi = build_group_index(1, 1, 0)
    res = solve_regml(lags, gi, np.array([w]), PseudoPoly.identity(1), SolverOptions(tol=1e-14))
    expected = (N / 2) / ((N / 2) * r + w)
    assert res.poly.coeffs[0, 0, 0] == pytest.approx(expected, rel=1e-6)
    grid = np.linspace(0.01, 3, 200_001)
    obj = N / 2 * (-np.log(grid) + r * grid) + w * grid
    assert abs(grid[np.argmin(obj)] - expected) < 2e-5


def test_zero_weights_recovers_me_solution():
    lags, _, _ = simulated_lags(2, 3, 2, 2000, 1)
    gi = build_group_index(2, 3, 2)
    res = solve_regml(lags, gi, np.zeros(gi.n_groups), PseudoPoly.identity(6, 2), SolverOptions(tol=1e-12))
    assert np.sqrt(metric_err(res.poly, yule_walker_me(lags))) < 1e-4


def test_warm_start_at_solution():
    lags, _, _ = simulated_lags(2, 2, 1, 2000, 2)
    gi = build_group_index(2, 2, 1)
    w = np.full(gi.n_groups, 5.0)
    opts = SolverOptions(tol=1e-10)
    first = solve_regml(lags, gi, w, yule_walker_me(lags), opts)
    again = solve_regml(lags, gi, w, first.poly, opts)
    assert again.iterations <= 2
    assert again.status == "converged"


def test_objective_trace_non_increasing():
    lags, _, _ = simulated_lags(2, 2, 1, 1000, 3)
    gi = build_group_index(2, 2, 1)
    rng = np.random.default_rng(0)
    for accelerate in (False, True):
        res = solve_regml(lags, gi, rng.random(gi.n_groups) * 50, PseudoPoly.identity(4, 1),
                          SolverOptions(accelerate=accelerate))
        assert np.all(np.diff(res.objective) <= 0)
        assert np.isfinite(WhittleLikelihood(lags).value(res.poly.coeffs))


def test_large_weights_give_exact_zeros():
    lags, _, ks = simulated_lags(2, 2, 1, 2000, 4, eta=0.5)
    gi = build_group_index(2, 2, 1)
    true = np.array([ks.E1[h, j] and ks.E2[k, l] for h, k, j, l in gi.tuples], dtype=bool)
    w = np.where(true, 0.0, 1e6)
    res = solve_regml(lags, gi, w, yule_walker_me(lags))
    q = q_values(res.poly, gi)
    assert np.all(q[~true] == 0.0)
    off = kron_support(KroneckerSupport(ks.E1, ks.E2)) == 0
    assert np.all(res.poly.coeffs[:, off] == 0.0)


def test_active_mask_holds_groups_at_zero():
    lags, _, _ = simulated_lags(2, 2, 1, 1000, 5)
    gi = build_group_index(2, 2, 1)
    active = np.array([h == j and k == l for h, k, j, l in gi.tuples])
    res = solve_regml(lags, gi, np.zeros(gi.n_groups), PseudoPoly.identity(4, 1), active=active)
    assert np.all(q_values(res.poly, gi)[~active] == 0)


def test_cap_and_bad_init():
    lags, _, _ = simulated_lags(2, 2, 1, 1000, 6)
    gi = build_group_index(2, 2, 1)
    res = solve_regml(lags, gi, np.zeros(gi.n_groups), PseudoPoly.identity(4, 1), SolverOptions(max_iter=1))
    assert res.status == "max-iters" and res.iterations == 1
    with pytest.raises(ValueError, match="positive definite"):
        solve_regml(lags, gi, np.zeros(gi.n_groups), PseudoPoly(-np.eye(4)[None].repeat(2, 0)))
    with pytest.raises(ValueError):
        solve_regml(lags, gi, -np.ones(gi.n_groups), PseudoPoly.identity(4, 1))
