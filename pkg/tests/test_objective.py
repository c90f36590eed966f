import numpy as np
import pytest

from kronar.data import CovLags
from kronar.objective import (
    HyperParams,
    NotPositiveDefinite,
    SparseWeights,
    WhittleLikelihood,
    neg_loglike,
    neg_loglike_gradient,
    penalty_max,
    penalty_mult,
    penalty_sparse,
    q_values,
    sparse_group_index,
    surrogate_max,
    surrogate_mult,
    surrogate_sparse,
    trace_term_grid,
)
from kronar.spectral import FreqGrid, PseudoPoly, build_group_index
from kronar.synth import yule_walker_me

from helpers import simulated_lags


def scalar_lags(r, N=100):
    return CovLags(np.array([[[r]]]), N)


def test_scalar_value_and_gradient():
    r, N = 0.8, 100
    for sigma in (0.5, 1 / r, 2.0):
        p = PseudoPoly(np.array([[[sigma]]]))
        assert neg_loglike(p, scalar_lags(r, N)) == pytest.approx(N / 2 * (-np.log(sigma) + r * sigma), rel=1e-13)
        g = neg_loglike_gradient(p, scalar_lags(r, N))
        assert g[0, 0, 0] == pytest.approx(N / 2 * (r - 1 / sigma), abs=1e-10)
    g = neg_loglike_gradient(PseudoPoly(np.array([[[1 / r]]])), scalar_lags(r, N))
    assert abs(g[0, 0, 0]) < 1e-10


def test_rejects_non_pd():
    with pytest.raises(NotPositiveDefinite):
        neg_loglike(PseudoPoly(np.array([[[-1.0]]])), scalar_lags(1.0))
    with pytest.raises(NotPositiveDefinite):
        neg_loglike_gradient(PseudoPoly(np.array([[[1.0]], [[3.0]]])), CovLags(np.ones((2, 1, 1)), 10))


def test_trace_term_two_paths():
    lags, sigma, _ = simulated_lags(2, 2, 2, 500, 3)
    g = FreqGrid(64)
    like = WhittleLikelihood(lags, g)
    assert like._trace(sigma.coeffs) == pytest.approx(trace_term_grid(sigma, lags, g), rel=1e-10)


def test_permutation_equivariance(rng):
    lags, sigma, _ = simulated_lags(2, 2, 1, 500, 4)
    P = np.eye(4)[rng.permutation(4)]
    sp = PseudoPoly(np.einsum("ij,tjk,lk->til", P, sigma.coeffs, P))
    lp = CovLags(np.einsum("ij,tjk,lk->til", P, lags.R, P), lags.N)
    assert neg_loglike(sp, lp) == pytest.approx(neg_loglike(sigma, lags), rel=1e-10)


def test_gradient_vanishes_at_me_solution():
    lags, _, _ = simulated_lags(2, 2, 2, 3000, 5)
    me = yule_walker_me(lags)
    g = neg_loglike_gradient(me, lags)
    assert np.abs(g).max() < 1e-6 * (lags.N - lags.n)


def test_gradient_finite_differences():
    rng = np.random.default_rng(0)
    lags, sigma, _ = simulated_lags(2, 2, 2, 800, 6)
    p = sigma + PseudoPoly(0.05 * rng.standard_normal((3, 4, 4)))
    g = neg_loglike_gradient(p, lags)
    h = 1e-5
    for t, a, b in [(0, 0, 0), (0, 3, 1), (1, 2, 0), (1, 0, 2), (2, 3, 3)]:
        E = np.zeros_like(p.coeffs)
        E[t, a, b] = 1.0
        fd = (neg_loglike(PseudoPoly(p.coeffs + h * E), lags) - neg_loglike(PseudoPoly(p.coeffs - h * E), lags)) / (2 * h)
        assert g[t, a, b] == pytest.approx(fd, rel=1e-6, abs=1e-6 * np.abs(g).max())
    assert np.all(np.triu(g[0], 1) == 0)


def test_q_values_examples():
    gi = build_group_index(1, 2, 1)
    assert np.all(q_values(PseudoPoly.zeros(2, 1), gi) == 0)
    S = np.zeros((2, 2, 2))
    S[1, 1, 0] = -0.7
    q = q_values(PseudoPoly(S), gi)
    idx = {tuple(t): i for i, t in enumerate(gi.tuples)}
    assert q[idx[(0, 1, 0, 0)]] == pytest.approx(0.7)
    assert np.count_nonzero(q) == 1
    assert np.array_equal(q, q_values(PseudoPoly(-S), gi))


def test_penalty_hand_sums():
    gi = build_group_index(1, 1, 0)
    hp = HyperParams([2.0], [3.0])
    assert penalty_max([0.5], gi, hp) == pytest.approx(1.5)
    assert penalty_mult([0.5], gi, hp) == pytest.approx(3.0)
    assert penalty_max([0.5], gi, HyperParams([0.0], [0.0])) == 0.0
    assert penalty_mult([0.5], gi, HyperParams([0.0], [3.0])) == 0.0


def test_penalty_monotone(rng):
    gi = build_group_index(2, 3, 1)
    q = rng.random(gi.n_groups)
    hp = HyperParams(rng.random(3), rng.random(6))
    base = penalty_max(q, gi, hp)
    for i in range(3):
        bumped = hp.copy()
        bumped.lam[i] += 0.5
        assert penalty_max(q, gi, bumped) >= base
    assert penalty_max(q + 0.1, gi, hp) >= base


def test_penalty_mult_bilinear(rng):
    gi = build_group_index(2, 2, 1)
    q = rng.random(gi.n_groups)
    l1, l2, g = rng.random(3), rng.random(3), rng.random(3)
    lhs = penalty_mult(q, gi, HyperParams(2 * l1 + 3 * l2, g))
    rhs = 2 * penalty_mult(q, gi, HyperParams(l1, g)) + 3 * penalty_mult(q, gi, HyperParams(l2, g))
    assert lhs == pytest.approx(rhs)


def test_penalty_sparse_examples(rng):
    S = np.zeros((2, 2, 2))
    S[0] = np.eye(2)
    S[1, 0, 1] = 0.4
    gs = sparse_group_index(2, 1)
    omega = np.zeros(gs.n_groups)
    omega[[i for i, t in enumerate(gs.tuples) if tuple(t) == (0, 1, 0, 0)][0]] = 2.0
    assert penalty_sparse(PseudoPoly(S), SparseWeights(omega)) == pytest.approx(0.8)
    assert penalty_sparse(PseudoPoly(S), SparseWeights(np.zeros(gs.n_groups))) == 0.0
    # with m1 = 1 the sparse penalty is the max penalty with Lambda = 0 and Gamma = Omega
    p = PseudoPoly(rng.standard_normal((2, 3, 3)))
    gs = sparse_group_index(3, 1)
    w = rng.random(gs.n_groups)
    assert penalty_sparse(p, SparseWeights(w)) == pytest.approx(penalty_max(q_values(p, gs), gs, HyperParams([0.0], w)))


def test_sparse_weight_matrix_layout():
    W = SparseWeights(np.arange(6.0)).matrix(3)
    assert np.array_equal(W, W.T)
    assert W[2, 1] == 4 and W[1, 0] == 1 and W[0, 0] == 0


def test_surrogates(rng):
    gi = build_group_index(2, 2, 1)
    q = rng.random(gi.n_groups)
    eps = 1e-3
    ones = HyperParams.constant(gi)
    assert surrogate_max(10.0, q, gi, ones, eps) == pytest.approx(10 + q.sum() + eps * 6)
    assert surrogate_mult(10.0, q, gi, ones, eps) == pytest.approx(10 + q.sum() + eps * 6)
    assert surrogate_max(10.0, q, gi, HyperParams.constant(gi, 0.0, 0.0), eps) == np.inf
    assert surrogate_mult(10.0, q, gi, HyperParams.constant(gi, 1.0, 0.0), eps) == np.inf
    gs = sparse_group_index(4, 1)
    assert surrogate_sparse(1.0, np.ones(gs.n_groups), gs, SparseWeights(np.zeros(gs.n_groups)), eps) == np.inf


def test_surrogate_mult_swap_symmetry(rng):
    gi = build_group_index(2, 2, 1)
    q = rng.random(gi.n_groups)
    qt = np.empty_like(q)
    idx = {tuple(t): i for i, t in enumerate(gi.tuples)}
    for (h, k, j, l), i in idx.items():
        qt[idx[(k, h, l, j)]] = q[i]
    lam, gam = rng.random(3) + 0.1, rng.random(3) + 0.1
    a = surrogate_mult(0.0, q, gi, HyperParams(lam, gam), 1e-3)
    b = surrogate_mult(0.0, qt, gi, HyperParams(gam, lam), 1e-3)
    assert a == pytest.approx(b, rel=1e-12)


def test_hyperparams_matrices_round_trip(rng):
    gi = build_group_index(3, 2, 1)
    hp = HyperParams(rng.random(6), rng.random(3))
    L, G = hp.matrices(gi)
    assert np.array_equal(L, L.T) and np.array_equal(G, G.T)
    back = HyperParams.from_matrices(gi, L, G)
    assert np.array_equal(back.lam, hp.lam) and np.array_equal(back.gam, hp.gam)
    with pytest.raises(ValueError):
        HyperParams([-1.0], [1.0])
