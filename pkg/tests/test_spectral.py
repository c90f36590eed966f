import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kronar.spectral import (
    FreqGrid,
    KroneckerSupport,
    PseudoPoly,
    SpectralField,
    build_group_index,
    coefficients_to_poly,
    evaluate,
    fourier_coefficients,
    group_alpha,
    invert_field,
    kron_support,
    min_grid_eigenvalue,
)


def random_poly(rng, m, n, scale=1.0):
    S = scale * rng.standard_normal((n + 1, m, m))
    return PseudoPoly(S)


def test_grid_must_be_power_of_two():
    with pytest.raises(ValueError):
        FreqGrid(100)
    g = FreqGrid(8)
    assert g.theta[0] == -np.pi
    assert np.allclose(np.diff(g.theta), 2 * np.pi / 8)


def test_arithmetic_pads_orders(rng):
    p = random_poly(rng, 2, 2)
    q = p + PseudoPoly.identity(2)
    assert q.n == 2
    assert np.allclose(q.coeffs[0] - p.coeffs[0], np.eye(2))
    assert np.array_equal(q.coeffs[1:], p.coeffs[1:])
    assert np.allclose((q - p).coeffs[0], np.eye(2))


def test_s0_is_rebuilt_symmetric(rng):
    S = rng.standard_normal((2, 3, 3))
    p = PseudoPoly(S)
    assert np.array_equal(p.coeffs[0], p.coeffs[0].T)
    assert np.array_equal(np.tril(p.coeffs[0]), np.tril(S[0]))
    assert np.array_equal(p.coeffs[1], S[1])


def test_constant_identity_field():
    f = evaluate(PseudoPoly.identity(2), FreqGrid(16))
    assert np.allclose(f.values, np.eye(2))


def test_scalar_evaluation():
    g = FreqGrid(16)
    f = evaluate(PseudoPoly(np.array([[[2.0]], [[1.0]]])), g)
    assert np.allclose(f.values[:, 0, 0], 2 + np.cos(g.theta), atol=1e-14)
    assert np.isclose(f.values[g.size // 2, 0, 0].real, 3.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_hermitian_and_conjugate_symmetry(m, n, seed):
    rng = np.random.default_rng(seed)
    g = FreqGrid(32)
    V = evaluate(random_poly(rng, m, n), g).values
    assert np.allclose(V, np.conj(np.swapaxes(V, -1, -2)), atol=1e-12)
    # theta_g and -theta_g pair up as g <-> G - g
    for i in range(1, g.size):
        assert np.allclose(V[g.size - i], np.conj(V[i]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 5), st.integers(0, 2**32 - 1))
def test_fourier_round_trip(m, n, seed):
    rng = np.random.default_rng(seed)
    p = random_poly(rng, m, n)
    C = fourier_coefficients(evaluate(p, FreqGrid(32)), n)
    assert np.allclose(C[0], p.coeffs[0], atol=1e-12)
    assert np.allclose(C[1:], 0.5 * p.coeffs[1:], atol=1e-12)
    back = coefficients_to_poly(C)
    assert np.allclose(back.coeffs, p.coeffs, atol=1e-12)


def test_fourier_of_cos2():
    g = FreqGrid(16)
    f = SpectralField(g, np.cos(2 * g.theta)[:, None, None].astype(complex))
    C = fourier_coefficients(f, 2)
    assert np.allclose(C.ravel(), [0, 0, 0.5], atol=1e-14)


def test_fourier_constant_field():
    C = fourier_coefficients(evaluate(PseudoPoly.identity(3), FreqGrid(8)), 2)
    assert np.allclose(C[0], np.eye(3)) and np.allclose(C[1:], 0)


def test_fourier_rejects_coarse_grid():
    with pytest.raises(ValueError, match="grid too coarse"):
        fourier_coefficients(evaluate(PseudoPoly.identity(1, 4), FreqGrid(8)), 4)


def test_trapezoid_exact_on_trig_polynomials():
    g = FreqGrid(16)
    for k in range(1, 16):
        assert abs(np.mean(np.exp(1j * k * g.theta))) < 1e-14


def test_invert_field():
    g = FreqGrid(32)
    I = evaluate(PseudoPoly.identity(2), g)
    assert np.allclose(invert_field(I).values, np.eye(2))
    S = np.zeros((2, 2, 2))
    S[0] = np.diag([2.0, 1.0])
    S[1, 0, 0] = 1.0
    inv = invert_field(evaluate(PseudoPoly(S), g)).values
    assert np.allclose(inv[:, 0, 0], 1 / (2 + np.cos(g.theta)))
    assert np.allclose(inv[:, 1, 1], 1.0)
    f = evaluate(PseudoPoly(S), g)
    assert np.allclose(invert_field(invert_field(f)).values, f.values, atol=1e-10)


def test_invert_field_singular_names_frequency():
    g = FreqGrid(8)
    f = evaluate(PseudoPoly(np.array([[[1.0]], [[1.0]]])), g)  # 1 + cos vanishes at -pi
    with pytest.raises(np.linalg.LinAlgError, match="theta"):
        invert_field(f)


def test_min_grid_eigenvalue():
    g = FreqGrid(32)
    assert min_grid_eigenvalue(evaluate(PseudoPoly.identity(3), g)) == pytest.approx(1.0)
    f = evaluate(PseudoPoly(np.array([[[2.0]], [[1.0]]])), g)
    assert min_grid_eigenvalue(f) == pytest.approx(1.0, abs=1e-14)


def test_min_grid_eigenvalue_shift(rng):
    g = FreqGrid(32)
    p = random_poly(rng, 3, 2)
    lo = min_grid_eigenvalue(evaluate(p, g))
    q = p - PseudoPoly(lo * np.eye(3)[None])
    assert abs(min_grid_eigenvalue(evaluate(q, g))) < 1e-12


def test_support_validation():
    with pytest.raises(ValueError):
        KroneckerSupport(np.array([[1, 1], [0, 1]]), np.eye(2))
    with pytest.raises(ValueError):
        KroneckerSupport(np.array([[0, 0], [0, 1]]), np.eye(2))
    with pytest.raises(ValueError):
        KroneckerSupport(np.array([[1, 2], [2, 1]]), np.eye(2))


def test_kron_support_examples():
    assert np.array_equal(kron_support(KroneckerSupport(np.eye(2), np.eye(3))), np.eye(6))
    K = kron_support(KroneckerSupport(np.ones((2, 2)), np.eye(2)))
    assert np.array_equal(K, np.tile(np.eye(2), (2, 2)))


def test_two_layer_example_count():
    E1 = np.eye(3, dtype=int)
    for a, b in [(0, 1), (1, 2)]:
        E1[a, b] = E1[b, a] = 1
    E2 = np.eye(4, dtype=int)
    for a, b in [(0, 1), (1, 2), (1, 3)]:
        E2[a, b] = E2[b, a] = 1
    K = kron_support(KroneckerSupport(E1, E2))
    assert K.shape == (12, 12)
    assert K.sum() == 70 == E1.sum() * E2.sum()


def test_group_alpha_table():
    gi = build_group_index(2, 3, 2)
    idx = {tuple(t): i for i, t in enumerate(gi.tuples)}
    assert gi.alpha[idx[(0, 0, 0, 0)]] == 3
    assert gi.alpha[idx[(1, 1, 0, 0)]] == 10
    assert group_alpha(1, 0, 1, 0, 2) == 3
    assert group_alpha(1, 0, 0, 0, 2) == 5
    assert group_alpha(0, 1, 0, 0, 2) == 5


@pytest.mark.parametrize("m1,m2", [(1, 1), (1, 3), (2, 2), (2, 3), (3, 2), (4, 4)])
@pytest.mark.parametrize("n", [0, 1, 2])
def test_group_index_partitions_free_coefficients(m1, m2, n):
    gi = build_group_index(m1, m2, n)
    m = m1 * m2
    assert gi.n_groups == (m1 * (m1 + 1) // 2) * (m2 * (m2 + 1) // 2)
    pos = list(zip(gi.pos_t, gi.pos_row, gi.pos_col))
    assert len(pos) == len(set(pos))
    free = {(0, a, b) for a in range(m) for b in range(a + 1)}
    free |= {(t, a, b) for t in range(1, n + 1) for a in range(m) for b in range(m)}
    assert set(pos) == free
    assert np.array_equal(np.diff(gi.offsets), gi.alpha)


def test_group_index_two_by_two_counts():
    for n in range(3):
        gi = build_group_index(2, 2, n)
        assert gi.n_groups == 9
        lag1 = {(a, b) for t, a, b in zip(gi.pos_t, gi.pos_row, gi.pos_col) if t == 1}
        if n >= 1:
            assert len(lag1) == 16


def test_group_positions_carry_kronecker_labels():
    m1, m2 = 3, 2
    gi = build_group_index(m1, m2, 1)
    for g, (h, k, j, l) in enumerate(gi.tuples):
        sl = slice(gi.offsets[g], gi.offsets[g + 1])
        for a, b in zip(gi.pos_row[sl], gi.pos_col[sl]):
            mods = {a // m2, b // m2}
            nodes = {a % m2, b % m2}
            assert mods == {h, j} and nodes == {k, l}


def test_params_round_trip(rng):
    gi = build_group_index(2, 3, 2)
    p = random_poly(rng, 6, 2)
    assert np.array_equal(gi.to_poly(gi.to_params(p)).coeffs, p.coeffs)
