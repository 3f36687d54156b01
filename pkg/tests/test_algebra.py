import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dkglab.algebra import (
    ALPHA, BETA, GAMMA, I4, SPIN, DomainError, Sign, alpha_dot, angle, basis_matrix,
    bilinear_symbol, angle_bound, projection_product_decomposition, null_symbol, operator_norm, pauli,
    projection, reconstruct_projection_product, unit, verify_algebra,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
vectors = arrays(np.float64, 3, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_beta_and_alpha1_entries():
    assert np.array_equal(BETA, np.diag([1, 1, -1, -1]).astype(complex))
    expected = np.zeros((4, 4), complex)
    expected[0, 3] = expected[1, 2] = expected[2, 1] = expected[3, 0] = 1
    assert np.array_equal(ALPHA[0], expected)


def test_gamma_spatial_blocks():
    for j in range(1, 4):
        g = GAMMA[j]
        assert np.array_equal(g[:2, 2:], pauli(j))
        assert np.array_equal(g[2:, :2], -pauli(j))
        assert not g[:2, :2].any() and not g[2:, 2:].any()


def test_spin_is_block_diagonal_pauli():
    for m in range(3):
        assert np.array_equal(SPIN[m][:2, :2], pauli(m + 1))
        assert np.array_equal(SPIN[m][2:, 2:], pauli(m + 1))


def test_matrices_are_read_only():
    with pytest.raises(ValueError):
        BETA[0, 0] = 2


def test_bad_indices():
    with pytest.raises(DomainError):
        pauli(0)
    with pytest.raises(DomainError):
        basis_matrix("alpha", 4)
    with pytest.raises(DomainError):
        basis_matrix("delta", 1)


@pytest.mark.parametrize("text,value", [("+", 1), ("-", -1), ("plus", 1), ("minus", -1), (1, 1), (-1, -1)])
def test_sign_parse(text, value):
    assert int(Sign.parse(text)) == value


def test_sign_negation_and_rejects_zero():
    assert -Sign.PLUS is Sign.MINUS
    with pytest.raises(DomainError):
        Sign.parse(0)


def test_verify_algebra_default_passes():
    rep = verify_algebra(samples=2000, seed=3)
    assert rep.passed, rep.failures
    assert len([c for c in rep.checks if c.exact]) >= 8


def test_verify_algebra_zero_tolerance_fails_only_floating_checks():
    rep = verify_algebra(samples=500, seed=1, tol=0.0)
    assert not rep.passed
    assert all(c.passed for c in rep.checks if c.exact)
    assert any(not c.passed for c in rep.checks if not c.exact)


def test_verify_algebra_rejects_empty_sample():
    with pytest.raises(DomainError):
        verify_algebra(samples=0)


@settings(max_examples=200, deadline=None)
@given(vectors)
def test_projection_identities(xi):
    p, m = projection(+1, xi), projection(-1, xi)
    assert np.allclose(p @ p, p, atol=1e-13)
    assert np.allclose(p @ m, 0, atol=1e-13)
    assert np.allclose(p + m, I4, atol=1e-15)
    assert np.allclose(p, p.conj().T, atol=0)
    assert abs(np.trace(p) - 2) < 1e-13
    assert np.allclose(p @ BETA, BETA @ m, atol=1e-13)
    assert np.allclose(projection(+1, -xi), m, atol=1e-15)
    n = np.linalg.norm(xi)
    assert np.allclose(alpha_dot(xi) @ p / n, p, atol=1e-12)


def test_projection_at_zero_is_half_identity():
    assert np.array_equal(projection(+1, np.zeros(3)), 0.5 * I4)
    assert np.array_equal(projection(-1, np.zeros(3)), 0.5 * I4)
    _, is_zero = unit(np.zeros((2, 3)))
    assert is_zero.all()


def test_projection_broadcasts():
    xi = np.random.default_rng(0).standard_normal((5, 7, 3))
    assert projection(+1, xi).shape == (5, 7, 4, 4)


def test_angle_rejects_zero_vector():
    with pytest.raises(DomainError):
        angle(np.zeros(3), np.ones(3))


def test_angle_values():
    assert angle([1, 0, 0], [0, 2, 0]) == pytest.approx(np.pi / 2)
    assert angle([1, 0, 0], [-3, 0, 0]) == pytest.approx(np.pi)
    assert angle([1, 1, 0], [2, 2, 0]) == 0.0


@settings(max_examples=100, deadline=None)
@given(vectors, vectors)
def test_projection_product_decomposition_reconstructs(xi, eta):
    parts = projection_product_decomposition(xi, eta)
    assert np.allclose(reconstruct_projection_product(*parts), 4 * projection(+1, xi) @ projection(-1, eta), atol=1e-12)


# Frozen oracle: on the two-dimensional eigenspaces the product of the
# projections has norm sin(theta/2); values below were computed from that
# closed form, independently of the SVD pipeline.
ORACLE = [
    ((1, 0, 0), (0, 1, 0), 0.7071067811865476),
    ((1, 0, 0), (1, 1, 0), 0.3826834323650898),
    ((0, 0, 1), (0, 0, -2), 1.0),
    ((1, 2, 3), (1, 2, 3.0001), 7.98578593776779e-06),
]


@pytest.mark.parametrize("xi,eta,expected", ORACLE)
def test_projection_product_norm_oracle(xi, eta, expected):
    val = operator_norm(projection(+1, np.array(xi, float)) @ projection(-1, np.array(eta, float)))
    assert val == pytest.approx(expected, rel=1e-6)


def test_projection_product_norm_matches_half_angle_sine():
    rng = np.random.default_rng(11)
    xi, eta = rng.standard_normal((2, 2000, 3))
    norms = operator_norm(projection(+1, xi) @ projection(-1, eta))
    assert np.allclose(norms, np.sin(angle(xi, eta) / 2), atol=1e-12)


def test_angle_bound_holds_on_sample():
    rng = np.random.default_rng(5)
    xi, eta = rng.standard_normal((2, 5000, 3))
    norms = operator_norm(projection(+1, xi) @ projection(-1, eta))
    assert np.all(norms <= angle_bound(angle(xi, eta)) + 1e-15)


def test_null_symbol_vanishes_on_parallel_configurations():
    rng = np.random.default_rng(2)
    d = rng.standard_normal((200, 3))
    a, c = rng.uniform(0.1, 10, (2, 200, 1))
    assert np.max(np.abs(null_symbol("+", a * d, -c * d))) <= 1e-14
    assert np.max(np.abs(null_symbol("-", a * d, c * d))) <= 1e-14


def test_null_symbol_nonzero_off_the_null_configuration():
    d = np.array([0.3, -0.4, 1.2])
    assert operator_norm(null_symbol("+", d, d)) == pytest.approx(1.0)
    assert operator_norm(null_symbol("-", d, -d)) == pytest.approx(1.0)


def test_null_symbol_rejects_zero_frequency():
    with pytest.raises(DomainError):
        null_symbol("+", np.zeros(3), np.ones(3))


def test_bilinear_symbol_matches_projection_product():
    eta, zeta = np.array([1.0, 0.5, -0.2]), np.array([-0.3, 0.1, 2.0])
    expected = BETA @ projection(+1, -zeta) @ projection(-1, eta)
    assert np.allclose(bilinear_symbol("-", "-", eta, zeta), expected, atol=0)
