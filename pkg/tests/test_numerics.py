import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qctrap.numerics import (
    check_hermitian,
    cumulative_products,
    divided_differences,
    expm_directional_derivative,
    expm_unitary,
    hermitian_eig,
    is_unitary,
    polar_unitary,
)


def rand_herm(n, rng):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + a.conj().T) / 2


def taylor_expm(a, terms=60):
    """Scaled Taylor series, an oracle independent of eigendecomposition."""
    k = max(0, int(np.ceil(np.log2(max(np.linalg.norm(a, 1), 1e-16)))) + 1)
    b = a / 2**k
    out = np.eye(len(a), dtype=complex)
    term = np.eye(len(a), dtype=complex)
    for j in range(1, terms):
        term = term @ b / j
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


def test_zero_hamiltonian_gives_identity():
    assert np.allclose(expm_unitary(np.zeros((3, 3)), 0.7), np.eye(3), atol=0)


def test_diagonal_hamiltonian():
    u = expm_unitary(np.diag([0.0, 1.0]), np.pi)
    assert np.allclose(u, np.diag([1.0, -1.0]), atol=1e-15)


def test_matches_taylor_oracle():
    rng = np.random.default_rng(1)
    for n in range(2, 9):
        h = rand_herm(n, rng)
        for dt in (0.01, 0.3, 2.0):
            assert np.allclose(expm_unitary(h, dt), taylor_expm(-1j * h * dt), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.floats(1e-3, 5.0))
def test_expm_unitary_is_unitary(n, seed, dt):
    h = rand_herm(n, np.random.default_rng(seed)) * 5
    assert is_unitary(expm_unitary(h, dt), tol=1e-10)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError, match="tolerance"):
        expm_unitary(np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0)
    with pytest.raises(ValueError):
        check_hermitian(np.ones((2, 3)))


def test_stacked_input():
    rng = np.random.default_rng(2)
    hs = np.stack([rand_herm(4, rng) for _ in range(5)])
    us = expm_unitary(hs, 0.4)
    for h, u in zip(hs, us):
        assert np.allclose(u, expm_unitary(h, 0.4), atol=1e-14)


def test_directional_derivative_vs_finite_difference():
    rng = np.random.default_rng(3)
    h_fd = 1e-6
    for _ in range(100):
        n = int(rng.integers(2, 9))
        H, D = rand_herm(n, rng), rand_herm(n, rng)
        dt = float(rng.uniform(0.05, 1.0))
        fd = (expm_unitary(H + h_fd * D, dt) - expm_unitary(H - h_fd * D, dt)) / (2 * h_fd)
        ex = expm_directional_derivative(H, D, dt)
        assert np.linalg.norm(ex - fd) / np.linalg.norm(fd) < 1e-6


def test_directional_derivative_degenerate_spectrum():
    # identity-plus-rank-one H has a fully degenerate eigenspace
    H = np.eye(4) + np.outer([1, 0, 0, 0], [1, 0, 0, 0])
    D = rand_herm(4, np.random.default_rng(4))
    h_fd, dt = 1e-6, 0.8
    fd = (expm_unitary(H + h_fd * D, dt) - expm_unitary(H - h_fd * D, dt)) / (2 * h_fd)
    ex = expm_directional_derivative(H, D, dt)
    assert np.linalg.norm(ex - fd) / np.linalg.norm(fd) < 1e-6


def test_directional_derivative_commuting_direction():
    # for [H, D] = 0 the derivative is -i dt D exp(-i H dt)
    H = np.diag([0.0, 2.0, 6.0])
    D = np.diag([1.0, -1.0, 0.5])
    dt = 0.3
    ref = -1j * dt * D @ expm_unitary(H, dt)
    assert np.allclose(expm_directional_derivative(H, D, dt), ref, atol=1e-14)


def test_divided_differences_confluent_limit():
    w = np.array([1.0, 1.0 + 1e-14, 3.0])
    g = divided_differences(w, 0.5)
    assert np.isclose(g[0, 1], -0.5j * np.exp(-0.5j), atol=1e-12)
    assert np.isclose(g[0, 2], (np.exp(-0.5j) - np.exp(-1.5j)) / (1.0 - 3.0))


def test_hermitian_eig_reconstructs():
    h = rand_herm(5, np.random.default_rng(5))
    eig = hermitian_eig(h)
    assert np.allclose(eig.reconstruct(), h, atol=1e-13)


def test_cumulative_products():
    rng = np.random.default_rng(6)
    v = expm_unitary(np.stack([rand_herm(3, rng) for _ in range(4)]), 0.2)
    cum = cumulative_products(v)
    assert cum.shape == (5, 3, 3)
    assert np.allclose(cum[0], np.eye(3))
    assert np.allclose(cum[-1], v[3] @ v[2] @ v[1] @ v[0], atol=1e-14)


def test_polar_unitary_projects():
    rng = np.random.default_rng(7)
    u = expm_unitary(rand_herm(5, rng), 1.0)
    noisy = np.round(u, 3)
    p = polar_unitary(noisy)
    assert is_unitary(p, tol=1e-12)
    assert np.abs(p - u).max() < 5e-3


def test_eig_small_cases():
    assert np.allclose(hermitian_eig(np.eye(4)).values, 1.0)
    eig = hermitian_eig(np.diag([0.0, 2.0, 6.0, 12.0]))
    assert np.allclose(eig.values, [0, 2, 6, 12])
    assert np.allclose(np.abs(eig.vectors), np.eye(4))
    assert np.allclose(hermitian_eig(np.array([[0.0, 1.0], [1.0, 0.0]])).values, [-1, 1])


def test_expm_worked_cases():
    u = expm_unitary(np.diag([0.0, 2.0, 6.0, 12.0]), 1.0)
    assert np.allclose(u, np.diag(np.exp(-1j * np.array([0, 2, 6, 12]))), atol=1e-14)
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(expm_unitary(sx, np.pi), -np.eye(2), atol=1e-14)


def test_directional_derivative_worked_cases():
    d = expm_directional_derivative(np.diag([1.0, 3.0]), np.diag([1.0, 0.0]), 0.5)
    assert np.allclose(d, np.diag([-0.5j * np.exp(-0.5j), 0]), atol=1e-15)
    h = rand_herm(3, np.random.default_rng(8))
    assert np.allclose(expm_directional_derivative(h, rand_herm(3, np.random.default_rng(9)), 0.0), 0)
