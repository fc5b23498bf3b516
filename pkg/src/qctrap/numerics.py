"""Small dense Hermitian linear algebra: eigendecomposition, unitary
exponentials and the exact derivative of the exponential map.

Every function accepts either a single ``(N, N)`` matrix or a stack
``(..., N, N)``; stacking is how the propagator evaluates all time
intervals of a field in one LAPACK call.
"""
from typing import NamedTuple

import numpy as np

HERMITIAN_TOL = 1e-10
# eigenvalue gaps below this use the confluent divided difference
DEGENERACY_TOL = 1e-12


class EigenDecomposition(NamedTuple):
    """Ascending real eigenvalues and unitary eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        v = self.vectors
        return (v * self.values[..., None, :]) @ dagger(v)


def dagger(m):
    return np.conj(np.swapaxes(m, -1, -2))


def _frob(m):
    return np.sqrt(np.sum(np.abs(m) ** 2, axis=(-2, -1)))


def is_hermitian(m, tol=HERMITIAN_TOL):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        return False
    return bool(np.all(_frob(m - dagger(m)) <= tol))


def is_unitary(m, tol=1e-10):
    m = np.asarray(m)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        return False
    eye = np.eye(m.shape[-1])
    return bool(np.all(_frob(dagger(m) @ m - eye) <= tol))


def check_hermitian(m, name="H", tol=HERMITIAN_TOL):
    """Return ``m`` as a complex array or raise ``ValueError``.

    The tolerance is relative to ``max(1, ||m||_F)`` so large field
    amplitudes do not trip the check on round-off alone.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    dev = _frob(m - dagger(m))
    scale = np.maximum(1.0, _frob(m))
    if np.any(dev > tol * scale):
        raise ValueError(
            f"{name} is not Hermitian: ||{name} - {name}^dag||_F = "
            f"{float(np.max(dev)):.3e} exceeds tolerance {tol:.0e}"
        )
    return m


def hermitian_eig(h):
    """Eigendecomposition of a Hermitian matrix (or stack of them).

    Raises
    ------
    ValueError
        If ``h`` deviates from Hermitian by more than 1e-10 (relative).
    """
    h = check_hermitian(h)
    w, v = np.linalg.eigh(h)
    return EigenDecomposition(w, v)


def _phases(values, dt):
    return np.exp(-1j * values * dt)


def expm_from_eig(eig, dt):
    v = eig.vectors
    return (v * _phases(eig.values, dt)[..., None, :]) @ dagger(v)


def expm_unitary(h, dt):
    """``exp(-i h dt)`` for Hermitian ``h`` (hbar = 1)."""
    return expm_from_eig(hermitian_eig(h), dt)


def divided_differences(values, dt):
    """Matrix of first divided differences of ``f(x) = exp(-i x dt)``.

    ``G[j, k] = (f(l_j) - f(l_k)) / (l_j - l_k)`` with the derivative
    ``-i dt f(l_j)`` wherever ``|l_j - l_k| < 1e-12``.
    """
    values = np.asarray(values, dtype=float)
    f = _phases(values, dt)
    diff = values[..., :, None] - values[..., None, :]
    close = np.abs(diff) < DEGENERACY_TOL
    safe = np.where(close, 1.0, diff)
    g = (f[..., :, None] - f[..., None, :]) / safe
    conf = -1j * dt * 0.5 * (f[..., :, None] + f[..., None, :])
    return np.where(close, conf, g)


def expm_derivative_from_eig(eig, direction, dt):
    """Directional derivative given a precomputed decomposition.

    ``direction`` may be a single matrix broadcast against a stack.
    """
    v = eig.vectors
    vd = dagger(v)
    k = (vd @ direction @ v) * divided_differences(eig.values, dt)
    return v @ k @ vd


def expm_directional_derivative(h, direction, dt):
    """Derivative of ``exp(-i (h + e D) dt)`` in ``e`` at ``e = 0``.

    Uses the Daleckii-Krein formula ``V (G o (V^dag D V)) V^dag`` where
    ``G`` holds the divided differences of ``exp(-i x dt)`` over the
    eigenvalues of ``h``.
    """
    eig = hermitian_eig(h)
    direction = check_hermitian(direction, name="direction")
    return expm_derivative_from_eig(eig, direction, dt)


def cumulative_products(increments):
    """Left-multiplied running products ``I, V1, V2 V1, ..., VL ... V1``.

    Returns an array of shape ``(L + 1, N, N)``.
    """
    increments = np.asarray(increments)
    n_steps, n = increments.shape[0], increments.shape[-1]
    out = np.empty((n_steps + 1, n, n), dtype=complex)
    out[0] = np.eye(n)
    acc = out[0]
    for l in range(n_steps):
        acc = increments[l] @ acc
        out[l + 1] = acc
    return out


def polar_unitary(m):
    """Nearest unitary ``M (M^dag M)^{-1/2}`` via the SVD."""
    u, _, vh = np.linalg.svd(np.asarray(m, dtype=complex))
    return u @ vh
