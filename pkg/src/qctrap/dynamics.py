"""Piecewise-constant propagation and objective gradients.

Two gradient modes are offered. ``EXACT`` differentiates the discretized
product of interval propagators, so it is the true gradient of what
:func:`propagate` computes. ``APPROXIMATE`` samples the continuous-time
functional derivative at the interval right endpoints and scales by the
interval width; it differs from the exact gradient at O(dt).
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .field import phase_sensitivities, synthesize_choice_ii
from .numerics import cumulative_products, dagger, divided_differences
from .objective import bare_value, unitary_gradient
from .system import ObjectiveKind


class GradientMode(str, Enum):
    EXACT = "exact"
    APPROXIMATE = "approximate"


@dataclass(frozen=True)
class PropagationResult:
    """``cumulative[l] = U(t_l, 0)`` for ``l = 0..L``.

    The per-interval eigensystems are kept so gradients can reuse them.
    """

    cumulative: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dt: float
    projected: np.ndarray = None

    @property
    def final(self):
        return self.cumulative[-1]

    @property
    def increments(self):
        v = self.eigenvectors
        return (v * np.exp(-1j * self.eigenvalues * self.dt)[:, None, :]) @ dagger(v)


def _check_dims(system, N):
    if system.dimension != N:
        raise ValueError(f"objective dimension {N} does not match system {system.dimension}")


def propagate(system, field, compiled=True):
    """Compose ``exp(-i (h0 - mu eps_l) dt)`` over all intervals.

    Real systems go through the compiled kernel unless ``compiled`` is
    false; complex ones always use batched LAPACK.
    """
    eps = np.ascontiguousarray(field.samples, dtype=float)
    dt = field.grid.dt
    if compiled and system.is_real:
        cum, w, v, b = _kernels.forward(
            np.ascontiguousarray(system.h0.real), np.ascontiguousarray(system.dipole.real), eps, dt
        )
        return PropagationResult(cum, w, v, dt, b)
    h = system.h0[None] - eps[:, None, None] * system.dipole[None]
    w, v = np.linalg.eigh(h)
    inc = (v * np.exp(-1j * w * dt)[:, None, :]) @ dagger(v)
    return PropagationResult(cumulative_products(inc), w, v, dt)


def dipole_heisenberg(U, mu):
    """``U^dag mu U``; broadcasts over a stack of propagators."""
    return dagger(U) @ mu @ U


def _field_density(system, objective, prop, mode):
    if prop.projected is not None:
        gu = np.ascontiguousarray(unitary_gradient(objective, prop.final).conj().T @ prop.final)
        mu = np.ascontiguousarray(system.dipole.real)
        if mode == GradientMode.APPROXIMATE:
            return _kernels.approximate_density(prop.cumulative, mu, prop.dt, gu)
        return _kernels.exact_density(
            prop.projected, prop.eigenvalues, prop.eigenvectors, mu, prop.dt, gu
        )
    return _field_density_reference(system, objective, prop, mode)


def _field_density_reference(system, objective, prop, mode):
    """Per-interval gradient of the bare objective w.r.t. each ``eps_l``.

    The exact mode returns ``dJ/d eps_l``; the approximate one returns
    ``dt * dJ/d eps(t_l)`` from the continuous formula.
    """
    A = prop.cumulative
    U = prop.final
    mu = system.dipole
    dt = prop.dt
    if mode == GradientMode.APPROXIMATE:
        mu_t = dipole_heisenberg(A[1:], mu)
        kind = objective.kind
        if kind == ObjectiveKind.STATE_TRANSITION:
            f, i = objective.final_state, objective.initial_state
            z = f.conj() @ U @ i
            # <i| mu(t) U^dag |f>
            w = U.conj().T @ f
            g = 2 * np.imag(z * np.einsum("j,ljk,k->l", i.conj(), mu_t, w))
        elif kind == ObjectiveKind.OBSERVABLE:
            m = U.conj().T @ objective.theta @ U @ objective.rho0
            g = 2 * np.imag(np.einsum("jk,lkj->l", m, mu_t))
        else:
            m = objective.target.conj().T @ U
            g = np.imag(np.einsum("jk,lkj->l", m, mu_t)) / (2 * objective.dimension)
        return dt * g
    G = unitary_gradient(objective, U)
    # dU_T = B_l dV_l A_{l-1}, B_l = U_T A_l^dag
    X = A[:-1] @ (G.conj().T @ U) @ dagger(A[1:])
    P = prop.eigenvectors
    Pd = dagger(P)
    K = (Pd @ (-mu) @ P) * divided_differences(prop.eigenvalues, dt)
    Y = Pd @ X @ P
    return np.einsum("lkj,ljk->l", Y, K).real


def gradient_field_samples(system, field, objective, mode=GradientMode.EXACT, prop=None):
    """Gradient of the (penalized) objective with respect to each ``eps_l``.

    Always the ascent direction of J, whether J is maximized or not.
    """
    mode = GradientMode(mode)
    _check_dims(system, objective.dimension)
    if prop is None:
        prop = propagate(system, field)
    g = _field_density(system, objective, prop, mode)
    if objective.penalty_weight > 0:
        g = g - 2 * objective.penalty_weight * field.samples * field.grid.dt
    return g


def gradient_spectral_phases(system, spec, objective, mode=GradientMode.EXACT, prop=None):
    """Gradient with respect to the phases of a spectral-phase field.

    Chain rule through the sampled field: ``sum_l dJ/d eps_l * d eps_l/d phi_m``.
    """
    field = synthesize_choice_ii(spec)
    g = gradient_field_samples(system, field, objective, mode, prop=prop)
    return phase_sensitivities(spec) @ g


def objective_and_gradient(system, field, objective, mode=GradientMode.EXACT):
    """One propagation shared by the objective value and its gradient."""
    prop = propagate(system, field)
    J = bare_value(objective, prop.final)
    if objective.penalty_weight > 0:
        J -= objective.penalty_weight * float(np.sum(field.samples**2) * field.grid.dt)
    return J, gradient_field_samples(system, field, objective, mode, prop=prop), prop

