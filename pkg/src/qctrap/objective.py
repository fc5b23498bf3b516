"""Objective values, landscape extrema and the convergence test."""
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .field import fluence
from .system import ObjectiveKind

# exhaustive permutation enumeration up to this dimension
MAX_ENUMERATION_N = 8


@dataclass(frozen=True)
class LandscapeExtrema:
    j_min: float
    j_max: float
    critical_values: tuple = ()

    @property
    def span(self):
        return self.j_max - self.j_min

    def default_eta(self):
        return 1e-3 * self.span


def bare_value(objective, U):
    """Objective at final propagator ``U`` without the fluence penalty."""
    kind = objective.kind
    if kind == ObjectiveKind.STATE_TRANSITION:
        z = objective.final_state.conj() @ U @ objective.initial_state
        return float(abs(z) ** 2)
    if kind == ObjectiveKind.OBSERVABLE:
        return float(np.trace(U.conj().T @ objective.theta @ U @ objective.rho0).real)
    N = objective.dimension
    return float(0.5 - np.trace(objective.target.conj().T @ U).real / (2 * N))


def evaluate(objective, U, field=None):
    """Objective value, minus ``w * fluence(field)`` when a penalty is set."""
    j = bare_value(objective, U)
    if objective.penalty_weight > 0:
        if field is None:
            raise ValueError("a field is required to evaluate the fluence penalty")
        j -= objective.penalty_weight * fluence(field)
    return j


def unitary_gradient(objective, U):
    """Matrix ``G`` with ``dJ = Re Tr(G^dag dU)`` for the bare objective."""
    kind = objective.kind
    if kind == ObjectiveKind.STATE_TRANSITION:
        f, i = objective.final_state, objective.initial_state
        z = f.conj() @ U @ i
        return 2 * z * np.outer(f, i.conj())
    if kind == ObjectiveKind.OBSERVABLE:
        return 2 * objective.theta @ U @ objective.rho0
    return -objective.target / (2 * objective.dimension)


def landscape_extrema(objective, N=None):
    """Global extrema and the list of critical values of the bare landscape.

    For the observable objective the critical values are every pairing
    ``sum_k p_sigma(k) theta_k`` of the two spectra; above
    ``MAX_ENUMERATION_N`` only the sorted extremes are returned.
    """
    if objective.penalty_weight > 0:
        raise ValueError(
            "landscape extrema are defined for the bare objective; "
            "call objective.without_penalty() first"
        )
    N = objective.dimension if N is None else N
    kind = objective.kind
    if kind == ObjectiveKind.STATE_TRANSITION:
        return LandscapeExtrema(0.0, 1.0, (0.0, 1.0))
    if kind == ObjectiveKind.EVOLUTION_OPERATOR:
        return LandscapeExtrema(0.0, 1.0, tuple(k / N for k in range(N + 1)))
    p = np.linalg.eigvalsh(objective.rho0)
    th = np.linalg.eigvalsh(objective.theta)
    j_max = float(np.sort(p) @ np.sort(th))
    j_min = float(np.sort(p)[::-1] @ np.sort(th))
    if N > MAX_ENUMERATION_N:
        return LandscapeExtrema(j_min, j_max, ())
    vals = {round(float(np.dot(p[list(s)], th)), 12) for s in permutations(range(N))}
    return LandscapeExtrema(j_min, j_max, tuple(sorted(vals)))


def converged(J, extrema, eta=None, maximize=True):
    if eta is None:
        eta = extrema.default_eta()
    if eta <= 0:
        raise ValueError("eta must be positive")
    if maximize:
        return bool(J >= extrema.j_max - eta)
    return bool(J <= extrema.j_min + eta)
