"""Model Hamiltonians, objective data and unitary targets."""
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from itertools import combinations

import numpy as np

from .numerics import check_hermitian, expm_unitary, is_unitary, polar_unitary


@dataclass(frozen=True)
class QuantumSystem:
    """Closed N-level system driven through ``H(t) = h0 - dipole * eps(t)``."""

    h0: np.ndarray
    dipole: np.ndarray

    def __post_init__(self):
        h0 = check_hermitian(self.h0, "h0", tol=1e-12)
        mu = check_hermitian(self.dipole, "dipole", tol=1e-12)
        if h0.ndim != 2 or h0.shape != mu.shape:
            raise ValueError(f"h0 {h0.shape} and dipole {mu.shape} must be equal N x N")
        if h0.shape[0] < 2:
            raise ValueError("dimension must be >= 2")
        h0.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "dipole", mu)

    @property
    def dimension(self):
        return self.h0.shape[0]

    @property
    def is_real(self):
        return not (np.any(self.h0.imag) or np.any(self.dipole.imag))


def build_rotor_system(N, lam=1.0, D=0.5, diagonal_dipole=0.0):
    """Rotor-like ladder with geometrically decaying dipole couplings.

    ``h0 = diag(lam * j * (j + 1))`` and ``mu[j, k] = D**|j - k| / D``
    off the diagonal, ``mu[j, j] = diagonal_dipole``.
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if not 0 < D <= 1:
        raise ValueError(f"D must lie in (0, 1], got {D}")
    j = np.arange(N)
    h0 = np.diag(lam * j * (j + 1.0))
    mu = D ** np.abs(j[:, None] - j[None, :]) / D
    np.fill_diagonal(mu, diagonal_dipole)
    return QuantumSystem(h0.astype(complex), mu.astype(complex))


def transition_frequency_bounds(system):
    """Smallest nonzero and largest level spacing of a diagonal ``h0``."""
    h0 = system.h0 if isinstance(system, QuantumSystem) else np.asarray(system)
    off = h0 - np.diag(np.diag(h0))
    if np.any(np.abs(off) > 1e-12):
        raise ValueError("h0 must be diagonal to read off transition frequencies")
    e = np.diag(h0).real
    gaps = np.array([abs(a - b) for a, b in combinations(e, 2)])
    nonzero = gaps[gaps > 1e-12]
    if nonzero.size == 0:
        raise ValueError("fully degenerate spectrum has no transition frequencies")
    return float(nonzero.min()), float(gaps.max())


def random_hermitian(N, rng):
    """Hermitian matrix with entries drawn uniformly on [0, 2 pi].

    Draw order: upper-triangle real parts (row-major), upper-triangle
    imaginary parts, then the real diagonal.
    """
    iu = np.triu_indices(N, k=1)
    re = rng.uniform(0.0, 2 * np.pi, size=len(iu[0]))
    im = rng.uniform(0.0, 2 * np.pi, size=len(iu[0]))
    diag = rng.uniform(0.0, 2 * np.pi, size=N)
    a = np.zeros((N, N), dtype=complex)
    a[iu] = re + 1j * im
    a = a + a.conj().T
    a[np.diag_indices(N)] = diag
    return a


def random_unitary_target(N, seed, generator=None):
    """Quasirandom target ``W = exp(i A)`` with ``A`` from :func:`random_hermitian`.

    ``generator`` overrides the Hermitian generator; it is called with
    ``(N, rng)`` and exists so tests can force ``A``.
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    a = (generator or random_hermitian)(N, rng)
    # exp(i A) = exp(-i A dt) with dt = -1
    return expm_unitary(a, -1.0)


def _load_presets():
    text = resources.files("qctrap").joinpath("data/preset_targets.json").read_text()
    raw = json.loads(text)
    return {k: np.array([[complex(re, im) for re, im in row] for row in v])
            for k, v in raw.items()}


def preset_targets(raw=False):
    """The two 5 x 5 benchmark targets ``(W1, W2)``.

    The stored entries are rounded to three decimals, so by default each
    matrix is projected onto the nearest unitary. ``raw=True`` returns
    the stored values untouched.
    """
    p = _load_presets()
    w1, w2 = p["W1"], p["W2"]
    if raw:
        return w1, w2
    return polar_unitary(w1), polar_unitary(w2)


class ObjectiveKind(str, Enum):
    STATE_TRANSITION = "state_transition"
    OBSERVABLE = "observable"
    EVOLUTION_OPERATOR = "evolution_operator"


def _as_operator(x, N, name):
    x = np.asarray(x, dtype=complex)
    if x.ndim == 1:
        x = np.diag(x)
    if x.shape != (N, N):
        raise ValueError(f"{name} must be length-{N} spectrum or {N}x{N} matrix")
    return check_hermitian(x, name)


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which landscape is optimized and the data that defines it.

    Use the ``state_transition``, ``observable`` and
    ``evolution_operator`` constructors rather than the raw initializer.
    ``maximize`` defaults to ``False`` only for the evolution-operator
    distance.
    """

    kind: ObjectiveKind
    dimension: int
    initial_state: np.ndarray = None
    final_state: np.ndarray = None
    rho0: np.ndarray = None
    theta: np.ndarray = None
    target: np.ndarray = None
    maximize: bool = None
    penalty_weight: float = 0.0
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        kind = ObjectiveKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.maximize is None:
            object.__setattr__(self, "maximize", kind != ObjectiveKind.EVOLUTION_OPERATOR)
        if self.penalty_weight < 0:
            raise ValueError("penalty_weight must be >= 0")
        N = self.dimension
        if kind == ObjectiveKind.STATE_TRANSITION:
            for name in ("initial_state", "final_state"):
                v = np.asarray(getattr(self, name), dtype=complex)
                if v.shape != (N,):
                    raise ValueError(f"{name} must have shape ({N},)")
                if abs(np.linalg.norm(v) - 1) > 1e-12:
                    raise ValueError(f"{name} must be normalized to 1 within 1e-12")
                object.__setattr__(self, name, v)
        elif kind == ObjectiveKind.OBSERVABLE:
            rho = _as_operator(self.rho0, N, "rho0")
            if abs(np.trace(rho).real - 1) > 1e-10:
                raise ValueError("rho0 must have unit trace within 1e-10")
            if np.linalg.eigvalsh(rho).min() < -1e-10:
                raise ValueError("rho0 must be positive semidefinite")
            object.__setattr__(self, "rho0", rho)
            object.__setattr__(self, "theta", _as_operator(self.theta, N, "theta"))
        else:
            w = np.asarray(self.target, dtype=complex)
            if w.shape != (N, N) or not is_unitary(w, tol=1e-6):
                raise ValueError("target must be an N x N unitary within 1e-6")
            object.__setattr__(self, "target", w)

    @classmethod
    def state_transition(cls, N, initial, final, **kw):
        """Transition probability between basis states or given vectors."""
        def ket(x):
            if np.isscalar(x):
                v = np.zeros(N, dtype=complex)
                v[int(x)] = 1.0
                return v
            return np.asarray(x, dtype=complex)
        return cls(ObjectiveKind.STATE_TRANSITION, N,
                   initial_state=ket(initial), final_state=ket(final), **kw)

    @classmethod
    def observable(cls, N, rho0, theta, **kw):
        return cls(ObjectiveKind.OBSERVABLE, N, rho0=rho0, theta=theta, **kw)

    @classmethod
    def evolution_operator(cls, target, **kw):
        target = np.asarray(target, dtype=complex)
        return cls(ObjectiveKind.EVOLUTION_OPERATOR, target.shape[0], target=target, **kw)

    @property
    def gamma_sign(self):
        return 1.0 if self.maximize else -1.0

    def without_penalty(self):
        from dataclasses import replace
        return replace(self, penalty_weight=0.0)
