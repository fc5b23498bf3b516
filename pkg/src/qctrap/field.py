"""Piecewise-constant control fields and their two parameterizations.

Free samples (one variable per time interval) and fixed-amplitude
spectral components with adjustable phases. Both synthesize to a
:class:`PiecewiseField`, which is what the propagator consumes.

Random draws go through ``numpy.random.SeedSequence(seed).spawn(3)``;
the children are used, in order, for frequencies, amplitudes and
phases, so each quantity is reproducible on its own.
"""
import csv
from dataclasses import dataclass, replace

import numpy as np

from .system import transition_frequency_bounds


def rngs(seed):
    """Generators for (frequencies, amplitudes, phases) derived from ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF)
    return tuple(np.random.default_rng(s) for s in ss.spawn(3))


@dataclass(frozen=True)
class FieldGrid:
    """``L`` equal intervals on ``[0, T]``; sample ``l`` sits at ``t_l = l * dt``."""

    T: float
    L: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"T must be positive and finite, got {self.T}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "T", float(self.T))

    @property
    def dt(self):
        return self.T / self.L

    @property
    def times(self):
        """Right endpoints ``t_1 .. t_L``."""
        return np.arange(1, self.L + 1) * self.dt


@dataclass(frozen=True)
class PiecewiseField:
    grid: FieldGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.shape != (self.grid.L,):
            raise ValueError(f"expected {self.grid.L} samples, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("field samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def with_samples(self, samples):
        return PiecewiseField(self.grid, samples)


def gaussian_envelope(t, A0, zeta, T):
    """``A0 * exp(-(t - T/2)**2 / (2 zeta**2))``."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    t = np.asarray(t, dtype=float)
    return A0 * np.exp(-((t - T / 2) ** 2) / (2 * zeta**2))


def fluence(field):
    """Discrete fluence ``sum(eps_l**2) * dt``."""
    return float(np.sum(np.square(field.samples)) * field.grid.dt)


def init_field_choice_i(system, grid, M=20, zeta=None, F0=1.0, seed=0):
    """Random superposition of ``M`` cosines under a Gaussian envelope.

    Frequencies are uniform between the smallest and largest transition
    frequency of ``system``, amplitudes uniform on [0, 1], and the
    envelope height is scaled so the fluence equals ``F0``.
    """
    if F0 <= 0:
        raise ValueError("F0 must be positive")
    if M < 1:
        raise ValueError("M must be >= 1")
    zeta = grid.T / 10 if zeta is None else zeta
    w_lo, w_hi = transition_frequency_bounds(system)
    r_freq, r_amp, _ = rngs(seed)
    omega = r_freq.uniform(w_lo, w_hi, size=M)
    a = r_amp.uniform(0.0, 1.0, size=M)
    t = grid.times
    shape = gaussian_envelope(t, 1.0, zeta, grid.T) * (a @ np.cos(np.outer(omega, t)))
    f_unit = np.sum(shape**2) * grid.dt
    if f_unit <= 0:
        raise ValueError("initial field vanished before normalization")
    return PiecewiseField(grid, shape * np.sqrt(F0 / f_unit))


@dataclass(frozen=True)
class SpectralPhaseField:
    """Unit-amplitude cosines with adjustable phases under a fixed envelope."""

    grid: FieldGrid
    frequencies: np.ndarray
    phases: np.ndarray
    A0: float
    zeta: float

    def __post_init__(self):
        w = np.array(self.frequencies, dtype=float).ravel()
        p = np.array(self.phases, dtype=float).ravel()
        if w.size < 1:
            raise ValueError("need at least one spectral component")
        if w.shape != p.shape:
            raise ValueError("frequencies and phases must have equal length")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(p))):
            raise ValueError("frequencies and phases must be finite")
        if self.zeta <= 0:
            raise ValueError("zeta must be positive")
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "phases", p)

    @property
    def M(self):
        return self.frequencies.size

    def envelope(self):
        return gaussian_envelope(self.grid.times, self.A0, self.zeta, self.grid.T)

    def with_phases(self, phases):
        return replace(self, phases=phases)


def init_spectral_field(grid, frequencies, F0, seed=0, zeta=None, phases=None):
    """Spectral-phase field with random initial phases on [0, 2 pi].

    ``A0`` is solved once so the initial field has fluence ``F0`` and is
    frozen afterwards; later phase changes move the fluence only slightly.
    """
    if F0 <= 0:
        raise ValueError("F0 must be positive")
    zeta = grid.T / 10 if zeta is None else zeta
    frequencies = np.asarray(frequencies, dtype=float)
    if phases is None:
        _, _, r_phase = rngs(seed)
        phases = r_phase.uniform(0.0, 2 * np.pi, size=frequencies.size)
    unit = SpectralPhaseField(grid, frequencies, phases, 1.0, zeta)
    f_unit = fluence(synthesize_choice_ii(unit))
    if f_unit <= 0:
        raise ValueError("initial spectral field vanished before normalization")
    return replace(unit, A0=float(np.sqrt(F0 / f_unit)))


def synthesize_choice_ii(spec):
    """Sample ``A(t) * sum_m cos(w_m t + phi_m)`` at the grid points."""
    t = spec.grid.times
    arg = np.outer(spec.frequencies, t) + spec.phases[:, None]
    return PiecewiseField(spec.grid, spec.envelope() * np.cos(arg).sum(axis=0))


def phase_sensitivities(spec):
    """``(M, L)`` array of ``d eps(t_l) / d phi_m``."""
    t = spec.grid.times
    arg = np.outer(spec.frequencies, t) + spec.phases[:, None]
    return -spec.envelope() * np.sin(arg)


def phase_sensitivity(spec, m):
    """Derivative of the sampled field with respect to phase ``m`` (0-based)."""
    if not 0 <= m < spec.M:
        raise IndexError(f"component index {m} out of range for M = {spec.M}")
    t = spec.grid.times
    arg = spec.frequencies[m] * t + spec.phases[m]
    return PiecewiseField(spec.grid, -spec.envelope() * np.sin(arg))


def write_field_csv(field, path):
    """Columns ``l, t_l, epsilon_l`` with full double precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["l", "t_l", "epsilon_l"])
        for l, (t, e) in enumerate(zip(field.grid.times, field.samples), start=1):
            w.writerow([l, repr(float(t)), repr(float(e))])


def read_field_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path} holds no samples")
    L = len(rows)
    t_last = float(rows[-1]["t_l"])
    eps = np.array([float(r["epsilon_l"]) for r in rows])
    return PiecewiseField(FieldGrid(t_last, L), eps)
