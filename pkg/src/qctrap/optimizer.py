"""Gradient-flow search over the control variables.

The flow ``dx/ds = gamma * dJ/dx`` is integrated in the algorithmic time
``s`` with forward Euler, classical RK4 at a fixed step, or the embedded
Dormand-Prince 4(5) pair with an absolute error tolerance.
"""
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import GradientMode, gradient_field_samples, propagate
from .field import PiecewiseField, fluence, phase_sensitivities, synthesize_choice_ii
from .objective import bare_value, converged, landscape_extrema


class Integrator(str, Enum):
    EULER = "euler"
    RK4 = "rk4"
    RK45 = "rk45"


class Termination(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    MAX_S = "max_s"
    STEP_FAILURE = "step_failure"


class Outcome(str, Enum):
    GLOBAL_OPTIMUM = "global_optimum"
    TRAPPED_CRITICAL = "trapped_critical"
    SADDLE_VICINITY = "saddle_vicinity"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class OptimizerConfig:
    integrator: Integrator = Integrator.RK45
    gamma: float = None
    step_size: float = None
    tolerance: float = 1e-8
    eta: float = None
    max_iterations: int = 50_000
    max_s: float = math.inf
    gradient_mode: GradientMode = GradientMode.EXACT

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        object.__setattr__(self, "gradient_mode", GradientMode(self.gradient_mode))
        if self.integrator == Integrator.RK45:
            if self.tolerance is None or not self.tolerance > 0:
                raise ValueError("the adaptive integrator needs a positive tolerance")
        elif self.step_size is None or not self.step_size > 0:
            raise ValueError(f"{self.integrator.value} needs a positive step_size")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.gamma is not None and self.gamma == 0:
            raise ValueError("gamma must be nonzero")

    def to_dict(self):
        return {
            "integrator": self.integrator.value,
            "gamma": self.gamma,
            "step_size": self.step_size,
            "tolerance": self.tolerance,
            "eta": self.eta,
            "max_iterations": self.max_iterations,
            "max_s": None if math.isinf(self.max_s) else self.max_s,
            "gradient_mode": self.gradient_mode.value,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("max_s") is None:
            d["max_s"] = math.inf
        return cls(**d)


class ControlProblem:
    """Binds a system, an objective and a control parameterization.

    Without ``spectral`` the variables are the field samples on ``grid``;
    with a :class:`~qctrap.field.SpectralPhaseField` template they are its
    phases, and the template's frequencies and envelope stay frozen.
    """

    def __init__(self, system, objective, grid, spectral=None, mode=GradientMode.EXACT):
        if system.dimension != objective.dimension:
            raise ValueError("objective and system dimensions differ")
        if spectral is not None and spectral.grid != grid:
            raise ValueError("spectral template lives on a different grid")
        self.system = system
        self.objective = objective
        self.grid = grid
        self.spectral = spectral
        self.mode = GradientMode(mode)
        self.extrema = landscape_extrema(objective.without_penalty())

    @property
    def uses_phases(self):
        return self.spectral is not None

    def field(self, x):
        if self.spectral is None:
            return PiecewiseField(self.grid, x)
        return synthesize_choice_ii(self.spectral.with_phases(x))

    def value_and_gradient(self, x):
        """Objective and its gradient in the active variables."""
        fld = self.field(x)
        prop = propagate(self.system, fld)
        J = bare_value(self.objective, prop.final)
        w = self.objective.penalty_weight
        if w > 0:
            J -= w * fluence(fld)
        g = gradient_field_samples(self.system, fld, self.objective, self.mode, prop=prop)
        if self.spectral is not None:
            g = phase_sensitivities(self.spectral.with_phases(x)) @ g
        return J, g

    def value(self, x):
        fld = self.field(x)
        J = bare_value(self.objective, propagate(self.system, fld).final)
        if self.objective.penalty_weight > 0:
            J -= self.objective.penalty_weight * fluence(fld)
        return J


def flow_rhs(state, problem, gamma):
    """``gamma`` times the gradient of J in the problem's variables."""
    return gamma * problem.value_and_gradient(np.asarray(state, dtype=float))[1]


@dataclass
class OptimizationTrace:
    iterations_used: int
    s_history: list
    J_history: list
    final_state: np.ndarray
    final_field: PiecewiseField
    converged: bool
    final_gradient_norm: float
    final_fluence: float
    termination_reason: Termination
    n_evaluations: int = 0
    diagnostics: dict = field(default_factory=dict)

    @property
    def final_J(self):
        return self.J_history[-1]

    def to_dict(self):
        return {
            "iterations_used": self.iterations_used,
            "s_history": [float(s) for s in self.s_history],
            "J_history": [float(j) for j in self.J_history],
            "final_state": [float(v) for v in self.final_state],
            "final_field": [float(v) for v in self.final_field.samples],
            "T": self.final_field.grid.T,
            "L": self.final_field.grid.L,
            "converged": self.converged,
            "final_gradient_norm": float(self.final_gradient_norm),
            "final_fluence": float(self.final_fluence),
            "termination_reason": self.termination_reason.value,
            "n_evaluations": self.n_evaluations,
            "diagnostics": self.diagnostics,
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("s,J\n")
            for s, j in zip(self.s_history, self.J_history):
                fh.write(f"{s!r},{j!r}\n")


# Dormand-Prince 5(4) tableau
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_BSTAR = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_E = _DP_B - _DP_BSTAR


class _Evaluator:
    """Counts evaluations and flags non-finite output."""

    def __init__(self, problem, gamma):
        self.problem = problem
        self.gamma = gamma
        self.count = 0

    def __call__(self, x):
        self.count += 1
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("control variables overflowed")
        J, g = self.problem.value_and_gradient(x)
        if not (np.isfinite(J) and np.all(np.isfinite(g))):
            raise FloatingPointError(f"non-finite objective or gradient (J = {J})")
        return J, self.gamma * g


# overflow shows up as non-finite values and ends the run with STEP_FAILURE
@np.errstate(over="ignore", invalid="ignore")
def optimize(problem, config, initial_state):
    """Run one gradient-flow search from ``initial_state``.

    Convergence is tested after every accepted step. For the adaptive
    integrator the iteration count includes rejected steps. Non-finite
    values end the run with ``STEP_FAILURE`` instead of raising.
    """
    x = np.array(initial_state, dtype=float)
    gamma = config.gamma
    if gamma is None:
        gamma = problem.objective.gamma_sign
    maximize = problem.objective.maximize
    extrema = problem.extrema
    eta = config.eta if config.eta is not None else extrema.default_eta()
    ev = _Evaluator(problem, gamma)

    s = 0.0
    iterations = 0
    diagnostics = {}
    reason = None
    try:
        J, k1 = ev(x)
    except FloatingPointError as exc:
        raise ValueError(f"initial state is not evaluable: {exc}") from None
    s_hist, j_hist = [s], [J]
    done = converged(J, extrema, eta, maximize)
    if done:
        reason = Termination.CONVERGED

    h = config.step_size
    if config.integrator == Integrator.RK45:
        h = 1e-3 / (1.0 + float(np.max(np.abs(k1))))
    tol = config.tolerance
    n_accepted = n_rejected = 0

    while reason is None:
        if iterations >= config.max_iterations:
            reason = Termination.MAX_ITERATIONS
            break
        if s >= config.max_s:
            reason = Termination.MAX_S
            break
        step = min(h, config.max_s - s)
        try:
            if config.integrator == Integrator.EULER:
                iterations += 1
                xn = x + step * k1
                J, k1 = ev(xn)
                x = xn
            elif config.integrator == Integrator.RK4:
                iterations += 1
                _, k2 = ev(x + 0.5 * step * k1)
                _, k3 = ev(x + 0.5 * step * k2)
                _, k4 = ev(x + step * k3)
                xn = x + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
                J, k1 = ev(xn)
                x = xn
            else:
                ks = [k1]
                for i in range(1, 6):
                    ks.append(ev(x + step * (np.array(_DP_A[i]) @ np.array(ks)))[1])
                xn = x + step * (_DP_B[:6] @ np.array(ks))
                Jn, k7 = ev(xn)
                ks.append(k7)
                iterations += 1
                err = step * float(np.max(np.abs(_DP_E @ np.array(ks))))
                if not np.isfinite(err):
                    raise FloatingPointError("non-finite error estimate")
                factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * (tol / err) ** 0.2))
                if err <= tol:
                    n_accepted += 1
                    x, J, k1 = xn, Jn, k7
                    h = step * factor
                else:
                    n_rejected += 1
                    h = step * factor
                    if h < 1e-14 * max(1.0, s):
                        raise FloatingPointError(f"step size underflow at s = {s}")
                    continue
        except FloatingPointError as exc:
            reason = Termination.STEP_FAILURE
            diagnostics["error"] = str(exc)
            diagnostics["s"] = s
            break
        s += step
        s_hist.append(s)
        j_hist.append(J)
        if converged(J, extrema, eta, maximize):
            reason = Termination.CONVERGED

    if config.integrator == Integrator.RK45:
        diagnostics["accepted"] = n_accepted
        diagnostics["rejected"] = n_rejected
        diagnostics["last_step"] = h
    fld = problem.field(x)
    return OptimizationTrace(
        iterations_used=iterations,
        s_history=s_hist,
        J_history=j_hist,
        final_state=x,
        final_field=fld,
        converged=reason == Termination.CONVERGED,
        final_gradient_norm=float(np.linalg.norm(k1) / abs(gamma)),
        final_fluence=fluence(fld),
        termination_reason=reason,
        n_evaluations=ev.count,
        diagnostics=diagnostics,
    )


def classify_termination(trace, extrema, grad_tol=1e-6, eta=None):
    """Diagnose why a search stopped.

    A stalled search whose objective sits within ``eta`` of a listed
    critical value is reported as a saddle vicinity.
    """
    if trace.converged:
        return Outcome.GLOBAL_OPTIMUM
    eta = extrema.default_eta() if eta is None else eta
    if trace.final_gradient_norm < grad_tol:
        J = trace.final_J
        if any(abs(J - c) <= eta for c in extrema.critical_values
               if c not in (extrema.j_min, extrema.j_max)):
            return Outcome.SADDLE_VICINITY
        return Outcome.TRAPPED_CRITICAL
    return Outcome.UNDETERMINED
