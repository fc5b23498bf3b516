"""Compare the exact gradient with central finite differences.

Both parameterizations are checked: free field samples and spectral
phases. The exact gradient differentiates the discretized propagator, so
it should agree with finite differences to roughly the square of the
difference step.

Run with ``python demos/gradient_check.py``.
"""
import numpy as np

from qctrap.dynamics import gradient_field_samples, gradient_spectral_phases, propagate
from qctrap.field import FieldGrid, init_field_choice_i, init_spectral_field, synthesize_choice_ii
from qctrap.objective import bare_value
from qctrap.system import ObjectiveSpec, build_rotor_system

system = build_rotor_system(4, D=0.9)
grid = FieldGrid(8.0, 24)
objective = ObjectiveSpec.state_transition(4, 0, 3)
h = 1e-6


def J_of(field):
    return bare_value(objective, propagate(system, field).final)


# free samples
field = init_field_choice_i(system, grid, F0=2.0, seed=1)
exact = gradient_field_samples(system, field, objective)
fd = np.empty(grid.L)
for l in range(grid.L):
    e = np.zeros(grid.L)
    e[l] = h
    fd[l] = (J_of(field.with_samples(field.samples + e))
             - J_of(field.with_samples(field.samples - e))) / (2 * h)
print("samples: relative error", np.linalg.norm(exact - fd) / np.linalg.norm(fd))

# spectral phases with fixed amplitudes
spec = init_spectral_field(grid, np.arange(1.0, 6.0), F0=2.0, seed=1)
exact = gradient_spectral_phases(system, spec, objective)
fd = np.empty(spec.M)
for m in range(spec.M):
    d = np.zeros(spec.M)
    d[m] = h
    fd[m] = (J_of(synthesize_choice_ii(spec.with_phases(spec.phases + d)))
             - J_of(synthesize_choice_ii(spec.with_phases(spec.phases - d)))) / (2 * h)
print("phases:  relative error", np.linalg.norm(exact - fd) / np.linalg.norm(fd))
