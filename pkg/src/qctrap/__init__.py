"""Gradient-flow quantum optimal control under control constraints."""
from .dynamics import (
    GradientMode,
    PropagationResult,
    dipole_heisenberg,
    gradient_field_samples,
    gradient_spectral_phases,
    propagate,
)
from .field import (
    FieldGrid,
    PiecewiseField,
    SpectralPhaseField,
    fluence,
    gaussian_envelope,
    init_field_choice_i,
    init_spectral_field,
    phase_sensitivity,
    synthesize_choice_ii,
)
from .harness import (
    AggregateRow,
    Experiment,
    ProblemSpec,
    RunRecord,
    Scale,
    SweepSpec,
    aggregate,
    derive_seed,
    preset,
    preset_experiments,
    run_sweep,
)
from .objective import LandscapeExtrema, converged, evaluate, landscape_extrema
from .optimizer import (
    ControlProblem,
    Integrator,
    OptimizationTrace,
    OptimizerConfig,
    Outcome,
    Termination,
    classify_termination,
    flow_rhs,
    optimize,
)
from .system import (
    ObjectiveKind,
    ObjectiveSpec,
    QuantumSystem,
    build_rotor_system,
    preset_targets,
    random_unitary_target,
    transition_frequency_bounds,
)

__version__ = "0.1.0"
