"""Seeded constraint sweeps: problem presets, batch execution, aggregation.

A sweep varies one parameter of a base problem over a grid and runs a
fixed number of independently seeded searches at each grid point. Run
seeds come from ``numpy.random.SeedSequence(base_seed,
spawn_key=(grid_index, run_index))``, so a record does not depend on
which worker ran it or in what order.
"""
import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .dynamics import GradientMode
from .field import FieldGrid, init_field_choice_i, init_spectral_field
from .optimizer import ControlProblem, Integrator, OptimizerConfig, optimize
from .system import ObjectiveSpec, build_rotor_system, preset_targets, random_unitary_target

RECORD_COLUMNS = [
    "experiment", "constraint_value", "run_index", "seed", "converged", "final_J",
    "iterations", "final_fluence", "termination_reason", "wall_time_seconds",
]
AGGREGATE_COLUMNS = ["constraint_value", "fraction_success", "mean_final_J",
                     "mean_opt_fluence", "n_runs"]


class Experiment(str, Enum):
    DT = "dt_sweep"
    VARIABLE_COUNT = "variable_count_sweep"
    DURATION = "duration_sweep"
    FLUENCE_II = "fluence_sweep_choice_ii"
    FLUENCE_I = "fluence_sweep_choice_i"
    STEP_SIZE = "step_size_sweep"
    TOLERANCE = "tolerance_sweep"
    CUSTOM = "custom"


class Scale(str, Enum):
    PAPER = "paper"
    DESK = "desk"


@dataclass(frozen=True)
class ProblemSpec:
    """Serializable description of one control problem.

    ``objective`` is a plain dict, e.g. ``{"kind": "state_transition",
    "initial": 0, "final": 3}``, ``{"kind": "observable", "rho0": [...],
    "theta": [...]}`` or ``{"kind": "evolution_operator", "target":
    "W1"}``; a target may also be ``{"random_seed": s}`` or a nested list
    of ``[re, im]`` pairs. ``frequencies`` is ``"random"`` (uniform over
    the transition band) or ``"integer"`` (``omega_m = m``).
    """

    N: int
    objective: dict
    T: float
    L: int
    lam: float = 1.0
    D: float = 0.5
    diagonal_dipole: float = 0.0
    parameterization: str = "samples"
    M: int = 20
    F0: float = 1.0
    zeta: float = None
    frequencies: str = "random"

    def __post_init__(self):
        if self.parameterization not in ("samples", "phases"):
            raise ValueError(f"unknown parameterization {self.parameterization!r}")
        if self.frequencies not in ("random", "integer"):
            raise ValueError(f"unknown frequency rule {self.frequencies!r}")

    def system(self):
        return build_rotor_system(self.N, self.lam, self.D, self.diagonal_dipole)

    def build_objective(self):
        o = dict(self.objective)
        kind = o.pop("kind")
        w = o.pop("penalty_weight", 0.0)
        if kind == "state_transition":
            return ObjectiveSpec.state_transition(self.N, o["initial"], o["final"],
                                                  penalty_weight=w)
        if kind == "observable":
            return ObjectiveSpec.observable(self.N, o["rho0"], o["theta"], penalty_weight=w)
        if kind == "evolution_operator":
            return ObjectiveSpec.evolution_operator(_target(o["target"], self.N),
                                                    penalty_weight=w)
        raise ValueError(f"unknown objective kind {kind!r}")

    @property
    def grid(self):
        return FieldGrid(self.T, self.L)

    def build(self, seed, mode=GradientMode.EXACT):
        """``(ControlProblem, initial_state)`` for one seeded run."""
        system = self.system()
        objective = self.build_objective()
        grid = self.grid
        if self.parameterization == "samples":
            fld = init_field_choice_i(system, grid, self.M, self.zeta, self.F0, seed)
            return ControlProblem(system, objective, grid, mode=mode), np.array(fld.samples)
        if self.frequencies == "integer":
            omega = np.arange(1, self.M + 1, dtype=float)
        else:
            from .field import rngs
            from .system import transition_frequency_bounds
            lo, hi = transition_frequency_bounds(system)
            omega = rngs(seed)[0].uniform(lo, hi, size=self.M)
        spec = init_spectral_field(grid, omega, self.F0, seed=seed, zeta=self.zeta)
        problem = ControlProblem(system, objective, grid, spectral=spec, mode=mode)
        return problem, np.array(spec.phases)


def _target(t, N):
    if isinstance(t, str):
        w1, w2 = preset_targets()
        return {"W1": w1, "W2": w2}[t]
    if isinstance(t, dict):
        return random_unitary_target(N, int(t["random_seed"]))
    return np.array([[complex(re, im) for re, im in row] for row in t])


# Swept parameters and the object they modify.
PARAMETERS = {
    "dt": "problem",
    "L": "problem",
    "M": "problem",
    "T": "problem",
    "F0": "problem",
    "step_size": "optimizer",
    "tolerance": "optimizer",
}


@dataclass(frozen=True)
class SweepSpec:
    name: str
    experiment: Experiment
    problem: ProblemSpec
    parameter: str
    constraint_grid: tuple
    runs_per_point: int
    base_seed: int = 0
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    workers: int = 1
    # flow rate relative to the per-variable gradient: "unit" or "per_time"
    gamma_scale: str = "unit"

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        object.__setattr__(self, "constraint_grid", tuple(self.constraint_grid))
        validate(self)

    def point(self, value):
        """Problem and optimizer settings at one constraint value."""
        problem, config = self.problem, self.optimizer
        if self.parameter == "dt":
            problem = replace(problem, L=int(round(problem.T / value)))
        elif PARAMETERS[self.parameter] == "problem":
            cast = int if self.parameter in ("L", "M") else float
            problem = replace(problem, **{self.parameter: cast(value)})
        else:
            config = replace(config, **{self.parameter: float(value)})
        if self.gamma_scale == "per_time":
            sign = 1.0 if problem.build_objective().maximize else -1.0
            config = replace(config, gamma=sign * problem.L / problem.T)
        return problem, config

    def to_dict(self):
        return {
            "name": self.name,
            "experiment": self.experiment.value,
            "problem": asdict(self.problem),
            "parameter": self.parameter,
            "constraint_grid": list(self.constraint_grid),
            "runs_per_point": self.runs_per_point,
            "base_seed": self.base_seed,
            "optimizer": self.optimizer.to_dict(),
            "workers": self.workers,
            "gamma_scale": self.gamma_scale,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["problem"] = ProblemSpec(**d["problem"])
        d["optimizer"] = OptimizerConfig.from_dict(d["optimizer"])
        return cls(**d)


def validate(spec):
    if spec.parameter not in PARAMETERS:
        raise ValueError(f"cannot sweep {spec.parameter!r}; choose from {sorted(PARAMETERS)}")
    g = np.asarray(spec.constraint_grid, dtype=float)
    if g.size == 0:
        raise ValueError("constraint_grid is empty")
    d = np.diff(g)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise ValueError("constraint_grid must be strictly monotone")
    if spec.runs_per_point < 1:
        raise ValueError("runs_per_point must be >= 1")
    if spec.gamma_scale not in ("unit", "per_time"):
        raise ValueError(f"unknown gamma_scale {spec.gamma_scale!r}")
    if spec.parameter == "dt":
        for v in g:
            L = round(spec.problem.T / v)
            if L < 1 or not math.isclose(spec.problem.T / L, v, rel_tol=1e-9):
                raise ValueError(f"dt = {v} does not divide T = {spec.problem.T} evenly")


def derive_seed(base_seed, grid_index, run_index):
    """64-bit run seed from the sweep's base seed and the run's position."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(grid_index), int(run_index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class RunRecord:
    experiment: str
    constraint_value: float
    run_index: int
    seed: int
    converged: bool
    final_J: float
    iterations: int
    final_fluence: float
    termination_reason: str
    wall_time_seconds: float

    def row(self):
        return [self.experiment, repr(float(self.constraint_value)), self.run_index, self.seed,
                int(self.converged), repr(float(self.final_J)), self.iterations,
                repr(float(self.final_fluence)), self.termination_reason,
                repr(float(self.wall_time_seconds))]

    @classmethod
    def from_row(cls, r):
        return cls(
            experiment=r["experiment"],
            constraint_value=float(r["constraint_value"]),
            run_index=int(r["run_index"]),
            seed=int(r["seed"]),
            converged=bool(int(r["converged"])),
            final_J=float(r["final_J"]),
            iterations=int(r["iterations"]),
            final_fluence=float(r["final_fluence"]),
            termination_reason=r["termination_reason"],
            wall_time_seconds=float(r["wall_time_seconds"]),
        )

    def same_outcome(self, other):
        """Equality ignoring wall time."""
        a, b = asdict(self), asdict(other)
        a.pop("wall_time_seconds")
        b.pop("wall_time_seconds")
        return a == b


def run_single(spec, grid_index, run_index):
    value = spec.constraint_grid[grid_index]
    seed = derive_seed(spec.base_seed, grid_index, run_index)
    t0 = time.perf_counter()
    try:
        problem_spec, config = spec.point(value)
        problem, x0 = problem_spec.build(seed, config.gradient_mode)
        trace = optimize(problem, config, x0)
        outcome = dict(converged=trace.converged, final_J=trace.final_J,
                       iterations=trace.iterations_used, final_fluence=trace.final_fluence,
                       termination_reason=trace.termination_reason.value)
    except Exception as exc:  # recorded, the sweep carries on
        outcome = dict(converged=False, final_J=math.nan, iterations=0,
                       final_fluence=math.nan, termination_reason=f"error: {exc}")
    return RunRecord(spec.name, float(value), run_index, seed,
                     wall_time_seconds=time.perf_counter() - t0, **outcome)


def _run_task(args):
    return run_single(*args)


def run_sweep(spec, out_dir=None, workers=None, progress=None, points=None):
    """Execute every (grid point, run) pair of ``spec``.

    With ``out_dir`` the spec is written to ``spec.json`` first and each
    record is appended to ``records.csv`` as soon as it finishes.
    ``points`` restricts the sweep to those grid indices; seeds are still
    derived from the full-grid index, so the records match a full sweep.
    Records are returned sorted by grid index and run index.
    """
    validate(spec)
    workers = spec.workers if workers is None else workers
    if points is None:
        points = range(len(spec.constraint_grid))
    for g in points:
        if not 0 <= g < len(spec.constraint_grid):
            raise IndexError(f"grid index {g} out of range")
    tasks = [(spec, g, r) for g in sorted(set(points)) for r in range(spec.runs_per_point)]
    writer = fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "spec.json"), "w") as sf:
            json.dump(spec.to_dict(), sf, indent=2)
        fh = open(os.path.join(out_dir, "records.csv"), "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        fh.flush()
    results = {}

    def collect(key, rec):
        results[key] = rec
        if writer is not None:
            writer.writerow(rec.row())
            fh.flush()
        if progress is not None:
            progress(rec)

    try:
        if workers <= 1:
            for t in tasks:
                collect(t[1:], _run_task(t))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(_run_task, t): t[1:] for t in tasks}
                for fut in as_completed(futures):
                    collect(futures[fut], fut.result())
    finally:
        if fh is not None:
            fh.close()
    return [results[k] for k in sorted(results)]


@dataclass(frozen=True)
class AggregateRow:
    constraint_value: float
    fraction_success: float
    mean_final_J: float
    mean_opt_fluence: float
    n_runs: int

    def row(self):
        f = "" if self.mean_opt_fluence is None else repr(float(self.mean_opt_fluence))
        return [repr(float(self.constraint_value)), repr(float(self.fraction_success)),
                repr(float(self.mean_final_J)), f, self.n_runs]


def aggregate(records):
    """Per-constraint-value success fraction and means.

    ``mean_opt_fluence`` averages converged runs only and is ``None``
    when none converged.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to aggregate")
    groups = {}
    for r in records:
        groups.setdefault(float(r.constraint_value), []).append(r)
    rows = []
    for value in sorted(groups):
        rs = sorted(groups[value], key=lambda r: r.run_index)
        ok = [r for r in rs if r.converged]
        rows.append(AggregateRow(
            constraint_value=value,
            fraction_success=len(ok) / len(rs),
            mean_final_J=math.fsum(r.final_J for r in rs) / len(rs),
            mean_opt_fluence=(math.fsum(r.final_fluence for r in ok) / len(ok)) if ok else None,
            n_runs=len(rs),
        ))
    return rows


def write_records(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow(r.row())


def read_records(path):
    with open(path, newline="") as fh:
        return [RunRecord.from_row(r) for r in csv.DictReader(fh)]


def write_aggregate(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for r in rows:
            w.writerow(r.row())


def read_aggregate(path):
    out = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            f = r["mean_opt_fluence"]
            out.append(AggregateRow(float(r["constraint_value"]), float(r["fraction_success"]),
                                    float(r["mean_final_J"]), float(f) if f else None,
                                    int(r["n_runs"])))
    return out


_ROTOR_THETA = {"kind": "observable", "rho0": [0.6, 0.4, 0, 0, 0, 0],
                "theta": [0, 0, 0, 0.1, 0.2, 0.7]}

# Figure each preset feeds, used by ``report``.
FIGURES = {
    "dt": "fig1_dt",
    "variable_count": "fig2_variable_count",
    "duration_w1": "fig3_duration_w1",
    "duration_w2": "fig3_duration_w2",
    "fluence_ii": "fig4_fluence_choice_ii",
    "fluence_i": "fig5_fluence_choice_i",
    "step_size_euler": "fig6_step_size_euler",
    "step_size_rk4": "fig6_step_size_rk4",
    "tolerance": "fig7_tolerance",
}


def _dt_grid(Ls):
    return tuple(50.0 / L for L in sorted(Ls, reverse=True))


def preset_experiments(scale=Scale.DESK, base_seed=0):
    """The seven constraint studies as :class:`SweepSpec` objects.

    ``Scale.PAPER`` uses the full grids and run counts; ``Scale.DESK``
    keeps a handful of grid points on either side of each reported
    threshold with 20 runs per point (10 for the free-field fluence
    study).
    """
    scale = Scale(scale)
    paper = scale == Scale.PAPER

    def runs(n_paper):
        return n_paper if paper else 20

    rk45 = OptimizerConfig(Integrator.RK45, tolerance=1e-8)

    dt_L = (511, 450, 400, 350, 300, 270, 250, 235, 220, 200, 185, 170, 160, 151,
            140, 125, 110, 100, 90, 80, 79) if paper else (511, 235, 151, 80)
    dt = SweepSpec(
        "dt", Experiment.DT,
        ProblemSpec(6, _ROTOR_THETA, T=50.0, L=511, D=0.5, F0=10.0),
        "dt", _dt_grid(dt_L), runs(1000), base_seed,
        replace(rk45, gradient_mode=GradientMode.APPROXIMATE, max_iterations=3000, max_s=1000.0),
    )

    pt4 = dict(N=4, objective={"kind": "state_transition", "initial": 0, "final": 3},
               T=50.0, L=1023, D=0.9)
    var_grid = tuple(range(3, 17)) if paper else (3, 5, 12, 16)
    variable_count = SweepSpec(
        "variable_count", Experiment.VARIABLE_COUNT,
        ProblemSpec(**pt4, parameterization="phases", M=16, F0=1e3, frequencies="integer"),
        "M", var_grid, runs(1000), base_seed, replace(rk45, max_iterations=1500, max_s=50.0),
    )

    w_problem = dict(N=5, T=4.0, L=128, D=0.9, diagonal_dipole=1.0, F0=40.0)
    t_grid = (tuple(np.round(np.arange(1.0, 4.0001, 0.05), 2)) if paper
              else (1.0, 2.3, 2.45, 2.8, 3.1, 4.0))
    durations = [
        SweepSpec(
            f"duration_{w.lower()}", Experiment.DURATION,
            ProblemSpec(objective={"kind": "evolution_operator", "target": w}, **w_problem),
            "T", t_grid, runs(100), base_seed, replace(rk45, max_iterations=30000, max_s=2e6),
        )
        for w in ("W1", "W2")
    ]

    f2_grid = (tuple(np.round(np.concatenate([np.arange(0.5, 5, 0.5), np.arange(5, 51, 5)]), 2))
               if paper else (0.5, 2.0, 10.0, 30.0, 50.0))
    fluence_ii = SweepSpec(
        "fluence_ii", Experiment.FLUENCE_II,
        ProblemSpec(**pt4, parameterization="phases", M=16, F0=10.0, frequencies="integer"),
        "F0", f2_grid, runs(1000), base_seed, replace(rk45, max_iterations=1500, max_s=2000.0),
    )

    f1_grid = tuple(10.0 ** np.arange(-6, 4)) if paper else (1e-4, 1e-2, 1.0, 1e2)
    fluence_i = SweepSpec(
        "fluence_i", Experiment.FLUENCE_I,
        ProblemSpec(**pt4, M=20, F0=1.0),
        "F0", f1_grid, runs(100) if paper else 10, base_seed,
        replace(rk45, max_iterations=3000, max_s=1e5),
    )

    pe = ProblemSpec(6, {"kind": "state_transition", "initial": 0, "final": 5},
                     T=50.0, L=511, D=0.5, F0=10.0)
    ds_grid = ((0.01, 0.02, 0.03, 0.05, 0.07, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5) if paper
               else (0.01, 0.1, 0.3, 0.5))
    step_sizes = [
        SweepSpec(
            f"step_size_{integ.value}", Experiment.STEP_SIZE, pe, "step_size", ds_grid,
            runs(1000), base_seed,
            OptimizerConfig(integ, step_size=0.01, max_iterations=1000),
            gamma_scale="per_time",
        )
        for integ in (Integrator.EULER, Integrator.RK4)
    ]

    tau_grid = (tuple(np.round(10.0 ** np.linspace(-3, -1, 11), 6)) if paper
                else (1e-3, 2e-3, 2e-2, 1e-1))
    tolerance = SweepSpec(
        "tolerance", Experiment.TOLERANCE, pe, "tolerance", tau_grid, runs(1000), base_seed,
        replace(rk45, max_iterations=1000, max_s=1000.0),
    )
    return [dt, variable_count, *durations, fluence_ii, fluence_i, *step_sizes, tolerance]


def preset(name, scale=Scale.DESK, base_seed=0):
    for spec in preset_experiments(scale, base_seed):
        if spec.name == name:
            return spec
    names = [s.name for s in preset_experiments(scale)]
    raise KeyError(f"no preset named {name!r}; available: {', '.join(names)}")


def report(directory):
    """Write one aggregate CSV per figure from sweep subdirectories.

    Every subdirectory holding ``records.csv`` is aggregated; the output
    is named after the figure its experiment feeds. Returns the paths.
    """
    written = []
    for entry in sorted(os.listdir(directory)):
        path = os.path.join(directory, entry, "records.csv")
        if not os.path.isfile(path):
            continue
        records = read_records(path)
        if not records:
            continue
        name = FIGURES.get(records[0].experiment, records[0].experiment)
        out = os.path.join(directory, f"{name}.csv")
        write_aggregate(aggregate(records), out)
        written.append(out)
    return written

