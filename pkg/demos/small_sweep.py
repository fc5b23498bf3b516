"""A small seeded sweep over the initial fluence of a spectral field.

Each grid point gets a handful of independent runs whose seeds derive
from the base seed, the grid index and the run index, so any point can be
rerun alone. Records and the sweep spec are written to ``sweep_out/``.

Run with ``python demos/small_sweep.py``.
"""
from qctrap.harness import Experiment, ProblemSpec, SweepSpec, aggregate, run_sweep
from qctrap.optimizer import OptimizerConfig

problem = ProblemSpec(
    N=4, objective={"kind": "state_transition", "initial": 0, "final": 3},
    T=20.0, L=200, D=0.9, parameterization="phases", M=10, frequencies="integer",
)
spec = SweepSpec(
    "demo_fluence", Experiment.CUSTOM, problem, "F0", (0.5, 5.0, 50.0),
    runs_per_point=4, base_seed=1, optimizer=OptimizerConfig(max_iterations=300),
)

records = run_sweep(spec, out_dir="sweep_out",
                    progress=lambda r: print(f"F0={r.constraint_value:g} run {r.run_index}: "
                                             f"J={r.final_J:.3f} {r.termination_reason}"))
print()
print("F0     success  mean J")
for row in aggregate(records):
    print(f"{row.constraint_value:<6g} {row.fraction_success:7.2f}  {row.mean_final_J:.3f}")
