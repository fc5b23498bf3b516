import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qctrap.harness import (
    AGGREGATE_COLUMNS,
    RECORD_COLUMNS,
    Experiment,
    ProblemSpec,
    RunRecord,
    Scale,
    SweepSpec,
    aggregate,
    derive_seed,
    preset,
    preset_experiments,
    read_aggregate,
    read_records,
    report,
    run_sweep,
    write_aggregate,
    write_records,
)
from qctrap.optimizer import OptimizerConfig

SMALL = ProblemSpec(3, {"kind": "state_transition", "initial": 0, "final": 2}, T=5.0, L=20, F0=1.0)


def small_sweep(**kw):
    d = dict(name="small", experiment=Experiment.CUSTOM, problem=SMALL, parameter="F0",
             constraint_grid=(0.5, 1.0, 2.0), runs_per_point=5, base_seed=11,
             optimizer=OptimizerConfig(max_iterations=20))
    d.update(kw)
    return SweepSpec(**d)


def rec(value, i, ok, J, fl=1.0):
    return RunRecord("x", value, i, i, ok, J, 10, fl, "converged" if ok else "max_iterations", 0.1)


def test_cardinality_and_order():
    recs = run_sweep(small_sweep())
    assert len(recs) == 15
    assert [(r.constraint_value, r.run_index) for r in recs] == [
        (v, i) for v in (0.5, 1.0, 2.0) for i in range(5)]


def test_deterministic_across_runs_and_workers():
    a = run_sweep(small_sweep(runs_per_point=3))
    b = run_sweep(small_sweep(runs_per_point=3))
    c = run_sweep(small_sweep(runs_per_point=3), workers=8)
    assert all(x.same_outcome(y) for x, y in zip(a, b))
    assert all(x.same_outcome(y) for x, y in zip(a, c))
    assert aggregate(a) == aggregate(c)


def test_seed_derivation_collision_free():
    seeds = {derive_seed(7, g, r) for g in range(40) for r in range(250)}
    assert len(seeds) == 40 * 250
    assert derive_seed(7, 1, 2) == derive_seed(7, 1, 2) != derive_seed(8, 1, 2)


def test_aggregate_examples():
    rows = aggregate([rec(1.0, 0, True, 0.2, 3.0), rec(1.0, 1, True, 0.4, 5.0)])
    assert rows[0].fraction_success == 1.0
    assert rows[0].mean_final_J == pytest.approx(0.3)
    assert rows[0].mean_opt_fluence == pytest.approx(4.0)
    rows = aggregate([rec(2.0, 0, False, 0.1), rec(2.0, 1, False, 0.3)])
    assert rows[0].fraction_success == 0.0 and rows[0].mean_opt_fluence is None
    with pytest.raises(ValueError):
        aggregate([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.sampled_from([0.1, 0.2, 0.3]), st.booleans(),
                          st.floats(0, 1), st.floats(0, 100)), min_size=1, max_size=40),
       st.randoms(use_true_random=False))
def test_aggregate_order_independent(items, rnd):
    recs = [rec(v, i, ok, J, fl) for i, (v, ok, J, fl) in enumerate(items)]
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert aggregate(shuffled) == aggregate(recs)


def test_validation_before_any_run():
    with pytest.raises(ValueError):
        small_sweep(constraint_grid=())
    with pytest.raises(ValueError):
        small_sweep(constraint_grid=(1.0, 0.5, 2.0))
    with pytest.raises(ValueError):
        small_sweep(runs_per_point=0)
    with pytest.raises(ValueError):
        small_sweep(parameter="lam")
    with pytest.raises(ValueError):
        small_sweep(parameter="dt", constraint_grid=(0.3,))


def test_run_errors_are_recorded():
    bad = ProblemSpec(3, {"kind": "state_transition", "initial": 0, "final": 7}, T=5.0, L=20)
    recs = run_sweep(small_sweep(problem=bad, runs_per_point=2))
    assert len(recs) == 6
    assert all(r.termination_reason.startswith("error") and not r.converged for r in recs)
    assert all(math.isnan(r.final_J) for r in recs)


def test_persistence(tmp_path):
    spec = small_sweep(runs_per_point=2)
    recs = run_sweep(spec, out_dir=tmp_path / "s")
    with open(tmp_path / "s" / "records.csv") as fh:
        header = next(csv.reader(fh))
    assert header == RECORD_COLUMNS
    back = read_records(tmp_path / "s" / "records.csv")
    assert sorted(back, key=lambda r: (r.constraint_value, r.run_index)) == recs
    loaded = SweepSpec.from_dict(json.loads((tmp_path / "s" / "spec.json").read_text()))
    assert loaded == spec
    write_records(recs, tmp_path / "r.csv")
    assert read_records(tmp_path / "r.csv") == recs
    rows = aggregate(recs)
    write_aggregate(rows, tmp_path / "a.csv")
    assert read_aggregate(tmp_path / "a.csv") == rows
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(AGGREGATE_COLUMNS)


def test_full_precision_csv(tmp_path):
    r = rec(1.0 / 3.0, 0, True, 0.1 + 0.2, 2.0 ** 0.5)
    write_records([r], tmp_path / "r.csv")
    assert read_records(tmp_path / "r.csv")[0] == r


def test_report(tmp_path):
    recs = [RunRecord("dt", 0.1, i, i, i % 2 == 0, 0.5, 3, 1.0, "converged", 0.0) for i in range(4)]
    (tmp_path / "dt").mkdir()
    write_records(recs, tmp_path / "dt" / "records.csv")
    paths = report(tmp_path)
    assert [p.endswith("fig1_dt.csv") for p in paths] == [True]
    assert read_aggregate(paths[0])[0].fraction_success == 0.5


def test_presets_paper_scale():
    specs = {s.name: s for s in preset_experiments(Scale.PAPER)}
    dt = specs["dt"]
    assert dt.problem.T == 50
    assert dt.constraint_grid[0] == pytest.approx(50 / 511)
    assert dt.constraint_grid[-1] == pytest.approx(50 / 79)
    assert {specs["duration_w1"].problem.objective["target"],
            specs["duration_w2"].problem.objective["target"]} == {"W1", "W2"}
    tau = specs["tolerance"].constraint_grid
    assert min(tau) >= 1e-3 and max(tau) <= 1e-1
    assert specs["variable_count"].constraint_grid == tuple(range(3, 17))
    assert specs["fluence_ii"].constraint_grid[0] == 0.5 and specs["fluence_ii"].constraint_grid[-1] == 50
    f1 = np.log10(specs["fluence_i"].constraint_grid)
    assert np.allclose(np.diff(f1), 1.0) and f1[0] == -6 and f1[-1] == 3
    assert specs["variable_count"].runs_per_point == 1000


def test_presets_desk_scale():
    paper = {s.name: s for s in preset_experiments(Scale.PAPER)}
    for s in preset_experiments(Scale.DESK):
        assert 10 <= s.runs_per_point <= 50
        lo, hi = min(paper[s.name].constraint_grid), max(paper[s.name].constraint_grid)
        assert all(lo - 1e-12 <= v <= hi + 1e-12 for v in s.constraint_grid)
    with pytest.raises(KeyError):
        preset("nope")


def test_point_applies_parameter():
    spec = preset("dt")
    prob, _ = spec.point(50 / 80)
    assert prob.L == 80
    prob, cfg = preset("step_size_rk4").point(0.3)
    assert cfg.step_size == 0.3 and cfg.gamma == pytest.approx(511 / 50)
    _, cfg = preset("tolerance").point(0.02)
    assert cfg.tolerance == 0.02
    prob, _ = preset("variable_count").point(5)
    assert prob.M == 5 and isinstance(prob.M, int)


def test_problem_spec_builds_every_kind():
    for obj in [{"kind": "observable", "rho0": [0.6, 0.4, 0], "theta": [0, 0, 1]},
                {"kind": "evolution_operator", "target": {"random_seed": 3}},
                {"kind": "evolution_operator", "target": [[[0, 0], [1, 0]], [[1, 0], [0, 0]]]}]:
        n = 2 if isinstance(obj.get("target"), list) else 3
        p = ProblemSpec(n, obj, T=2.0, L=10, diagonal_dipole=1.0)
        cp, x0 = p.build(seed=1)
        assert x0.shape == (10,)
    with pytest.raises(ValueError):
        ProblemSpec(3, {"kind": "nope"}, T=1.0, L=5).build_objective()
    with pytest.raises(ValueError):
        ProblemSpec(3, {}, T=1.0, L=5, parameterization="other")
    cp, x0 = ProblemSpec(4, {"kind": "state_transition", "initial": 0, "final": 3}, T=5.0, L=30,
                         parameterization="phases", M=4, frequencies="random").build(seed=2)
    assert cp.uses_phases and x0.shape == (4,)


def test_point_subset_matches_full_sweep():
    spec = small_sweep(runs_per_point=2)
    full = run_sweep(spec)
    part = run_sweep(spec, points=[2])
    assert all(a.same_outcome(b) for a, b in zip(full[4:], part))
    with pytest.raises(IndexError):
        run_sweep(spec, points=[3])
