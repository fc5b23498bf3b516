import json
import subprocess
import sys

from qctrap import cli
from qctrap.harness import Experiment, ProblemSpec, SweepSpec, read_aggregate, read_records
from qctrap.optimizer import OptimizerConfig

PROBLEM = {
    "N": 3, "objective": {"kind": "state_transition", "initial": 0, "final": 2},
    "T": 5.0, "L": 20, "F0": 1.0, "seed": 4, "optimizer": {"max_iterations": 200},
}


def tiny_preset(name, scale, base_seed):
    return SweepSpec(name, Experiment.CUSTOM, ProblemSpec(**{k: v for k, v in PROBLEM.items()
                                                              if k not in ("seed", "optimizer")}),
                     "F0", (0.5, 1.0), 2, base_seed, OptimizerConfig(max_iterations=10))


def test_run(tmp_path, capsys):
    p = tmp_path / "problem.json"
    p.write_text(json.dumps(PROBLEM))
    assert cli.main(["run", str(p), "--out", str(tmp_path / "trace.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["seed"] == 4 and out["iterations"] >= 1
    trace = json.loads((tmp_path / "trace.json").read_text())
    assert trace["J_history"][-1] == out["final_J"]
    assert cli.main(["run", str(p), "--integrator", "euler", "--step-size", "0.5",
                     "--max-iterations", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["iterations"] == 3


def test_presets(capsys):
    assert cli.main(["presets"]) == 0
    names = [line.split()[0] for line in capsys.readouterr().out.splitlines()]
    assert names == ["dt", "variable_count", "duration_w1", "duration_w2", "fluence_ii",
                     "fluence_i", "step_size_euler", "step_size_rk4", "tolerance"]


def test_sweep_aggregate_report(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "preset", tiny_preset)
    out = tmp_path / "sweeps" / "tiny"
    assert cli.main(["sweep", "--preset", "tiny", "--scale", "desk", "--out", str(out),
                     "--workers", "1", "--base-seed", "9", "--quiet"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "constraint_value,fraction_success,mean_final_J,mean_opt_fluence,n_runs"
    assert len(lines) == 3
    recs = read_records(out / "records.csv")
    assert len(recs) == 4
    assert json.loads((out / "spec.json").read_text())["base_seed"] == 9

    assert cli.main(["aggregate", str(out / "records.csv"), "--out", str(tmp_path / "agg.csv")]) == 0
    assert [r.n_runs for r in read_aggregate(tmp_path / "agg.csv")] == [2, 2]

    assert cli.main(["report", str(tmp_path / "sweeps")]) == 0
    assert (tmp_path / "sweeps" / "tiny.csv").exists()


def test_errors_are_reported(tmp_path, capsys):
    assert cli.main(["sweep", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert "no preset" in capsys.readouterr().err
    assert cli.main(["report", str(tmp_path)]) == 1


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "qctrap", "presets", "--scale", "paper"],
                       capture_output=True, text=True, check=True)
    assert "runs=1000" in r.stdout
