"""Command-line entry point: ``qctrap`` or ``python -m qctrap``.

Subcommands
-----------
run        one optimization from a JSON problem file
sweep      run a preset sweep, writing records.csv and spec.json
presets    list preset sweeps
aggregate  per-constraint summary of a records.csv
report     one aggregate CSV per figure for every sweep under a directory
"""
import argparse
import csv
import json
import sys
from dataclasses import replace

from .harness import (
    AGGREGATE_COLUMNS, ProblemSpec, Scale, aggregate, preset, preset_experiments,
    read_records, report, run_sweep, write_aggregate,
)
from .optimizer import OptimizerConfig, optimize


def _load_problem(path):
    """Problem file: ProblemSpec fields plus optional ``seed`` and ``optimizer``."""
    with open(path) as fh:
        d = json.load(fh)
    seed = int(d.pop("seed", 0))
    config = OptimizerConfig.from_dict(d.pop("optimizer", {}))
    return ProblemSpec(**d), config, seed


def cmd_run(args):
    problem, config, seed = _load_problem(args.problem)
    if args.seed is not None:
        seed = args.seed
    overrides = {k: getattr(args, k) for k in
                 ("integrator", "tolerance", "step_size", "max_iterations", "max_s", "gradient_mode")
                 if getattr(args, k) is not None}
    if overrides:
        config = OptimizerConfig.from_dict({**config.to_dict(), **overrides})
    cp, x0 = problem.build(seed, config.gradient_mode)
    trace = optimize(cp, config, x0)
    if args.out:
        trace.write_json(args.out)
    print(json.dumps({
        "converged": trace.converged,
        "final_J": trace.final_J,
        "iterations": trace.iterations_used,
        "final_fluence": trace.final_fluence,
        "termination_reason": trace.termination_reason.value,
        "seed": seed,
    }))
    return 0


def cmd_sweep(args):
    spec = preset(args.preset, Scale(args.scale), args.base_seed)
    if args.workers is not None:
        spec = replace(spec, workers=args.workers)

    def progress(rec):
        if not args.quiet:
            print(f"{rec.constraint_value!r} run {rec.run_index}: "
                  f"{'ok' if rec.converged else 'fail'} J={rec.final_J:.6g} "
                  f"({rec.termination_reason}, {rec.wall_time_seconds:.1f}s)",
                  file=sys.stderr, flush=True)

    records = run_sweep(spec, args.out, progress=progress)
    _print_aggregate(aggregate(records))
    return 0


def cmd_presets(args):
    for spec in preset_experiments(Scale(args.scale)):
        grid = ", ".join(f"{v:g}" for v in spec.constraint_grid)
        print(f"{spec.name:16s} {spec.experiment.value:24s} {spec.parameter:10s} "
              f"runs={spec.runs_per_point:<5d} grid=[{grid}]")
    return 0


def _print_aggregate(rows):
    w = csv.writer(sys.stdout)
    w.writerow(AGGREGATE_COLUMNS)
    for r in rows:
        w.writerow(r.row())


def cmd_aggregate(args):
    rows = aggregate(read_records(args.records))
    if args.out:
        write_aggregate(rows, args.out)
    else:
        _print_aggregate(rows)
    return 0


def cmd_report(args):
    paths = report(args.directory)
    if not paths:
        print(f"no records.csv found under {args.directory}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="qctrap", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="single optimization from a JSON problem file")
    r.add_argument("problem")
    r.add_argument("--seed", type=int)
    r.add_argument("--integrator", choices=["euler", "rk4", "rk45"])
    r.add_argument("--tolerance", type=float)
    r.add_argument("--step-size", type=float)
    r.add_argument("--max-iterations", type=int)
    r.add_argument("--max-s", type=float)
    r.add_argument("--gradient-mode", choices=["exact", "approximate"])
    r.add_argument("--out", help="write the full trace as JSON")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run a preset sweep")
    s.add_argument("--preset", required=True)
    s.add_argument("--scale", choices=["desk", "paper"], default="desk")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--workers", type=int)
    s.add_argument("--base-seed", type=int, default=0)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    ps = sub.add_parser("presets", help="list preset sweeps")
    ps.add_argument("--scale", choices=["desk", "paper"], default="desk")
    ps.set_defaults(func=cmd_presets)

    a = sub.add_parser("aggregate", help="summarize a records.csv")
    a.add_argument("records")
    a.add_argument("--out")
    a.set_defaults(func=cmd_aggregate)

    rp = sub.add_parser("report", help="per-figure CSVs from sweep directories")
    rp.add_argument("directory")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
