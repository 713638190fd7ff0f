"""Command-line front end.

Subcommands mirror the experiment harness: solve, compare, rounding-gap,
uniform-sweep, sensor-scaling, validate.  Exit codes: 0 on success, 1 for a
plan or configuration error, 2 when every trial failed (or validation did
not pass).
"""

from __future__ import annotations

import argparse
import sys

from .experiments import (
    DEFAULT_BUDGET_SWEEP,
    DEFAULT_RATIO_SWEEP,
    EXIT_PLAN_ERROR,
    Experiment,
    ExperimentPlan,
    SolverChoice,
    run,
    write_outputs,
)
from .instances import InstanceKind, InstanceSpec, load_spec
from .model import BitAllocationError

_DEFAULT_SPECS = {
    Experiment.SOLVE: InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=13),
    Experiment.COMPARE_SOLVERS: InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=13),
    Experiment.ROUNDING_GAP: InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=13),
    Experiment.UNIFORM_SWEEP: InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=50),
    Experiment.SENSOR_SCALING: InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=10, m=10),
    Experiment.VALIDATE: InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=5, m=8),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; plan errors are 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_PLAN_ERROR, f"{self.prog}: error: {message}\n")


def _add_common(sub):
    sub.add_argument("--config", help="instance spec JSON (kind, d, m, kappa.*, budget_per_sensor, seed, paths.*)")
    sub.add_argument("--trials", type=int, default=None, help="independent trials (default 30; 1 for validate)")
    sub.add_argument("--solver", choices=[s.value for s in SolverChoice], default=None)
    sub.add_argument("--out", help="summary CSV path; aggregates/traces land next to it")
    sub.add_argument("--seed", type=int, default=0, help="plan seed; trial t uses seed+t")
    sub.add_argument("--time-limit", type=float, default=600.0, help="per-solve wall clock limit in seconds")
    sub.add_argument("--threads", type=int, default=1, help="worker threads across trials")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bitalloc", description="Bit-budget allocation across quantized linear sensors")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, experiment in (
        ("solve", Experiment.SOLVE),
        ("compare", Experiment.COMPARE_SOLVERS),
        ("rounding-gap", Experiment.ROUNDING_GAP),
        ("uniform-sweep", Experiment.UNIFORM_SWEEP),
        ("sensor-scaling", Experiment.SENSOR_SCALING),
        ("validate", Experiment.VALIDATE),
    ):
        sub = commands.add_parser(name)
        sub.set_defaults(experiment=experiment)
        _add_common(sub)
        if experiment in (Experiment.UNIFORM_SWEEP, Experiment.SENSOR_SCALING):
            sub.add_argument(
                "--sweep",
                help="comma-separated sweep values (budgets per sensor, or m/d ratios)",
            )
        if experiment is Experiment.VALIDATE:
            sub.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo sample count")
    return parser


def _plan_from_args(args) -> ExperimentPlan:
    experiment: Experiment = args.experiment
    spec = load_spec(args.config) if args.config else _DEFAULT_SPECS[experiment]
    solver = SolverChoice(args.solver) if args.solver else _default_solver(experiment)
    sweep = None
    if getattr(args, "sweep", None):
        sweep = tuple(float(v) for v in args.sweep.split(","))
    elif experiment is Experiment.UNIFORM_SWEEP:
        sweep = DEFAULT_BUDGET_SWEEP
    elif experiment is Experiment.SENSOR_SCALING:
        sweep = DEFAULT_RATIO_SWEEP
    trials = args.trials if args.trials is not None else (1 if experiment is Experiment.VALIDATE else 30)
    return ExperimentPlan(
        experiment=experiment,
        instance_spec=spec,
        trials=trials,
        sweep_values=sweep,
        solver=solver,
        output_path=args.out,
        seed=args.seed,
        time_limit=args.time_limit,
        threads=args.threads,
        mc_samples=getattr(args, "samples", 100_000),
    )


def _default_solver(experiment: Experiment) -> SolverChoice:
    if experiment in (Experiment.ROUNDING_GAP, Experiment.UNIFORM_SWEEP):
        return SolverChoice.BARRIER
    if experiment is Experiment.SENSOR_SCALING:
        return SolverChoice.FW
    return SolverChoice.BOTH


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        plan = _plan_from_args(args)
    except (BitAllocationError, ValueError, OSError) as exc:
        print(f"bitalloc: plan error: {exc}", file=sys.stderr)
        return EXIT_PLAN_ERROR
    result = run(plan)
    write_outputs(plan, result)
    _print_summary(plan, result)
    return result.exit_code


def _print_summary(plan, result) -> None:
    failed = sum(1 for rec in result.records if rec.get("error"))
    print(f"{plan.experiment.value}: {len(result.records)} rows, {failed} failed")
    for agg in result.aggregates:
        parts = ", ".join(f"{k}={v}" for k, v in agg.items())
        print(f"  {parts}")
    if plan.experiment is Experiment.VALIDATE:
        for rec in result.records:
            status = "pass" if rec.get("passed") is True else "FAIL"
            print(f"  {rec['mode']}: {status} (mse_sigmas={rec.get('mse_sigmas')}, "
                  f"max_mean_error_sigmas={rec.get('max_mean_error_sigmas')})")
    if plan.output_path:
        print(f"  wrote {plan.output_path}")


if __name__ == "__main__":
    sys.exit(main())
