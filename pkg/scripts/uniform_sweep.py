#!/usr/bin/env python3
"""Heterogeneous-versus-uniform allocation across per-sensor budget levels.

For each budget level c, solves randomized grid instances, rounds, and
reports the median percentage MSE improvement of the optimized allocation
over the flat floor(B/m) baseline.
"""

import argparse
from pathlib import Path

from bitalloc.experiments import Experiment, ExperimentPlan, run, write_outputs
from bitalloc.instances import InstanceKind, InstanceSpec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", type=int, default=50, help="state dimension (m = d)")
    parser.add_argument("--budgets", default="2,2.5,3,4,5,7", help="comma-separated c = B/m values")
    parser.add_argument("--trials", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    plan = ExperimentPlan(
        experiment=Experiment.UNIFORM_SWEEP,
        instance_spec=InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=args.d),
        trials=args.trials,
        sweep_values=tuple(float(c) for c in args.budgets.split(",")),
        seed=args.seed,
        threads=args.threads,
        output_path=str(out_dir / f"uniform_sweep_d{args.d}.csv"),
    )
    result = run(plan)
    write_outputs(plan, result)
    for agg in result.aggregates:
        print(
            f"c={agg['budget_per_sensor']:g}: median improvement "
            f"{agg['median_improvement_percent']:.2f}% "
            f"(IQR {agg['iqr_low']:.2f}..{agg['iqr_high']:.2f}, n={agg['count']})"
        )
    return result.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
