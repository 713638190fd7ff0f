#!/usr/bin/env python3
"""Solve-time and objective comparison of both solvers across instance sizes.

Runs the conditional-gradient and interior-point solvers on randomized grid
instances at several sizes and writes one summary CSV per size plus an
aggregate table, mirroring the solve-time study at desk scale.
"""

import argparse
from pathlib import Path

from bitalloc.experiments import Experiment, ExperimentPlan, run, write_outputs
from bitalloc.instances import InstanceKind, InstanceSpec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="13,29,56", help="comma-separated d = m values")
    parser.add_argument("--trials", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for size in (int(s) for s in args.sizes.split(",")):
        plan = ExperimentPlan(
            experiment=Experiment.COMPARE_SOLVERS,
            instance_spec=InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=size),
            trials=args.trials,
            seed=args.seed,
            threads=args.threads,
            output_path=str(out_dir / f"compare_d{size}.csv"),
        )
        result = run(plan)
        write_outputs(plan, result)
        for agg in result.aggregates:
            print(f"d={size}: " + ", ".join(f"{k}={v}" for k, v in agg.items()))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
