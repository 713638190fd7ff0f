#!/usr/bin/env python3
"""Per-iteration solver cost as the sensor count grows past the state size.

Sweeps the sensor-to-state ratio m/d on dense Gaussian instances with the
total budget pinned to 2d, timing the conditional-gradient solver, and fits
a log-log slope of per-iteration time versus m.
"""

import argparse
from pathlib import Path

import numpy as np

from bitalloc.experiments import Experiment, ExperimentPlan, run, write_outputs
from bitalloc.instances import InstanceKind, InstanceSpec


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--d", default="10,20", help="comma-separated state dimensions")
    parser.add_argument("--ratios", default="5,20,50,200,500", help="comma-separated m/d values")
    parser.add_argument("--trials", type=int, default=30)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out-dir", default="results")
    args = parser.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for d in (int(s) for s in args.d.split(",")):
        plan = ExperimentPlan(
            experiment=Experiment.SENSOR_SCALING,
            instance_spec=InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=d, m=d),
            trials=args.trials,
            sweep_values=tuple(float(r) for r in args.ratios.split(",")),
            seed=args.seed,
            threads=args.threads,
            output_path=str(out_dir / f"sensor_scaling_d{d}.csv"),
        )
        result = run(plan)
        write_outputs(plan, result)
        sizes = np.array([agg["m"] for agg in result.aggregates], dtype=float)
        times = np.array([agg["median_per_iteration_seconds"] for agg in result.aggregates])
        slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
        for agg in result.aggregates:
            print(
                f"d={d} m={agg['m']}: median per-iteration "
                f"{agg['median_per_iteration_seconds'] * 1e3:.3f} ms"
            )
        print(f"d={d}: log-log slope of per-iteration time vs m: {slope:.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
