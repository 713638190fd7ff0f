"""Experiment harness: randomized trials, sweeps, and machine-readable outputs.

Every experiment expands into an ordered list of independent tasks (one per
trial, or per sweep-value x trial).  Trial t draws its instance from
seed = plan_seed + t, recorded in the output, so any single row can be rerun
in isolation.  Tasks may execute on a thread pool; row order follows task
order regardless of completion order, and all randomness is seeded, so a
plan's non-timing output is reproducible byte for byte.  Timing columns are
the ones ending in ``_seconds``.

Individual trial failures are recorded in the row's ``error`` column and do
not abort the plan; a plan whose trials all fail exits with code 2.
"""

from __future__ import annotations

import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .barrier import BarrierConfig, solve_barrier
from .frank_wolfe import FwConfig, StepRule, separable_warm_start, solve_fw
from .instances import InstanceKind, InstanceSpec, generate, save_results, trial_spec, uniform_allocation
from .model import BitAllocationError, ProblemInstance, evaluate
from .quantizer import DitherMode, QuantizerBank, simulate_lmmse
from .rounding import RoundingPreconditionError, round_with_guarantees
from .trace import SolveTrace, write_trace

EXIT_OK = 0
EXIT_PLAN_ERROR = 1
EXIT_ALL_FAILED = 2

DEFAULT_BUDGET_SWEEP = (2.0, 3.0, 4.0, 5.0, 7.0)
DEFAULT_RATIO_SWEEP = (5.0, 50.0, 500.0)
_SCALING_ITERATIONS = 30


class Experiment(Enum):
    SOLVE = "solve"
    COMPARE_SOLVERS = "compare"
    ROUNDING_GAP = "rounding-gap"
    UNIFORM_SWEEP = "uniform-sweep"
    SENSOR_SCALING = "sensor-scaling"
    VALIDATE = "validate"


class SolverChoice(Enum):
    FW = "fw"
    BARRIER = "barrier"
    BOTH = "both"


@dataclass(frozen=True)
class ExperimentPlan:
    experiment: Experiment
    instance_spec: InstanceSpec
    trials: int = 30
    sweep_values: tuple[float, ...] | None = None
    solver: SolverChoice = SolverChoice.BOTH
    output_path: str | None = None
    seed: int = 0
    time_limit: float = 600.0
    threads: int = 1
    mc_samples: int = 100_000
    fw_config: FwConfig | None = None
    barrier_config: BarrierConfig | None = None
    fw_warm_start: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        needs_sweep = self.experiment in (Experiment.UNIFORM_SWEEP, Experiment.SENSOR_SCALING)
        if needs_sweep and self.sweep_values is not None and not self.sweep_values:
            raise ValueError(f"{self.experiment.value} needs a nonempty sweep")


@dataclass
class RunResult:
    records: list[dict]
    aggregates: list[dict]
    traces: list[tuple[int, str, SolveTrace]] = field(default_factory=list)
    exit_code: int = EXIT_OK


def _fw_config(plan: ExperimentPlan) -> FwConfig:
    if plan.fw_config is not None:
        return plan.fw_config
    return FwConfig(max_iterations=2000, step_rule=StepRule.ADAPTIVE_LIPSCHITZ, time_limit=plan.time_limit)


def _barrier_config(plan: ExperimentPlan) -> BarrierConfig:
    if plan.barrier_config is not None:
        return plan.barrier_config
    if plan.experiment is Experiment.UNIFORM_SWEEP:
        # sweep budgets reach B = 7m; the saturation slack mu/lambda must
        # clear the rounding gate 1e-6 * B even on weakly identified trials
        return BarrierConfig(time_limit=plan.time_limit, mu_final=1e-11)
    return BarrierConfig(time_limit=plan.time_limit)


def _fw_start(plan: ExperimentPlan, instance: ProblemInstance):
    if not plan.fw_warm_start or instance.budget <= 0.0:
        return None
    return separable_warm_start(instance)


def _solvers(choice: SolverChoice) -> tuple[str, ...]:
    if choice is SolverChoice.BOTH:
        return ("fw", "barrier")
    return (choice.value,)


def _quantiles(values) -> tuple[float, float, float]:
    data = sorted(values)
    med = statistics.median(data)
    lo = float(np.percentile(data, 25))
    hi = float(np.percentile(data, 75))
    return med, lo, hi


def _run_tasks(tasks, worker, threads: int):
    if threads <= 1:
        return [worker(task) for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, tasks))


def run(plan: ExperimentPlan) -> RunResult:
    runner = {
        Experiment.SOLVE: _run_solve,
        Experiment.COMPARE_SOLVERS: _run_compare,
        Experiment.ROUNDING_GAP: _run_rounding_gap,
        Experiment.UNIFORM_SWEEP: _run_uniform_sweep,
        Experiment.SENSOR_SCALING: _run_sensor_scaling,
        Experiment.VALIDATE: _run_validate,
    }[plan.experiment]
    result = runner(plan)
    errors = [rec for rec in result.records if rec.get("error")]
    if len(errors) == len(result.records) and result.records:
        result.exit_code = EXIT_ALL_FAILED
    return result


def write_outputs(plan: ExperimentPlan, result: RunResult) -> None:
    if plan.output_path is None:
        return
    out = Path(plan.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_results(out, result.records)
    if result.aggregates:
        save_results(out.with_name(out.stem + ".aggregates.csv"), result.aggregates)
    for trial, solver, trace in result.traces:
        write_trace(out.with_name(out.stem + f".trace-{trial}-{solver}.csv"), trace)


def _solve_one(plan, instance, solver: str):
    """Run one solver; returns (final_bits, objective, detail dict, trace)."""
    t_start = time.perf_counter()
    if solver == "fw":
        trace = solve_fw(instance, _fw_config(plan), start=_fw_start(plan, instance))
        wall = time.perf_counter() - t_start
        detail = {
            "iterations": trace.iterations,
            "termination": trace.termination.value,
            "min_gap": trace.certificate.min_gap,
            "certificate_bound": trace.certificate.rate_bound,
            "stationarity": "",
            "complementarity": "",
        }
        return trace.final_bits, trace.final_objective, detail, trace, wall
    trace, kkt = solve_barrier(instance, _barrier_config(plan))
    wall = time.perf_counter() - t_start
    detail = {
        "iterations": trace.iterations,
        "termination": trace.termination.value,
        "min_gap": "",
        "certificate_bound": "",
        "stationarity": kkt.stationarity_residual,
        "complementarity": kkt.complementarity_residual,
    }
    return trace.final_bits, trace.final_objective, detail, trace, wall


_SOLVE_FIELDS = (
    "trial seed solver d m budget objective_relaxed budget_slack iterations termination "
    "min_gap certificate_bound stationarity complementarity objective_rounded gap_actual "
    "gap_bound gap_ratio distance_squared distance_bound residual_budget rounding_note "
    "wall_seconds error"
).split()


def _blank_row(fields) -> dict:
    return {name: "" for name in fields}


def _run_solve(plan: ExperimentPlan) -> RunResult:
    tasks = [(trial, solver) for trial in range(plan.trials) for solver in _solvers(plan.solver)]

    def worker(task):
        trial, solver = task
        row = _blank_row(_SOLVE_FIELDS)
        spec = trial_spec(plan.instance_spec, plan.seed, trial)
        row.update(trial=trial, seed=spec.seed, solver=solver)
        trace = None
        try:
            instance = generate(spec)
            row.update(d=instance.d, m=instance.m, budget=instance.budget)
            bits, objective, detail, trace, wall = _solve_one(plan, instance, solver)
            row.update(
                objective_relaxed=objective,
                budget_slack=instance.budget - bits.total,
                wall_seconds=wall,
                **detail,
            )
            try:
                report = round_with_guarantees(instance, bits)
                ratio = report.gap_actual / report.gap_bound if report.gap_bound > 0 else ""
                row.update(
                    objective_rounded=objective + report.gap_actual,
                    gap_actual=report.gap_actual,
                    gap_bound=report.gap_bound,
                    gap_ratio=ratio,
                    distance_squared=report.distance_squared,
                    distance_bound=report.distance_bound,
                    residual_budget=report.residual_budget,
                )
            except RoundingPreconditionError as exc:
                row["rounding_note"] = str(exc)
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row, trace

    outcomes = _run_tasks(tasks, worker, plan.threads)
    records = [row for row, _ in outcomes]
    traces = [
        (task[0], task[1], trace) for task, (_, trace) in zip(tasks, outcomes) if trace is not None
    ]
    ok = [r for r in records if not r["error"]]
    aggregates = []
    if ok:
        med, lo, hi = _quantiles([float(r["objective_relaxed"]) for r in ok])
        aggregates.append(
            {"statistic": "objective_relaxed", "median": med, "iqr_low": lo, "iqr_high": hi, "count": len(ok)}
        )
    return RunResult(records=records, aggregates=aggregates, traces=traces)


_COMPARE_FIELDS = (
    "trial seed d m budget fw_objective barrier_objective relative_difference fw_iterations "
    "fw_termination fw_min_gap fw_certificate_bound barrier_iterations barrier_termination "
    "barrier_stationarity barrier_slack fw_seconds barrier_seconds error"
).split()


def _run_compare(plan: ExperimentPlan) -> RunResult:
    def worker(trial):
        row = _blank_row(_COMPARE_FIELDS)
        spec = trial_spec(plan.instance_spec, plan.seed, trial)
        row.update(trial=trial, seed=spec.seed)
        try:
            instance = generate(spec)
            row.update(d=instance.d, m=instance.m, budget=instance.budget)
            fw_bits, fw_obj, fw_detail, _, fw_wall = _solve_one(plan, instance, "fw")
            ba_bits, ba_obj, ba_detail, _, ba_wall = _solve_one(plan, instance, "barrier")
            row.update(
                fw_objective=fw_obj,
                barrier_objective=ba_obj,
                relative_difference=abs(fw_obj - ba_obj) / ba_obj,
                fw_iterations=fw_detail["iterations"],
                fw_termination=fw_detail["termination"],
                fw_min_gap=fw_detail["min_gap"],
                fw_certificate_bound=fw_detail["certificate_bound"],
                barrier_iterations=ba_detail["iterations"],
                barrier_termination=ba_detail["termination"],
                barrier_stationarity=ba_detail["stationarity"],
                barrier_slack=instance.budget - ba_bits.total,
                fw_seconds=fw_wall,
                barrier_seconds=ba_wall,
            )
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    records = _run_tasks(list(range(plan.trials)), worker, plan.threads)
    ok = [r for r in records if not r["error"]]
    aggregates = []
    if ok:
        for key in ("relative_difference", "fw_seconds", "barrier_seconds"):
            med, lo, hi = _quantiles([float(r[key]) for r in ok])
            aggregates.append({"statistic": key, "median": med, "iqr_low": lo, "iqr_high": hi, "count": len(ok)})
    return RunResult(records=records, aggregates=aggregates)


_ROUNDING_FIELDS = (
    "trial seed m budget objective_relaxed objective_rounded gap_actual gap_bound "
    "simplified_gap_bound gap_ratio residual_budget distance_squared distance_bound "
    "stationarity budget_slack termination wall_seconds error"
).split()


def _run_rounding_gap(plan: ExperimentPlan) -> RunResult:
    def worker(trial):
        row = _blank_row(_ROUNDING_FIELDS)
        spec = trial_spec(plan.instance_spec, plan.seed, trial)
        row.update(trial=trial, seed=spec.seed)
        try:
            instance = generate(spec)
            row.update(m=instance.m, budget=instance.budget)
            t0 = time.perf_counter()
            trace, kkt = solve_barrier(instance, _barrier_config(plan))
            report = round_with_guarantees(instance, trace.final_bits)
            wall = time.perf_counter() - t0
            relaxed = trace.final_objective
            row.update(
                objective_relaxed=relaxed,
                objective_rounded=relaxed + report.gap_actual,
                gap_actual=report.gap_actual,
                gap_bound=report.gap_bound,
                simplified_gap_bound=report.simplified_gap_bound,
                gap_ratio=report.gap_actual / report.gap_bound if report.gap_bound > 0 else "",
                residual_budget=report.residual_budget,
                distance_squared=report.distance_squared,
                distance_bound=report.distance_bound,
                stationarity=kkt.stationarity_residual,
                budget_slack=instance.budget - trace.final_bits.total,
                termination=trace.termination.value,
                wall_seconds=wall,
            )
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    records = _run_tasks(list(range(plan.trials)), worker, plan.threads)
    ok = [r for r in records if not r["error"] and r["gap_ratio"] != ""]
    aggregates = []
    if ok:
        for key in ("gap_actual", "gap_bound", "gap_ratio"):
            med, lo, hi = _quantiles([float(r[key]) for r in ok])
            aggregates.append({"statistic": key, "median": med, "iqr_low": lo, "iqr_high": hi, "count": len(ok)})
    return RunResult(records=records, aggregates=aggregates)


_SWEEP_FIELDS = (
    "budget_per_sensor trial seed budget uniform_objective relaxed_objective rounded_objective "
    "improvement_percent gap_bound stationarity termination wall_seconds error"
).split()


def _run_uniform_sweep(plan: ExperimentPlan) -> RunResult:
    sweep = plan.sweep_values or DEFAULT_BUDGET_SWEEP
    tasks = [(c, trial) for c in sweep for trial in range(plan.trials)]

    def worker(task):
        c, trial = task
        row = _blank_row(_SWEEP_FIELDS)
        spec = replace(trial_spec(plan.instance_spec, plan.seed, trial), budget_per_sensor=float(c))
        row.update(budget_per_sensor=c, trial=trial, seed=spec.seed)
        try:
            instance = generate(spec)
            row["budget"] = instance.budget
            t0 = time.perf_counter()
            trace, kkt = solve_barrier(instance, _barrier_config(plan))
            report = round_with_guarantees(instance, trace.final_bits)
            wall = time.perf_counter() - t0
            uniform_objective = evaluate(instance, uniform_allocation(instance)).objective
            rounded_objective = trace.final_objective + report.gap_actual
            row.update(
                uniform_objective=uniform_objective,
                relaxed_objective=trace.final_objective,
                rounded_objective=rounded_objective,
                improvement_percent=100.0 * (uniform_objective - rounded_objective) / uniform_objective,
                gap_bound=report.gap_bound,
                stationarity=kkt.stationarity_residual,
                termination=trace.termination.value,
                wall_seconds=wall,
            )
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    records = _run_tasks(tasks, worker, plan.threads)
    aggregates = []
    for c in sweep:
        ok = [r for r in records if r["budget_per_sensor"] == c and not r["error"]]
        if ok:
            med, lo, hi = _quantiles([float(r["improvement_percent"]) for r in ok])
            aggregates.append(
                {
                    "budget_per_sensor": c,
                    "median_improvement_percent": med,
                    "iqr_low": lo,
                    "iqr_high": hi,
                    "count": len(ok),
                }
            )
    return RunResult(records=records, aggregates=aggregates)


_SCALING_FIELDS = (
    "ratio m d trial seed iterations final_objective final_gap wall_seconds per_iteration_seconds error"
).split()


def _run_sensor_scaling(plan: ExperimentPlan) -> RunResult:
    sweep = plan.sweep_values or DEFAULT_RATIO_SWEEP
    base = plan.instance_spec
    if base.kind is not InstanceKind.RANDOM_GAUSSIAN:
        base = InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=base.d or 10, m=base.d or 10, seed=base.seed)
    tasks = [(ratio, trial) for ratio in sweep for trial in range(plan.trials)]

    def worker(task):
        ratio, trial = task
        row = _blank_row(_SCALING_FIELDS)
        d = base.d
        m = max(int(round(ratio * d)), 1)
        # total budget pinned to 2d across the sweep, not 2m
        spec = replace(trial_spec(base, plan.seed, trial), m=m, budget_per_sensor=2.0 * d / m)
        row.update(ratio=ratio, m=m, d=d, trial=trial, seed=spec.seed)
        try:
            instance = generate(spec)
            config = FwConfig(
                max_iterations=_SCALING_ITERATIONS,
                gap_tolerance=1e-300,
                step_rule=StepRule.SHORT_STEP,
                time_limit=plan.time_limit,
            )
            t0 = time.perf_counter()
            trace = solve_fw(instance, config)
            wall = time.perf_counter() - t0
            evaluations = len(trace.iterates)  # one factorization per record
            row.update(
                iterations=trace.iterations,
                final_objective=trace.final_objective,
                final_gap=trace.iterates[-1].gap,
                wall_seconds=wall,
                per_iteration_seconds=wall / evaluations,
            )
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    records = _run_tasks(tasks, worker, plan.threads)
    aggregates = []
    for ratio in sweep:
        ok = [r for r in records if r["ratio"] == ratio and not r["error"]]
        if ok:
            med, lo, hi = _quantiles([float(r["per_iteration_seconds"]) for r in ok])
            aggregates.append(
                {"ratio": ratio, "m": ok[0]["m"], "median_per_iteration_seconds": med, "iqr_low": lo, "iqr_high": hi, "count": len(ok)}
            )
    return RunResult(records=records, aggregates=aggregates)


_VALIDATE_FIELDS = (
    "mode sample_count empirical_mse analytic_mse standard_error mse_sigmas "
    "max_mean_error_sigmas passed error"
).split()


def _run_validate(plan: ExperimentPlan) -> RunResult:
    spec = plan.instance_spec

    def worker(mode: DitherMode):
        row = _blank_row(_VALIDATE_FIELDS)
        row["mode"] = mode.value
        try:
            instance = generate(trial_spec(spec, plan.seed, 0))
            bits = uniform_allocation(instance)
            bank = QuantizerBank.for_allocation(instance, bits, mode, seed=plan.seed + 7919)
            report = simulate_lmmse(instance, bits, plan.mc_samples, bank)
            mse_sigmas = (
                abs(report.empirical_mse - report.analytic_mse) / report.standard_error
                if report.standard_error > 0
                else float("inf")
            )
            mean_sigmas = float(np.max(np.abs(report.empirical_error_mean) / report.empirical_error_se))
            passed = mean_sigmas <= 4.0 and (mode is DitherMode.NON_SUBTRACTIVE or mse_sigmas <= 3.0)
            row.update(
                sample_count=report.sample_count,
                empirical_mse=report.empirical_mse,
                analytic_mse=report.analytic_mse,
                standard_error=report.standard_error,
                mse_sigmas=mse_sigmas,
                max_mean_error_sigmas=mean_sigmas,
                passed=passed,
            )
        except (BitAllocationError, np.linalg.LinAlgError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        return row

    records = _run_tasks([DitherMode.SUBTRACTIVE, DitherMode.NON_SUBTRACTIVE], worker, plan.threads)
    result = RunResult(records=records, aggregates=[])
    if any(rec.get("error") or rec.get("passed") is not True for rec in records):
        result.exit_code = EXIT_ALL_FAILED
    return result
