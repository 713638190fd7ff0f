import numpy as np
import pytest

from bitalloc.experiments import (
    EXIT_ALL_FAILED,
    EXIT_OK,
    Experiment,
    ExperimentPlan,
    SolverChoice,
    run,
    write_outputs,
)
from bitalloc.instances import InstanceKind, InstanceSpec

SMALL_GRID = InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=6)
SMALL_GAUSSIAN = InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=3, m=5)


def drop_timing(records):
    return [
        {k: v for k, v in rec.items() if not k.endswith("_seconds")} for rec in records
    ]


class TestSolvePlan:
    def test_both_solvers_and_rounding(self):
        plan = ExperimentPlan(
            experiment=Experiment.SOLVE, instance_spec=SMALL_GRID, trials=2, seed=5
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        assert len(result.records) == 4  # 2 trials x 2 solvers
        for rec in result.records:
            assert rec["error"] == ""
            assert float(rec["objective_relaxed"]) > 0
        barrier_rows = [r for r in result.records if r["solver"] == "barrier"]
        for rec in barrier_rows:
            assert rec["rounding_note"] == ""
            assert float(rec["gap_actual"]) <= float(rec["gap_bound"]) + 1e-9
        assert len(result.traces) == 4

    def test_seed_recorded_per_trial(self):
        plan = ExperimentPlan(
            experiment=Experiment.SOLVE,
            instance_spec=SMALL_GRID,
            trials=3,
            seed=100,
            solver=SolverChoice.BARRIER,
        )
        result = run(plan)
        assert [rec["seed"] for rec in result.records] == [100, 101, 102]


class TestComparePlan:
    def test_agreement_on_small_grid(self):
        plan = ExperimentPlan(
            experiment=Experiment.COMPARE_SOLVERS, instance_spec=SMALL_GRID, trials=2, seed=1
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        for rec in result.records:
            assert rec["error"] == ""
            assert float(rec["relative_difference"]) < 1e-2
        stats = {agg["statistic"] for agg in result.aggregates}
        assert {"relative_difference", "fw_seconds", "barrier_seconds"} <= stats


class TestRoundingGapPlan:
    def test_ratio_aggregates(self):
        plan = ExperimentPlan(
            experiment=Experiment.ROUNDING_GAP, instance_spec=SMALL_GRID, trials=3, seed=2
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        ratios = [float(rec["gap_ratio"]) for rec in result.records]
        assert all(0.0 <= ratio < 1.0 for ratio in ratios)
        agg = {a["statistic"]: a for a in result.aggregates}
        assert agg["gap_ratio"]["count"] == 3

    def test_all_trials_failed_exit_code(self):
        # zero budget has no barrier interior, so every trial errors out
        spec = InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=4, budget_per_sensor=0.0)
        plan = ExperimentPlan(experiment=Experiment.ROUNDING_GAP, instance_spec=spec, trials=2)
        result = run(plan)
        assert result.exit_code == EXIT_ALL_FAILED
        assert all("BoundaryError" in rec["error"] for rec in result.records)


class TestUniformSweepPlan:
    def test_improvement_recorded_per_budget(self):
        plan = ExperimentPlan(
            experiment=Experiment.UNIFORM_SWEEP,
            instance_spec=InstanceSpec(kind=InstanceKind.GRID_LAPLACIAN, d=8),
            trials=2,
            sweep_values=(2.0, 3.0),
            seed=3,
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        assert len(result.records) == 4
        for rec in result.records:
            assert rec["error"] == ""
            assert float(rec["improvement_percent"]) > -1e-6
        assert [agg["budget_per_sensor"] for agg in result.aggregates] == [2.0, 3.0]


class TestSensorScalingPlan:
    def test_per_iteration_timing(self):
        plan = ExperimentPlan(
            experiment=Experiment.SENSOR_SCALING,
            instance_spec=InstanceSpec(kind=InstanceKind.RANDOM_GAUSSIAN, d=4, m=4),
            trials=2,
            sweep_values=(2.0, 5.0),
            seed=4,
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        for rec in result.records:
            assert rec["error"] == ""
            assert rec["iterations"] == 30
            assert float(rec["per_iteration_seconds"]) > 0.0
        assert [agg["ratio"] for agg in result.aggregates] == [2.0, 5.0]
        assert result.aggregates[0]["m"] == 8


class TestValidatePlan:
    def test_passes_at_moderate_sample_count(self):
        plan = ExperimentPlan(
            experiment=Experiment.VALIDATE,
            instance_spec=SMALL_GAUSSIAN,
            trials=1,
            seed=6,
            mc_samples=30_000,
        )
        result = run(plan)
        assert result.exit_code == EXIT_OK
        modes = {rec["mode"] for rec in result.records}
        assert modes == {"subtractive", "non-subtractive"}
        assert all(rec["passed"] is True for rec in result.records)


class TestDeterminism:
    def test_rerun_identical_without_timing(self):
        plan = ExperimentPlan(
            experiment=Experiment.SOLVE, instance_spec=SMALL_GRID, trials=2, seed=9
        )
        first = run(plan)
        second = run(plan)
        assert drop_timing(first.records) == drop_timing(second.records)

    def test_threads_do_not_change_rows(self):
        base = ExperimentPlan(
            experiment=Experiment.ROUNDING_GAP, instance_spec=SMALL_GRID, trials=4, seed=11
        )
        threaded = ExperimentPlan(
            experiment=Experiment.ROUNDING_GAP,
            instance_spec=SMALL_GRID,
            trials=4,
            seed=11,
            threads=3,
        )
        assert drop_timing(run(base).records) == drop_timing(run(threaded).records)


class TestOutputs:
    def test_files_written(self, tmp_path):
        out = tmp_path / "solve.csv"
        plan = ExperimentPlan(
            experiment=Experiment.SOLVE,
            instance_spec=SMALL_GRID,
            trials=1,
            seed=12,
            solver=SolverChoice.BARRIER,
            output_path=str(out),
        )
        result = run(plan)
        write_outputs(plan, result)
        assert out.exists()
        assert (tmp_path / "solve.aggregates.csv").exists()
        assert (tmp_path / "solve.trace-0-barrier.csv").exists()
        header = out.read_text().splitlines()[0]
        assert header.startswith("trial,seed,solver")

    def test_no_output_path_is_noop(self):
        plan = ExperimentPlan(
            experiment=Experiment.VALIDATE, instance_spec=SMALL_GAUSSIAN, trials=1, mc_samples=2_000
        )
        write_outputs(plan, run(plan))  # must not raise


class TestPlanValidation:
    def test_trials_positive(self):
        with pytest.raises(ValueError):
            ExperimentPlan(experiment=Experiment.SOLVE, instance_spec=SMALL_GRID, trials=0)

    def test_threads_positive(self):
        with pytest.raises(ValueError):
            ExperimentPlan(experiment=Experiment.SOLVE, instance_spec=SMALL_GRID, threads=0)

    def test_empty_sweep_rejected(self):
        with pytest.raises(ValueError):
            ExperimentPlan(
                experiment=Experiment.UNIFORM_SWEEP, instance_spec=SMALL_GRID, sweep_values=()
            )
