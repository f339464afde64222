"""
Unit tests for Temporal activities.

Tests cover:
- Trial simulation (scatter and order-scan modes) and its seeding
- run_trial persistence and failure types
- Output assembly: CSV tables, summary.json, staging cleanup
- PARTIAL markers on storage failures
"""

import csv
import json
import math
import os
import tempfile
from unittest.mock import AsyncMock, patch

import pytest
from temporalio.exceptions import ApplicationError

from pattern_extrapolation.activities import (
    NUMERICAL_FAILURE,
    STORAGE_FAILURE,
    build_tables,
    run_trial,
    simulate_trial,
    stream_seed,
    summarize_order_scan,
    summarize_scatter,
    write_experiment_outputs,
)
from pattern_extrapolation.models import (
    ExperimentConfig,
    SamplingLayout,
    SolverSettings,
    TrialInput,
    WriteOutputsInput,
)
from pattern_extrapolation.storage import PARTIAL_MARKER, FileManager


def small_experiment(out_dir="results", **overrides):
    settings = dict(
        family="rect",
        rows=2,
        cols=2,
        sampling=(SamplingLayout("random", count=30),),
        sigmas=(0.0, 0.1),
        trials=2,
        solver=SolverSettings(iterations=2, restarts=1),
        dense_step_deg=30.0,
        out_dir=out_dir,
        workers=2,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


@pytest.fixture
def temp_dir():
    """Create temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


class TestStreamSeed:
    """Seeds depend only on their words."""

    def test_deterministic(self):
        assert stream_seed(0, 5, 1, 2) == stream_seed(0, 5, 1, 2)

    def test_distinct_streams(self):
        seeds = {stream_seed(7, trial, stream) for trial in range(20) for stream in range(4)}
        assert len(seeds) == 80

    def test_fits_32_bits(self):
        assert 0 <= stream_seed(123456789, 99) < 2 ** 32


class TestSimulateTrial:
    """Test a single trial without Temporal."""

    def test_scatter_rows(self):
        experiment = small_experiment()
        record = simulate_trial(experiment, 0)
        assert record["trial"] == 0
        assert [(row["sampling"], row["sigma"]) for row in record["scatter"]] == [("random", 0.0), ("random", 0.1)]
        for row in record["scatter"]:
            assert row["residual"] >= 0.0
            assert row["total_error"] >= 0.0
            assert 0 <= row["iterations_used"] <= 2
        expected_trace = sum(row["iterations_used"] + 1 for row in record["scatter"])
        assert len(record["trace"]) == expected_trace
        assert record["trace"][0]["iteration"] == 0

    def test_trace_matches_final_residual(self):
        record = simulate_trial(small_experiment(), 1)
        for row in record["scatter"]:
            trace = [t for t in record["trace"] if t["sigma"] == row["sigma"]]
            assert trace[-1]["residual"] == row["residual"]
            residuals = [t["residual"] for t in trace]
            assert residuals == sorted(residuals, reverse=True)

    def test_deterministic(self):
        experiment = small_experiment()
        assert simulate_trial(experiment, 3) == simulate_trial(experiment, 3)

    def test_trials_differ(self):
        experiment = small_experiment()
        assert simulate_trial(experiment, 0)["scatter"] != simulate_trial(experiment, 1)["scatter"]

    def test_rows_do_not_depend_on_trial_count(self):
        a = simulate_trial(small_experiment(trials=1), 4)
        b = simulate_trial(small_experiment(trials=10, first_trial=2), 4)
        assert a == b

    def test_magnitude_kind(self):
        record = simulate_trial(small_experiment(measurement_kind="db", sigmas=(0.0,)), 0)
        assert len(record["scatter"]) == 1
        assert record["scatter"][0]["residual"] >= 0.0

    def test_db_kind_records_residual_in_both_units(self):
        record = simulate_trial(small_experiment(measurement_kind="db", sigmas=(0.0, 0.1)), 2)
        for row in record["scatter"]:
            assert row["residual_db"] == pytest.approx(row["residual"], rel=1e-9, abs=1e-9)
            assert math.isfinite(row["residual_linear"])
            assert row["residual_linear"] >= 0.0

    def test_error_units_only_change_total_error(self):
        linear = simulate_trial(small_experiment(measurement_kind="db", sigmas=(0.1,)), 0)["scatter"][0]
        db = simulate_trial(small_experiment(measurement_kind="db", sigmas=(0.1,), error_units="db"), 0)["scatter"][0]
        for column in ("residual", "residual_linear", "residual_db", "iterations_used"):
            assert linear[column] == db[column]
        assert linear["total_error"] != db["total_error"]

    def test_linear_error_bounded_by_pattern_peak(self):
        """The default linear total error of a dB fit is on the magnitude scale."""
        record = simulate_trial(small_experiment(measurement_kind="db", sigmas=(0.0,)), 0)
        row = record["scatter"][0]
        # unit-norm excitations keep linear magnitudes at most sqrt(rows * cols)
        assert row["total_error"] <= 2.0 * math.sqrt(4.0)

    def test_horn_family(self):
        experiment = small_experiment(
            family="horn",
            sampling=(SamplingLayout("random", count=15), SamplingLayout("azimuth", count=15)),
            sigmas=(0.0,),
        )
        record = simulate_trial(experiment, 0)
        assert [row["sampling"] for row in record["scatter"]] == ["random", "azimuth"]

    def test_order_scan(self):
        experiment = small_experiment(rows=1, cols=2, mode="order-scan", order_rows=(1, 2), order_cols=(1, 2))
        record = simulate_trial(experiment, 0)
        rows = record["order_scan"]
        assert [(r["rows"], r["cols"]) for r in rows] == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert sum(r["selected"] for r in rows) == 1
        assert "scatter" not in record


class TestRunTrialActivity:
    """Test the run_trial activity."""

    async def test_persists_trial(self, temp_dir):
        experiment = small_experiment()
        result = await run_trial(TrialInput("run-1", experiment, 0, temp_dir))

        assert result.trial_index == 0
        stored = await FileManager(temp_dir, "run-1").read(0)
        assert stored == json.loads(json.dumps(simulate_trial(experiment, 0)))
        assert result.rows_written == len(stored["scatter"]) + len(stored["trace"])
        assert result.best_residual == min(row["residual"] for row in stored["scatter"])

    async def test_numerical_failure(self, temp_dir):
        with patch("pattern_extrapolation.activities.simulate_trial", side_effect=ArithmeticError("diverged")):
            with pytest.raises(ApplicationError) as exc_info:
                await run_trial(TrialInput("run-2", small_experiment(), 0, temp_dir))
        assert exc_info.value.type == NUMERICAL_FAILURE
        assert exc_info.value.non_retryable

    async def test_storage_failure_leaves_marker(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        staging = os.path.join(temp_dir, "staging")
        with patch.object(FileManager, "write_atomic", AsyncMock(side_effect=OSError("disk full"))):
            with pytest.raises(ApplicationError) as exc_info:
                await run_trial(TrialInput("run-3", small_experiment(out_dir=out_dir), 0, staging))
        assert exc_info.value.type == STORAGE_FAILURE
        assert exc_info.value.non_retryable

        marker = os.path.join(out_dir, PARTIAL_MARKER)
        assert os.path.exists(marker)
        with open(marker) as f:
            assert "disk full" in f.read()


class TestWriteExperimentOutputs:
    """Test output assembly from staged trials."""

    async def stage(self, experiment, staging_dir, run_id):
        for index in experiment.trial_indices:
            await run_trial(TrialInput(run_id, experiment, index, staging_dir))

    async def test_writes_tables_and_summary(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        staging = os.path.join(temp_dir, "staging")
        experiment = small_experiment(out_dir=out_dir)
        await self.stage(experiment, staging, "run-a")

        outputs = await write_experiment_outputs(WriteOutputsInput("run-a", experiment, staging))

        assert outputs.out_dir == out_dir
        assert outputs.trials == 2
        assert set(outputs.files) == {"scatter.csv", "residual_trace.csv", "summary.json"}

        scatter = read_csv(os.path.join(out_dir, "scatter.csv"))
        assert scatter[0] == [
            "trial", "sampling", "sigma", "residual", "residual_linear", "residual_db",
            "total_error", "iterations_used", "converged",
        ]
        assert [row[0] for row in scatter[1:]] == ["0", "0", "1", "1"]
        assert {row[8] for row in scatter[1:]} <= {"true", "false"}
        # complex samples: the linear misfit is the solver residual
        for row in scatter[1:]:
            assert float(row[4]) == pytest.approx(float(row[3]), rel=1e-9, abs=1e-9)

        trace = read_csv(os.path.join(out_dir, "residual_trace.csv"))
        assert trace[0] == ["trial", "sampling", "sigma", "iteration", "residual"]

        with open(os.path.join(out_dir, "summary.json")) as f:
            summary = json.load(f)
        assert summary["model"] == "rect-2x2"
        assert summary["trials"] == 2
        assert [(g["sampling"], g["sigma"], g["count"]) for g in summary["groups"]] == [
            ("random", 0.0, 2),
            ("random", 0.1, 2),
        ]

        assert os.listdir(staging) == []
        assert not os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))

    async def test_order_scan_outputs(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        experiment = small_experiment(
            out_dir=out_dir, rows=1, cols=1, mode="order-scan", order_rows=(1, 1), order_cols=(1, 2), trials=1
        )
        await self.stage(experiment, temp_dir, "run-o")

        outputs = await write_experiment_outputs(WriteOutputsInput("run-o", experiment, temp_dir))

        assert set(outputs.files) == {"order_scan.csv", "summary.json"}
        table = read_csv(os.path.join(out_dir, "order_scan.csv"))
        assert table[0] == ["trial", "rows", "cols", "min_residual", "selected"]
        assert len(table) == 3
        with open(os.path.join(out_dir, "summary.json")) as f:
            summary = json.load(f)
        assert summary["order_scan"]["true_shape"] == "1x1"

    async def test_missing_staging_leaves_marker(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        experiment = small_experiment(out_dir=out_dir)

        with pytest.raises(ApplicationError) as exc_info:
            await write_experiment_outputs(WriteOutputsInput("run-missing", experiment, temp_dir))

        assert exc_info.value.type == STORAGE_FAILURE
        assert os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))

    async def test_write_failure_keeps_staging(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        staging = os.path.join(temp_dir, "staging")
        experiment = small_experiment(out_dir=out_dir, trials=1)
        await self.stage(experiment, staging, "run-w")

        with patch("pattern_extrapolation.activities.write_text_atomic", AsyncMock(side_effect=OSError("disk full"))):
            with pytest.raises(ApplicationError) as exc_info:
                await write_experiment_outputs(WriteOutputsInput("run-w", experiment, staging))

        assert exc_info.value.type == STORAGE_FAILURE
        assert os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))
        assert os.path.exists(FileManager(staging, "run-w").get_file_path(0))

    async def test_success_clears_stale_marker(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        os.makedirs(out_dir)
        with open(os.path.join(out_dir, PARTIAL_MARKER), "w") as f:
            f.write("earlier failure\n")
        experiment = small_experiment(out_dir=out_dir, trials=1)
        await self.stage(experiment, temp_dir, "run-s")

        await write_experiment_outputs(WriteOutputsInput("run-s", experiment, temp_dir))

        assert not os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))


class TestSummaries:
    """Test summary statistics from synthetic rows."""

    def test_scatter_groups_and_ambiguity(self):
        experiment = small_experiment(
            sampling=(SamplingLayout("random"), SamplingLayout("principal")),
            sigmas=(0.0,),
        )
        rows = [
            {"sampling": "random", "sigma": 0.0, "residual": r, "total_error": r}
            for r in (1.0, 2.0, 3.0, 4.0)
        ] + [
            {"sampling": "principal", "sigma": 0.0, "residual": r, "total_error": t}
            for r, t in ((0.5, 5.0), (0.5, 0.5), (3.0, 3.5))
        ]
        groups = summarize_scatter(experiment, rows)

        random_group, principal_group = groups
        assert random_group["spearman_rho"] == pytest.approx(1.0)
        assert random_group["ambiguity_fraction"] == 0.0
        assert principal_group["count"] == 3
        assert principal_group["ambiguity_fraction"] == pytest.approx(1 / 3)
        assert set(principal_group["residual_quantiles"]) == {"0.1", "0.25", "0.5", "0.75", "0.9"}

    def test_small_groups_skip_statistics(self):
        experiment = small_experiment(sigmas=(0.0,))
        groups = summarize_scatter(experiment, [{"sampling": "random", "sigma": 0.0, "residual": 1.0, "total_error": 2.0}])
        assert groups[0]["count"] == 1
        assert "spearman_rho" not in groups[0]

    def test_order_scan_fraction(self):
        experiment = small_experiment(rows=2, cols=1, mode="order-scan")
        rows = [
            {"rows": 2, "cols": 1, "selected": True},
            {"rows": 1, "cols": 1, "selected": False},
            {"rows": 2, "cols": 1, "selected": True},
            {"rows": 2, "cols": 2, "selected": True},
        ]
        summary = summarize_order_scan(experiment, rows)
        assert summary["selection_counts"] == {"2x1": 2, "2x2": 1}
        assert summary["true_shape_fraction"] == pytest.approx(2 / 3)

    def test_csv_cells(self):
        experiment = small_experiment(mode="order-scan")
        record = {"order_scan": [{"trial": 0, "rows": 1, "cols": 2, "min_residual": 0.1, "selected": False}]}
        tables = build_tables(experiment, [record])
        assert tables["order_scan.csv"] == "trial,rows,cols,min_residual,selected\n0,1,2,0.1,false\n"
