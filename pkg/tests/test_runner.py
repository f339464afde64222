"""
Integration tests for the in-process experiment runner.

Tests cover:
- Output schema of a minimal study
- Byte-identical reruns, independent of the worker count
- Running a subrange of trials reproduces the same rows
- PARTIAL marker on storage failure
"""

import csv
import json
import math
import os
import tempfile
from unittest.mock import AsyncMock, patch

import pytest
from temporalio.exceptions import ApplicationError

from pattern_extrapolation.activities import STORAGE_FAILURE
from pattern_extrapolation.models import ExperimentConfig, SamplingLayout, SolverSettings
from pattern_extrapolation.runner import run_experiment, run_experiment_async
from pattern_extrapolation.storage import PARTIAL_MARKER


def read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def quick_config(out_dir, **overrides):
    settings = dict(
        family="rect",
        rows=2,
        cols=2,
        sampling=(SamplingLayout("random", count=30), SamplingLayout("principal", az_count=12, el_count=7)),
        sigmas=(0.0, 0.05),
        trials=4,
        solver=SolverSettings(iterations=2, restarts=2),
        dense_step_deg=30.0,
        out_dir=out_dir,
        workers=3,
    )
    settings.update(overrides)
    return ExperimentConfig(**settings)


@pytest.fixture
def temp_dir():
    """Create temporary directory for test files."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield tmpdir


class TestRunExperiment:
    """Test complete runs without a Temporal server."""

    def test_single_trial_schema(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        config = ExperimentConfig(
            family="rect",
            rows=3,
            cols=3,
            sampling=(SamplingLayout("random", count=200),),
            sigmas=(0.0,),
            trials=1,
            solver=SolverSettings(iterations=1, restarts=1),
            dense_step_deg=30.0,
            out_dir=out_dir,
        )
        outputs = run_experiment(config)

        assert outputs.trials == 1
        with open(os.path.join(out_dir, "scatter.csv"), newline="") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == 1
        assert float(rows[0]["residual"]) >= 0.0
        assert math.isfinite(float(rows[0]["total_error"]))

    def test_rerun_is_byte_identical(self, temp_dir):
        first = os.path.join(temp_dir, "first")
        second = os.path.join(temp_dir, "second")
        run_experiment(quick_config(first))
        run_experiment(quick_config(second))
        for name in ("scatter.csv", "residual_trace.csv", "summary.json"):
            assert read_bytes(os.path.join(first, name)) == read_bytes(os.path.join(second, name))

    def test_worker_count_does_not_change_outputs(self, temp_dir):
        serial = os.path.join(temp_dir, "serial")
        parallel = os.path.join(temp_dir, "parallel")
        run_experiment(quick_config(serial, workers=1))
        run_experiment(quick_config(parallel, workers=4))
        for name in ("scatter.csv", "residual_trace.csv", "summary.json"):
            assert read_bytes(os.path.join(serial, name)) == read_bytes(os.path.join(parallel, name))

    def test_trial_subrange_reproduces_rows(self, temp_dir):
        full_dir = os.path.join(temp_dir, "full")
        part_dir = os.path.join(temp_dir, "part")
        run_experiment(quick_config(full_dir, trials=4))
        run_experiment(quick_config(part_dir, trials=2, first_trial=2))

        with open(os.path.join(full_dir, "scatter.csv"), newline="") as f:
            full = [row for row in csv.reader(f)]
        with open(os.path.join(part_dir, "scatter.csv"), newline="") as f:
            part = [row for row in csv.reader(f)]
        assert part[0] == full[0]
        assert part[1:] == [row for row in full[1:] if row[0] in ("2", "3")]

    def test_explicit_staging_dir_is_emptied(self, temp_dir):
        staging = os.path.join(temp_dir, "staging")
        run_experiment(quick_config(os.path.join(temp_dir, "out"), trials=2), staging_dir=staging)
        assert os.listdir(staging) == []

    async def test_storage_failure_leaves_marker(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        with patch("pattern_extrapolation.activities.write_text_atomic", AsyncMock(side_effect=OSError("read-only"))):
            with pytest.raises(ApplicationError) as exc_info:
                await run_experiment_async(quick_config(out_dir, trials=1))
        assert exc_info.value.type == STORAGE_FAILURE
        assert os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))
        assert not os.path.exists(os.path.join(out_dir, "scatter.csv"))

    async def test_trial_storage_failure_leaves_marker(self, temp_dir):
        out_dir = os.path.join(temp_dir, "out")
        with patch("pattern_extrapolation.storage.write_text_atomic", AsyncMock(side_effect=OSError("full"))):
            with pytest.raises(ApplicationError) as exc_info:
                await run_experiment_async(quick_config(out_dir, trials=1))
        assert exc_info.value.type == STORAGE_FAILURE
        assert os.path.exists(os.path.join(out_dir, PARTIAL_MARKER))


@pytest.mark.slow
class TestRectStudy:
    """Residual tracks total error under random sampling; principal planes show ambiguity."""

    def test_scatter_structure(self, temp_dir):
        out_dir = os.path.join(temp_dir, "study")
        config = ExperimentConfig(
            family="rect",
            rows=3,
            cols=3,
            sampling=(SamplingLayout("random", count=200), SamplingLayout("principal")),
            sigmas=(0.0,),
            trials=100,
            solver=SolverSettings(iterations=10, restarts=4),
            out_dir=out_dir,
            workers=8,
        )
        run_experiment(config)
        with open(os.path.join(out_dir, "summary.json")) as f:
            groups = {g["sampling"]: g for g in json.load(f)["groups"]}
        assert groups["random"]["spearman_rho"] >= 0.5
        assert groups["principal"]["ambiguity_fraction"] >= 0.10


def study_groups(config):
    run_experiment(config)
    with open(os.path.join(config.out_dir, "summary.json")) as f:
        return {g["sampling"]: g for g in json.load(f)["groups"]}


@pytest.mark.slow
class TestHornStudy:
    """Azimuth blocks leave an ambiguity cluster; principal planes do not."""

    def test_scatter_structure(self, temp_dir):
        groups = study_groups(ExperimentConfig(
            family="horn",
            sampling=(SamplingLayout("random", count=200), SamplingLayout("blocks"), SamplingLayout("principal")),
            sigmas=(0.0,),
            trials=100,
            solver=SolverSettings(iterations=10, restarts=4),
            out_dir=os.path.join(temp_dir, "horn"),
            workers=8,
        ))
        assert groups["random"]["spearman_rho"] >= 0.5
        assert groups["blocks"]["ambiguity_fraction"] >= 0.05
        assert groups["principal"]["ambiguity_fraction"] < 0.10


@pytest.mark.slow
class TestDishStudy:
    """Every layout sees about the same share of ambiguous trials."""

    def test_layouts_agree(self, temp_dir):
        groups = study_groups(ExperimentConfig(
            family="dish",
            sampling=(SamplingLayout("random", count=200), SamplingLayout("blocks"), SamplingLayout("principal")),
            sigmas=(0.0,),
            trials=100,
            solver=SolverSettings(iterations=10, restarts=4, scheme="compass"),
            out_dir=os.path.join(temp_dir, "dish"),
            workers=8,
        ))
        fractions = [group["ambiguity_fraction"] for group in groups.values()]
        assert len(fractions) == 3
        assert max(fractions) - min(fractions) <= 0.10
