"""
Temporal activities for Monte Carlo extrapolation experiments.

Activities do the actual work (simulation, solver runs, file I/O) and are
retried independently of the workflow that schedules them. A study is split
into one run_trial activity per trial, which persists its rows to a staging
file, and one write_experiment_outputs activity that assembles the staged
rows into the output tables.

Reproducibility: every random stream of a trial is seeded from
(master seed, trial index, stream, layout, sigma) only, so running trials
5..9 alone reproduces exactly the rows those trials produce in a full run,
whatever the concurrency.
"""

import asyncio
import csv
import io
import json
import os
from collections import Counter
from typing import Any, Dict, List, Sequence, Tuple

import aiofiles.os
import numpy as np
from temporalio import activity
from temporalio.exceptions import ApplicationError

from pattern_extrapolation.core import SamplePoint, SampledPattern, excitation_array, pack_points, to_kind
from pattern_extrapolation.designs import build_model, rect_array_model
from pattern_extrapolation.metrics import (
    DensePattern,
    ambiguity_fraction,
    dense_pattern,
    in_error_units,
    lattice_points,
    model_order_scan,
    residual_in_units,
    residual_total_scatter,
    total_error,
)
from pattern_extrapolation.models import (
    ExperimentConfig,
    ExperimentOutputs,
    TrialInput,
    TrialSummary,
    WriteOutputsInput,
)
from pattern_extrapolation.sampling import add_noise, generate_samples
from pattern_extrapolation.solver import extrapolate
from pattern_extrapolation.storage import (
    PARTIAL_MARKER,
    FileManager,
    write_partial_marker,
    write_text_atomic,
)

# ApplicationError types, used by callers to pick an exit status
NUMERICAL_FAILURE = "NumericalFailure"
STORAGE_FAILURE = "StorageFailure"

TRUTH_STREAM = 0
SAMPLING_STREAM = 1
NOISE_STREAM = 2
SOLVER_STREAM = 3

SCATTER_FILE = "scatter.csv"
TRACE_FILE = "residual_trace.csv"
ORDER_SCAN_FILE = "order_scan.csv"
SUMMARY_FILE = "summary.json"

# residual is in the observed kind; the two unit columns repeat it as
# linear and dB misfits
SCATTER_COLUMNS = (
    "trial", "sampling", "sigma",
    "residual", "residual_linear", "residual_db",
    "total_error", "iterations_used", "converged",
)
TRACE_COLUMNS = ("trial", "sampling", "sigma", "iteration", "residual")
ORDER_SCAN_COLUMNS = ("trial", "rows", "cols", "min_residual", "selected")

REFERENCE_LAYOUT = "random"

_NUMERICAL_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError)


def stream_seed(*words: int) -> int:
    """Independent 32-bit seed for a tuple of nonnegative integers."""
    return int(np.random.SeedSequence(list(words)).generate_state(1)[0])


def _observe(
    experiment: ExperimentConfig,
    trial_index: int,
    layout_index: int,
    sigma_index: int,
    points: Tuple[SamplePoint, ...],
    clean: np.ndarray,
) -> SampledPattern:
    sigma = experiment.sigmas[sigma_index]
    seed = stream_seed(experiment.seed, trial_index, NOISE_STREAM, layout_index, sigma_index)
    noisy = add_noise(clean, sigma, seed)
    kind = experiment.kind
    return SampledPattern(points=points, values=tuple(to_kind(noisy, kind)), kind=kind)


def _scatter_trial(experiment: ExperimentConfig, trial_index: int) -> Dict[str, Any]:
    model = build_model(experiment.family, experiment.rows, experiment.cols)
    kind = experiment.kind
    params = experiment.solver.to_params()

    truth_rng = np.random.default_rng(stream_seed(experiment.seed, trial_index, TRUTH_STREAM))
    truth_config, truth_excitation = model.draw_truth(truth_rng)
    truth = dense_pattern(model, truth_config, truth_excitation, kind, experiment.dense_step_deg)
    queries = lattice_points(truth.azimuths, truth.elevations)
    scored_truth = in_error_units(truth, experiment.error_units)

    scatter: List[Dict[str, Any]] = []
    trace: List[Dict[str, Any]] = []
    for layout_index, layout in enumerate(experiment.sampling):
        directions = generate_samples(
            layout.to_spec(),
            stream_seed(experiment.seed, trial_index, SAMPLING_STREAM, layout_index),
        )
        points = tuple(SamplePoint(direction=d) for d in directions)
        clean = model.forward(truth_config, truth_excitation, points)

        for sigma_index, sigma in enumerate(experiment.sigmas):
            observed = _observe(experiment, trial_index, layout_index, sigma_index, points, clean)
            result = extrapolate(
                model, observed, queries, params,
                stream_seed(experiment.seed, trial_index, SOLVER_STREAM, layout_index, sigma_index),
            )
            predicted = DensePattern(
                azimuths=truth.azimuths,
                elevations=truth.elevations,
                values=result.predicted.reshape(truth.values.shape),
                kind=kind,
            )
            fitted = model.forward(
                model.check_config(result.config),
                excitation_array(result.excitation, model.excitation_dim),
                pack_points(points),
            )
            residual_linear, residual_db = residual_in_units(fitted, observed)
            scatter.append({
                "trial": trial_index,
                "sampling": layout.kind,
                "sigma": sigma,
                "residual": result.residual,
                "residual_linear": residual_linear,
                "residual_db": residual_db,
                "total_error": total_error(in_error_units(predicted, experiment.error_units), scored_truth),
                "iterations_used": result.iterations_used,
                "converged": result.converged,
            })
            trace.extend(
                {
                    "trial": trial_index,
                    "sampling": layout.kind,
                    "sigma": sigma,
                    "iteration": iteration,
                    "residual": residual,
                }
                for iteration, residual in enumerate(result.residual_history)
            )

    return {"trial": trial_index, "scatter": scatter, "trace": trace}


def _order_scan_trial(experiment: ExperimentConfig, trial_index: int) -> Dict[str, Any]:
    """Draw a rows x cols truth array, observe it once and scan the order range."""
    model = rect_array_model(experiment.rows, experiment.cols)
    truth_rng = np.random.default_rng(stream_seed(experiment.seed, trial_index, TRUTH_STREAM))
    truth_config, truth_excitation = model.draw_truth(truth_rng)

    layout = experiment.sampling[0]
    directions = generate_samples(layout.to_spec(), stream_seed(experiment.seed, trial_index, SAMPLING_STREAM, 0))
    points = tuple(SamplePoint(direction=d) for d in directions)
    clean = model.forward(truth_config, truth_excitation, points)
    observed = _observe(experiment, trial_index, 0, 0, points, clean)

    row_lo, row_hi = experiment.order_rows
    col_lo, col_hi = experiment.order_cols
    scan = model_order_scan(
        observed,
        range(row_lo, row_hi + 1),
        range(col_lo, col_hi + 1),
        experiment.solver.to_params(),
        stream_seed(experiment.seed, trial_index, SOLVER_STREAM, 0, 0),
    )
    rows = [
        {
            "trial": trial_index,
            "rows": entry.rows,
            "cols": entry.cols,
            "min_residual": entry.min_residual,
            "selected": (entry.rows, entry.cols) == scan.selected,
        }
        for entry in scan.entries
    ]
    return {"trial": trial_index, "order_scan": rows}


def simulate_trial(experiment: ExperimentConfig, trial_index: int) -> Dict[str, Any]:
    """
    Run one trial synchronously and return its rows as a JSON-ready dict.

    Keys: "trial" plus "scatter" and "trace" in scatter mode, or
    "order_scan" in order-scan mode.
    """
    if experiment.mode == "order-scan":
        return _order_scan_trial(experiment, trial_index)
    return _scatter_trial(experiment, trial_index)


def _best_residual(record: Dict[str, Any]) -> float:
    rows = record.get("scatter") or []
    residuals = [row["residual"] for row in rows]
    residuals += [row["min_residual"] for row in record.get("order_scan") or []]
    return min(residuals) if residuals else float("nan")


@activity.defn
async def run_trial(input: TrialInput) -> TrialSummary:
    """
    Simulate one trial and persist its rows to the staging directory.

    The simulation is CPU-bound and runs in a worker thread so the worker's
    event loop keeps heartbeating other activities.

    Raises:
        ApplicationError: Non-retryable on numerical failure or if the
            staging file can't be written
    """
    try:
        record = await asyncio.to_thread(simulate_trial, input.experiment, input.trial_index)
    except _NUMERICAL_ERRORS as e:
        raise ApplicationError(
            f"Trial {input.trial_index} failed: {e}",
            type=NUMERICAL_FAILURE,
            non_retryable=True,
        ) from e

    file_manager = FileManager(input.staging_dir, input.run_id)
    try:
        await file_manager.write_atomic(input.trial_index, record)
    except Exception as e:
        # Non-retryable: file system full/corrupted, or permissions issue
        write_partial_marker(input.experiment.out_dir, f"staging trial {input.trial_index} failed: {e}")
        raise ApplicationError(
            f"Failed to persist trial {input.trial_index} for run {input.run_id}",
            type=STORAGE_FAILURE,
            non_retryable=True,
        ) from e

    rows_written = sum(len(record.get(key) or []) for key in ("scatter", "trace", "order_scan"))
    best = _best_residual(record)
    activity.logger.info(f"Trial {input.trial_index}: {rows_written} rows, best residual {best:.6g}")
    return TrialSummary(trial_index=input.trial_index, rows_written=rows_written, best_residual=best)


# Output assembly
# ---------------

def _csv_text(columns: Sequence[str], rows: Sequence[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row[column]) for column in columns])
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return value


def _quantile_record(quantiles: Dict[float, float]) -> Dict[str, float]:
    return {f"{level:g}": value for level, value in quantiles.items()}


def summarize_scatter(experiment: ExperimentConfig, rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """
    One group per (sampling, sigma): scatter statistics and, when random
    sampling was run at the same sigma, the ambiguity fraction against it.
    """
    pairs: Dict[Tuple[str, float], List[Tuple[float, float]]] = {}
    for row in rows:
        pairs.setdefault((row["sampling"], row["sigma"]), []).append((row["residual"], row["total_error"]))

    groups = []
    for layout in experiment.sampling:
        for sigma in experiment.sigmas:
            trials = pairs.get((layout.kind, sigma), [])
            group: Dict[str, Any] = {"sampling": layout.kind, "sigma": sigma, "count": len(trials)}
            if len(trials) >= 3:
                summary = residual_total_scatter(trials)
                group["spearman_rho"] = summary.spearman_rho
                group["residual_quantiles"] = _quantile_record(summary.residual_quantiles)
                group["total_error_quantiles"] = _quantile_record(summary.total_error_quantiles)
            reference = pairs.get((REFERENCE_LAYOUT, sigma))
            if trials and reference:
                group["ambiguity_fraction"] = ambiguity_fraction(trials, reference)
            groups.append(group)
    return groups


def summarize_order_scan(experiment: ExperimentConfig, rows: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    selections = Counter(f"{row['rows']}x{row['cols']}" for row in rows if row["selected"])
    trials = sum(selections.values())
    true_shape = f"{experiment.rows}x{experiment.cols}"
    return {
        "true_shape": true_shape,
        "selection_counts": dict(sorted(selections.items())),
        "true_shape_fraction": selections[true_shape] / trials if trials else None,
    }


def build_summary(experiment: ExperimentConfig, records: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Deterministic summary.json content (no timestamps or run ids)."""
    summary: Dict[str, Any] = {
        "family": experiment.family,
        "model": build_model(experiment.family, experiment.rows, experiment.cols).name,
        "kind": experiment.measurement_kind,
        "error_units": experiment.error_units,
        "mode": experiment.mode,
        "seed": experiment.seed,
        "first_trial": experiment.first_trial,
        "trials": len(records),
    }
    if experiment.mode == "order-scan":
        rows = [row for record in records for row in record["order_scan"]]
        summary["order_scan"] = summarize_order_scan(experiment, rows)
    else:
        rows = [row for record in records for row in record["scatter"]]
        summary["groups"] = summarize_scatter(experiment, rows)
    return summary


def build_tables(experiment: ExperimentConfig, records: Sequence[Dict[str, Any]]) -> Dict[str, str]:
    """File name -> CSV text, rows ordered by trial then layout then sigma."""
    if experiment.mode == "order-scan":
        rows = [row for record in records for row in record["order_scan"]]
        return {ORDER_SCAN_FILE: _csv_text(ORDER_SCAN_COLUMNS, rows)}
    return {
        SCATTER_FILE: _csv_text(SCATTER_COLUMNS, [row for record in records for row in record["scatter"]]),
        TRACE_FILE: _csv_text(TRACE_COLUMNS, [row for record in records for row in record["trace"]]),
    }


@activity.defn
async def write_experiment_outputs(input: WriteOutputsInput) -> ExperimentOutputs:
    """
    Assemble staged trial rows into the output tables and summary.

    Staging files are deleted only after every output has been written, so
    a retried execution finds them again. Output files are replaced
    atomically; on failure a PARTIAL marker is left in the output directory.

    Raises:
        ApplicationError: Non-retryable if a staging file is missing or
            corrupt, or an output can't be written
    """
    experiment = input.experiment
    out_dir = experiment.out_dir
    file_manager = FileManager(input.staging_dir, input.run_id)

    try:
        records = [await file_manager.read(index) for index in experiment.trial_indices]
    except (OSError, ValueError) as e:
        # Non-retryable: staged trial missing or corrupt (data loss)
        write_partial_marker(out_dir, f"staged trials unreadable: {e}")
        raise ApplicationError(
            f"Failed to load staged trials for run {input.run_id}",
            type=STORAGE_FAILURE,
            non_retryable=True,
        ) from e

    outputs = build_tables(experiment, records)
    outputs[SUMMARY_FILE] = json.dumps(build_summary(experiment, records), indent=2, sort_keys=True) + "\n"

    try:
        await aiofiles.os.makedirs(out_dir, exist_ok=True)
        for name, text in outputs.items():
            await write_text_atomic(os.path.join(out_dir, name), text)
    except OSError as e:
        write_partial_marker(out_dir, f"writing outputs failed: {e}")
        raise ApplicationError(
            f"Failed to write experiment outputs to {out_dir}",
            type=STORAGE_FAILURE,
            non_retryable=True,
        ) from e

    # a marker left by an earlier failed run no longer applies
    try:
        await aiofiles.os.remove(os.path.join(out_dir, PARTIAL_MARKER))
    except FileNotFoundError:
        pass

    for index in experiment.trial_indices:
        await file_manager.delete(index)

    activity.logger.info(f"Wrote {len(outputs)} files for {len(records)} trials to {out_dir}")
    return ExperimentOutputs(out_dir=out_dir, files=tuple(outputs), trials=len(records))
