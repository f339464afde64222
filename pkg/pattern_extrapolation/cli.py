"""
Command-line interface for pattern simulation, extrapolation and experiments.

Usage:
    python -m pattern_extrapolation.cli simulate --model rect --rows 1 --cols 1 --directions 0,0
    python -m pattern_extrapolation.cli extrapolate --model horn --pattern measured.json --out fit.json
    python -m pattern_extrapolation.cli experiment study.toml --out results/
    python -m pattern_extrapolation.cli experiment study.toml --temporal
    python -m pattern_extrapolation.cli order-scan --pattern measured.json --rows 1:5 --cols 1:5
    python -m pattern_extrapolation.cli min-samples --model horn --kind mag

Directions on the command line are "azimuth,elevation" pairs in degrees,
separated by semicolons; near-field positions are "x,y,z" triples in
wavelengths. Pattern files store radians.

Exit statuses: 0 success, 1 I/O failure, 2 malformed input (the message
names the offending field), 3 numerical failure.
"""

import argparse
import asyncio
import csv
import dataclasses
import io
import json
import logging
import math
import os
import sys
import uuid
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from temporalio.client import Client
from temporalio.exceptions import ApplicationError

from pattern_extrapolation.activities import NUMERICAL_FAILURE
from pattern_extrapolation.config import (
    TASK_QUEUE,
    TEMPORAL_HOST,
    ConfigError,
    load_experiment_config,
    staging_dir,
)
from pattern_extrapolation.core import (
    DesignSpaceModel,
    MeasurementKind,
    SamplePoint,
    SampledPattern,
    excitation_array,
    min_sample_count,
    to_kind,
)
from pattern_extrapolation.designs import MODEL_FAMILIES, build_model
from pattern_extrapolation.metrics import OrderScanResult, model_order_scan
from pattern_extrapolation.models import ExperimentConfig, ExperimentInput, ExperimentOutputs
from pattern_extrapolation.runner import run_experiment_async
from pattern_extrapolation.solver import ExcitationConstraint, GridScheme, SolverParams, extrapolate
from pattern_extrapolation.storage import (
    PatternFileError,
    load_pattern,
    pattern_to_record,
    result_to_record,
    write_text_atomic,
)
from pattern_extrapolation.workflows import MonteCarloExperiment


EXIT_OK = 0
EXIT_IO = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


# Argument parsing helpers
# ------------------------

def _split(text: str, separator: str) -> List[str]:
    return [part.strip() for part in text.split(separator) if part.strip()]


def parse_floats(text: str, field: str) -> List[float]:
    try:
        values = [float(part) for part in _split(text, ",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", field) from None
    if not values or not all(math.isfinite(v) for v in values):
        raise ConfigError(f"expected finite numbers, got {text!r}", field)
    return values


def parse_complex_list(text: str, field: str) -> List[complex]:
    """Comma-separated complex numbers in Python syntax (1+0j, -0.5j, 2)."""
    try:
        values = [complex(part.replace(" ", "")) for part in _split(text, ",")]
    except ValueError:
        raise ConfigError(f"expected comma-separated complex numbers, got {text!r}", field) from None
    if not values:
        raise ConfigError("expected at least one value", field)
    return values


def parse_directions(text: str) -> List[SamplePoint]:
    """ "az,el;az,el" in degrees."""
    points = []
    for index, pair in enumerate(_split(text, ";")):
        values = parse_floats(pair, f"--directions[{index}]")
        if len(values) != 2:
            raise ConfigError(f"expected azimuth,elevation, got {pair!r}", f"--directions[{index}]")
        try:
            points.append(SamplePoint.far(math.radians(values[0]), math.radians(values[1])))
        except ValueError as e:
            raise ConfigError(str(e), f"--directions[{index}]") from e
    if not points:
        raise ConfigError("expected at least one direction", "--directions")
    return points


def parse_positions(text: str) -> List[SamplePoint]:
    """ "x,y,z;x,y,z" in wavelengths."""
    points = []
    for index, triple in enumerate(_split(text, ";")):
        values = parse_floats(triple, f"--positions[{index}]")
        if len(values) != 3:
            raise ConfigError(f"expected x,y,z, got {triple!r}", f"--positions[{index}]")
        points.append(SamplePoint.near(*values))
    if not points:
        raise ConfigError("expected at least one position", "--positions")
    return points


def parse_range(text: str, field: str) -> range:
    """ "lo:hi" inclusive, or a single integer."""
    parts = text.split(":")
    try:
        lo, hi = (int(parts[0]), int(parts[-1])) if len(parts) <= 2 else (None, None)
    except ValueError:
        lo = hi = None
    if lo is None or not 1 <= lo <= hi:
        raise ConfigError(f"expected lo:hi with 1 <= lo <= hi, got {text!r}", field)
    return range(lo, hi + 1)


def format_value(value: Any, kind: MeasurementKind) -> str:
    """Compact text form: complex values as 1+0i, magnitudes as plain numbers."""
    if kind is MeasurementKind.COMPLEX_FIELD:
        value = complex(value)
        # normalize negative zeros
        re, im = value.real + 0.0, value.imag + 0.0
        return f"{re:.10g}{im:+.10g}i"
    return f"{float(np.real(value)):.10g}"


def _model_from_args(args: argparse.Namespace) -> DesignSpaceModel:
    try:
        return build_model(args.model, args.rows, args.cols, args.elements)
    except ValueError as e:
        raise ConfigError(str(e), "--model") from e


def _kind_from_args(args: argparse.Namespace, default: MeasurementKind) -> MeasurementKind:
    return MeasurementKind(args.kind) if args.kind else default


def _solver_params(args: argparse.Namespace) -> SolverParams:
    try:
        return SolverParams(
            max_iterations=args.iterations,
            restarts=args.restarts,
            grid_scheme=GridScheme(args.scheme) if args.scheme else None,
            excitation_constraint=ExcitationConstraint(args.constraint),
        )
    except ValueError as e:
        raise ConfigError(str(e), "solver") from e


async def _emit(text: str, out: Optional[str]) -> None:
    if out:
        await write_text_atomic(out, text)
    else:
        sys.stdout.write(text)


def _csv(rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerows(rows)
    return buffer.getvalue()


def _pattern_csv(points: Sequence[SamplePoint], values: Sequence[Any], kind: MeasurementKind, near_field: bool) -> str:
    rows: List[List[Any]] = []
    for point, value in zip(points, values):
        if point.direction is not None:
            where = [math.degrees(point.direction.azimuth), math.degrees(point.direction.elevation)]
        else:
            where = list(point.position)
        rows.append([*where, format_value(value, kind)])
    header = ["x", "y", "z"] if near_field else ["azimuth_deg", "elevation_deg"]
    return _csv([header + ["value"], *rows])


def _check_points_match(model: DesignSpaceModel, points: Sequence[SamplePoint], field: str) -> None:
    """Near-field models need positions, far-field models need directions."""
    for index, point in enumerate(points):
        if (point.position is not None) != model.near_field:
            wanted = "near-field positions" if model.near_field else "far-field directions"
            raise ConfigError(f"{model.name} is evaluated at {wanted}; point {index} is not one", field)


# Subcommands
# -----------

async def cmd_simulate(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    kind = _kind_from_args(args, MeasurementKind.COMPLEX_FIELD)

    if args.config:
        config = np.array(parse_floats(args.config, "--config"))
    else:
        config = 0.5 * (model.lower_bounds + model.upper_bounds)
    if args.excitation:
        excitation = np.array(parse_complex_list(args.excitation, "--excitation"))
    else:
        excitation = np.ones(model.excitation_dim, dtype=complex)

    if model.near_field:
        if not args.positions:
            raise ConfigError(f"{model.name} is sampled in the near field and needs positions", "--positions")
        points = parse_positions(args.positions)
    else:
        points = parse_directions(args.directions)

    try:
        config = model.check_config(config)
    except ValueError as e:
        raise ConfigError(str(e), "--config") from e
    try:
        excitation = excitation_array(excitation, model.excitation_dim)
    except ValueError as e:
        raise ConfigError(str(e), "--excitation") from e

    values = to_kind(model.forward(config, excitation, points), kind)

    if args.format == "json":
        pattern = SampledPattern(points=tuple(points), values=tuple(values), kind=kind)
        await _emit(json.dumps(pattern_to_record(pattern), indent=2) + "\n", args.out)
    elif args.format == "csv":
        await _emit(_pattern_csv(points, values, kind, model.near_field), args.out)
    else:
        await _emit("".join(format_value(v, kind) + "\n" for v in values), args.out)
    return EXIT_OK


async def cmd_extrapolate(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    observed = await load_pattern(args.pattern)
    _check_points_match(model, observed.points, "points")

    kind = _kind_from_args(args, observed.kind)
    if kind is not observed.kind:
        if observed.kind is not MeasurementKind.COMPLEX_FIELD:
            raise ConfigError(f"cannot convert {observed.kind.value} data to {kind.value}", "--kind")
        observed = SampledPattern(
            points=observed.points,
            values=tuple(to_kind(observed.value_array(), kind)),
            kind=kind,
        )

    queries = observed.points
    if args.queries:
        queries = (await load_pattern(args.queries)).points
        _check_points_match(model, queries, "points")
    result = extrapolate(model, observed, queries, _solver_params(args), args.seed or 0)
    if args.format == "csv":
        text = _pattern_csv(queries, result.predicted, kind, model.near_field)
    else:
        text = json.dumps(result_to_record(model, result, kind, queries), indent=2) + "\n"

    if args.out:
        await write_text_atomic(args.out, text)
        print("=" * 60)
        print("Extrapolation Result")
        print("=" * 60)
        print(f"Model          : {model.name}")
        print(f"Observations   : {len(observed)} ({kind.value})")
        print(f"Residual       : {result.residual:.6g}")
        print(f"Iterations     : {result.iterations_used} (restart {result.restart})")
        print(f"Converged      : {'yes' if result.converged else 'no'}")
        if result.undersampled:
            print(f"Undersampled   : fewer than {min_sample_count(model, kind)} samples")
        print(f"Written to     : {args.out}")
        print("=" * 60)
    else:
        sys.stdout.write(text)
    return EXIT_OK


async def _submit_experiment(config: ExperimentConfig) -> ExperimentOutputs:
    client = await Client.connect(TEMPORAL_HOST)
    run_id = str(uuid.uuid4())
    print(f"Starting workflow execution...")
    print(f"  Run ID: {run_id}")
    print(f"  Task queue: {TASK_QUEUE}")
    print()
    return await client.execute_workflow(
        MonteCarloExperiment.run,
        ExperimentInput(run_id=run_id, experiment=config, staging_dir=staging_dir()),
        id=run_id,
        task_queue=TASK_QUEUE,
    )


async def cmd_experiment(args: argparse.Namespace) -> int:
    overrides: Dict[str, Any] = {
        "seed": args.seed,
        "out.dir": args.out,
        "trials": args.trials,
        "first_trial": args.first_trial,
        "workers": args.workers,
    }
    if args.kind:
        overrides["measurement.kind"] = args.kind
    config = load_experiment_config(args.config, overrides)

    if args.temporal:
        # workers resolve paths against their own working directory
        config = dataclasses.replace(config, out_dir=os.path.abspath(config.out_dir))
        outputs = await _submit_experiment(config)
    else:
        outputs = await run_experiment_async(config)

    print("=" * 60)
    print("Experiment Result")
    print("=" * 60)
    print(f"Model      : {config.family} ({config.mode})")
    print(f"Trials     : {outputs.trials}")
    print(f"Output dir : {outputs.out_dir}")
    for name in outputs.files:
        print(f"  - {name}")
    print("=" * 60)
    return EXIT_OK


def _order_scan_text(scan: OrderScanResult, fmt: Optional[str]) -> str:
    if fmt == "json":
        record = {
            "entries": [dataclasses.asdict(entry) for entry in scan.entries],
            "selected": list(scan.selected),
        }
        return json.dumps(record, indent=2) + "\n"
    rows = [["rows", "cols", "min_residual", "selected"]]
    for entry in scan.entries:
        selected = (entry.rows, entry.cols) == scan.selected
        rows.append([entry.rows, entry.cols, repr(entry.min_residual), "true" if selected else "false"])
    return _csv(rows)


async def cmd_order_scan(args: argparse.Namespace) -> int:
    observed = await load_pattern(args.pattern)
    scan = await asyncio.to_thread(
        model_order_scan,
        observed,
        parse_range(args.rows, "--rows"),
        parse_range(args.cols, "--cols"),
        _solver_params(args),
        args.seed or 0,
        args.workers,
    )
    await _emit(_order_scan_text(scan, args.format), args.out)
    if args.out:
        rows, cols = scan.selected
        print(f"Selected shape: {rows} rows x {cols} cols (table written to {args.out})")
    return EXIT_OK


async def cmd_min_samples(args: argparse.Namespace) -> int:
    model = _model_from_args(args)
    kind = _kind_from_args(args, MeasurementKind.COMPLEX_FIELD)
    print(min_sample_count(model, kind))
    return EXIT_OK


# Parser
# ------

def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="Random seed (default: 0, or the config's seed)")
    parser.add_argument("--out", default=None, help="Output file (directory for experiment)")
    parser.add_argument("--format", choices=("csv", "json"), default=None, help="Output format")
    parser.add_argument(
        "--kind",
        choices=[kind.value for kind in MeasurementKind],
        default=None,
        help="Measurement kind: complex field, linear magnitude or dB",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--model",
        required=True,
        choices=sorted(MODEL_FAMILIES),
        help="; ".join(f"{name}: {text}" for name, text in sorted(MODEL_FAMILIES.items())),
    )
    parser.add_argument("--rows", type=int, default=None, help="Rows of a rect array")
    parser.add_argument("--cols", type=int, default=None, help="Columns of a rect array")
    parser.add_argument("--elements", type=int, default=None, help="Elements of a general array")


def _add_solver(parser: argparse.ArgumentParser) -> None:
    defaults = SolverParams()
    parser.add_argument("--iterations", type=int, default=defaults.max_iterations)
    parser.add_argument("--restarts", type=int, default=defaults.restarts)
    parser.add_argument("--scheme", choices=[s.value for s in GridScheme], default=None)
    parser.add_argument(
        "--constraint",
        choices=[c.value for c in ExcitationConstraint],
        default=defaults.excitation_constraint.value,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pattern-extrapolation",
        description="Knowledge-based antenna pattern extrapolation",
        epilog="Example: python -m pattern_extrapolation.cli min-samples --model horn --kind mag",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser("simulate", help="Evaluate a forward model and print its values")
    _add_model(simulate)
    simulate.add_argument("--config", help="Comma-separated configuration (default: middle of the bounds)")
    simulate.add_argument("--excitation", help="Comma-separated complex excitation (default: all ones)")
    simulate.add_argument("--directions", default="0,0", help="az,el pairs in degrees, ';'-separated")
    simulate.add_argument("--positions", help="x,y,z near-field positions, ';'-separated")
    _add_common(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    extrap = subparsers.add_parser("extrapolate", help="Fit a design to a pattern file")
    _add_model(extrap)
    extrap.add_argument("--pattern", required=True, help="Sampled pattern JSON file")
    extrap.add_argument("--queries", help="Pattern JSON file whose points are predicted (default: the observed points)")
    _add_solver(extrap)
    _add_common(extrap)
    extrap.set_defaults(handler=cmd_extrapolate)

    experiment = subparsers.add_parser("experiment", help="Run a Monte Carlo study from a TOML config")
    experiment.add_argument("config", help="Experiment TOML file")
    experiment.add_argument("--trials", type=int, default=None, help="Override the trial count")
    experiment.add_argument("--first-trial", type=int, default=None, help="Index of the first trial to run")
    experiment.add_argument("--workers", type=int, default=None, help="Trials run concurrently")
    experiment.add_argument("--temporal", action="store_true", help="Submit to a Temporal server instead of running in-process")
    _add_common(experiment)
    experiment.set_defaults(handler=cmd_experiment)

    scan = subparsers.add_parser("order-scan", help="Pick the rect-array shape from residuals")
    scan.add_argument("--pattern", required=True, help="Sampled pattern JSON file")
    scan.add_argument("--rows", default="1:5", help="Row range lo:hi (default: 1:5)")
    scan.add_argument("--cols", default="1:5", help="Column range lo:hi (default: 1:5)")
    scan.add_argument("--workers", type=int, default=1, help="Shapes fitted concurrently")
    _add_solver(scan)
    _add_common(scan)
    scan.set_defaults(handler=cmd_order_scan)

    min_samples = subparsers.add_parser("min-samples", help="Print the minimum sample count of a model")
    _add_model(min_samples)
    _add_common(min_samples)
    min_samples.set_defaults(handler=cmd_min_samples)

    return parser


def _failure_type(error: BaseException) -> Optional[str]:
    """ApplicationError type anywhere in a Temporal failure's cause chain."""
    seen = set()
    while error is not None and id(error) not in seen:
        seen.add(id(error))
        if isinstance(error, ApplicationError):
            return error.type
        error = getattr(error, "cause", None) or error.__cause__
    return None


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler: Callable[[argparse.Namespace], Any] = args.handler

    try:
        return asyncio.run(handler(args))
    except (ConfigError, PatternFileError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (np.linalg.LinAlgError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:
        failure = _failure_type(e)
        if failure is None:
            raise
        print(f"experiment failed: {e}", file=sys.stderr)
        return EXIT_NUMERICAL if failure == NUMERICAL_FAILURE else EXIT_IO


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
