"""
Configuration for experiments and the Temporal processes.

Experiment studies are described by TOML files; keys may be written as
tables or flat dotted keys:

    trials = 100
    seed = 7

    [model]
    family = "rect"
    rows = 3
    cols = 3

    [sampling]
    kind = ["random", "principal"]

    [noise]
    sigmas = [0.0, 0.01, 0.03, 0.1]

Process-level settings (Temporal connection, worker pool size, staging
directory) come from the environment, with a .env file loaded on import.
"""

import os
import tempfile

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import load_dotenv

from pattern_extrapolation.models import (
    SAMPLING_KINDS,
    ExperimentConfig,
    SamplingLayout,
    SolverSettings,
)
from pattern_extrapolation.solver import ExcitationConstraint, GridScheme

# Load environment variables from .env file
load_dotenv()

TEMPORAL_HOST = os.environ.get("TEMPORAL_HOST", "localhost:7233")
TASK_QUEUE = os.environ.get("TEMPORAL_TASK_QUEUE", "antenna-pattern-experiments")
DEFAULT_WORKERS = 4

# Sample counts used when the config doesn't set one
DEFAULT_COUNTS = {"azimuth": 360, "random": 200}

SOLVER_SCHEMES = tuple(scheme.value for scheme in GridScheme)
SOLVER_CONSTRAINTS = tuple(constraint.value for constraint in ExcitationConstraint)

KNOWN_KEYS = frozenset({
    "model.family", "model.rows", "model.cols",
    "measurement.kind", "metrics.error_units",
    "sampling.kind", "sampling.count", "sampling.az_count", "sampling.el_count",
    "sampling.block_count", "sampling.block_len", "sampling.max_elevation_deg",
    "noise.sigmas",
    "trials", "first_trial", "seed", "mode", "workers",
    "order.rows", "order.cols",
    "dense.step_deg",
    "solver.iterations", "solver.restarts", "solver.scheme", "solver.constraint",
    "solver.decay", "solver.initial_spacing", "solver.tolerance",
    "out.dir",
})


class ConfigError(ValueError):
    """A configuration value is missing or malformed. `field` names it."""

    def __init__(self, message: str, field: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


def default_workers() -> int:
    raw = os.environ.get("EXPERIMENT_WORKERS")
    if raw is None:
        return DEFAULT_WORKERS
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", "EXPERIMENT_WORKERS") from None
    if workers < 1:
        raise ConfigError(f"must be >= 1, got {workers}", "EXPERIMENT_WORKERS")
    return workers


def staging_dir() -> str:
    return os.environ.get("EXPERIMENT_STAGING_DIR") or tempfile.gettempdir()


def _flatten(table: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


class _Reader:
    """Typed access to flat config keys; every failure names the key."""

    def __init__(self, flat: Mapping[str, Any]) -> None:
        self.flat = flat

    def int_value(self, key: str, default: int, minimum: Optional[int] = None) -> int:
        value = self.flat.get(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key)
        if minimum is not None and value < minimum:
            raise ConfigError(f"must be >= {minimum}, got {value}", key)
        return value

    def float_value(self, key: str, default: float) -> float:
        value = self.flat.get(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key)
        return float(value)

    def str_value(self, key: str, default: Optional[str]) -> Optional[str]:
        value = self.flat.get(key, default)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key)
        return value

    def str_list(self, key: str, default: List[str]) -> List[str]:
        value = self.flat.get(key, default)
        if isinstance(value, str):
            value = [value]
        if not isinstance(value, list) or not value or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"expected a string or a nonempty list of strings, got {value!r}", key)
        return value

    def float_list(self, key: str, default: Tuple[float, ...]) -> Tuple[float, ...]:
        value = self.flat.get(key, list(default))
        if not isinstance(value, list) or not value or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"expected a nonempty list of numbers, got {value!r}", key)
        return tuple(float(v) for v in value)

    def int_range(self, key: str, default: Tuple[int, int]) -> Tuple[int, int]:
        value = self.flat.get(key, list(default))
        if (
            not isinstance(value, list)
            or len(value) != 2
            or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
            or not 1 <= value[0] <= value[1]
        ):
            raise ConfigError(f"expected [lo, hi] with 1 <= lo <= hi, got {value!r}", key)
        return value[0], value[1]


def _sampling_layouts(reader: _Reader) -> Tuple[SamplingLayout, ...]:
    kinds = reader.str_list("sampling.kind", ["random"])
    layouts = []
    for kind in kinds:
        if kind not in SAMPLING_KINDS:
            raise ConfigError(f"unknown sampling kind {kind!r}; expected one of {SAMPLING_KINDS}", "sampling.kind")
        try:
            layouts.append(SamplingLayout(
                kind=kind,
                count=reader.int_value("sampling.count", DEFAULT_COUNTS.get(kind, 200), minimum=1),
                az_count=reader.int_value("sampling.az_count", 360, minimum=1),
                el_count=reader.int_value("sampling.el_count", 181, minimum=1),
                block_count=reader.int_value("sampling.block_count", 8, minimum=1),
                block_len=reader.int_value("sampling.block_len", 25, minimum=1),
                max_elevation_deg=reader.float_value("sampling.max_elevation_deg", 10.0),
            ))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(str(e), "sampling.max_elevation_deg") from e
    return tuple(layouts)


def _solver_settings(reader: _Reader) -> SolverSettings:
    defaults = SolverSettings()
    scheme = reader.str_value("solver.scheme", defaults.scheme)
    if scheme not in (None, *SOLVER_SCHEMES):
        raise ConfigError(f"expected one of {SOLVER_SCHEMES}, got {scheme!r}", "solver.scheme")
    constraint = reader.str_value("solver.constraint", defaults.constraint)
    if constraint not in SOLVER_CONSTRAINTS:
        raise ConfigError(f"expected one of {SOLVER_CONSTRAINTS}, got {constraint!r}", "solver.constraint")
    decay = reader.float_value("solver.decay", defaults.decay)
    if not 0.0 < decay < 1.0:
        raise ConfigError(f"must lie in (0, 1), got {decay}", "solver.decay")
    initial_spacing = reader.float_value("solver.initial_spacing", defaults.initial_spacing)
    if not 0.0 < initial_spacing <= 1.0:
        raise ConfigError(f"must lie in (0, 1], got {initial_spacing}", "solver.initial_spacing")
    tolerance = reader.float_value("solver.tolerance", defaults.tolerance)
    if tolerance < 0.0:
        raise ConfigError(f"must be nonnegative, got {tolerance}", "solver.tolerance")

    return SolverSettings(
        iterations=reader.int_value("solver.iterations", defaults.iterations, minimum=0),
        restarts=reader.int_value("solver.restarts", defaults.restarts, minimum=1),
        scheme=scheme,
        constraint=constraint,
        decay=decay,
        initial_spacing=initial_spacing,
        tolerance=tolerance,
    )


def parse_experiment_config(
    data: Mapping[str, Any],
    overrides: Optional[Mapping[str, Any]] = None,
) -> ExperimentConfig:
    """
    Build an ExperimentConfig from parsed TOML.

    Args:
        data: Parsed TOML document
        overrides: Flat dotted keys that take precedence (command-line flags)

    Raises:
        ConfigError: naming the first unknown or malformed key
    """
    flat = _flatten(data)
    flat.update({key: value for key, value in (overrides or {}).items() if value is not None})

    unknown = sorted(set(flat) - KNOWN_KEYS)
    if unknown:
        raise ConfigError("unknown key", unknown[0])

    reader = _Reader(flat)
    family = reader.str_value("model.family", "rect")
    kind = reader.str_value("measurement.kind", "complex")
    mode = reader.str_value("mode", "scatter")
    error_units = reader.str_value("metrics.error_units", "linear")
    for key, value, allowed in (
        ("model.family", family, ("rect", "horn", "dish")),
        ("measurement.kind", kind, ("complex", "mag", "db")),
        ("metrics.error_units", error_units, ("linear", "db")),
        ("mode", mode, ("scatter", "order-scan")),
    ):
        if value not in allowed:
            raise ConfigError(f"expected one of {allowed}, got {value!r}", key)

    sigmas = reader.float_list("noise.sigmas", (0.0, 0.01, 0.03, 0.1))
    if any(s < 0.0 for s in sigmas):
        raise ConfigError(f"noise levels must be nonnegative, got {list(sigmas)}", "noise.sigmas")
    step = reader.float_value("dense.step_deg", 2.0)
    if step <= 0.0 or abs(360.0 / step - round(360.0 / step)) > 1e-9:
        raise ConfigError(f"must divide 360 degrees, got {step}", "dense.step_deg")
    layouts = _sampling_layouts(reader)
    if len({layout.kind for layout in layouts}) != len(layouts):
        raise ConfigError("sampling kinds must be distinct", "sampling.kind")
    if mode == "order-scan" and family != "rect":
        raise ConfigError("order-scan mode needs the rect family", "mode")

    return ExperimentConfig(
        family=family,
        rows=reader.int_value("model.rows", 3, minimum=1),
        cols=reader.int_value("model.cols", 3, minimum=1),
        measurement_kind=kind,
        error_units=error_units,
        sampling=layouts,
        sigmas=sigmas,
        trials=reader.int_value("trials", 100, minimum=1),
        first_trial=reader.int_value("first_trial", 0, minimum=0),
        seed=reader.int_value("seed", 0, minimum=0),
        solver=_solver_settings(reader),
        dense_step_deg=step,
        mode=mode,
        order_rows=reader.int_range("order.rows", (1, 5)),
        order_cols=reader.int_range("order.cols", (1, 5)),
        out_dir=reader.str_value("out.dir", "results"),
        workers=reader.int_value("workers", default_workers(), minimum=1),
    )


def load_experiment_config(path: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """
    Read and validate a TOML experiment config.

    Raises:
        ConfigError: If the file is missing, not valid TOML, or has a bad key
    """
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError("config file not found", path) from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML ({e})", path) from e
    except OSError as e:
        raise ConfigError(f"cannot read config file ({e.strerror})", path) from e
    return parse_experiment_config(data, overrides)
