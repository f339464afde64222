"""
Performance measures for extrapolated patterns.

Total error needs the simulated truth and is only available in simulation;
residual error is what a real measurement campaign sees. The scatter
summary relates the two, and the order scan uses residuals alone to pick
the number of rows and columns of a rectangular array.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import spearmanr

from pattern_extrapolation.core import (
    ConfigurationPoint,
    DesignSpaceModel,
    Excitation,
    MeasurementKind,
    PackedPoints,
    SampledPattern,
    db_to_linear,
    excitation_array,
    kind_residual,
    to_kind,
)
from pattern_extrapolation.designs import rect_array_model
from pattern_extrapolation.solver import SolverParams, extrapolate

DEFAULT_LATTICE_STEP_DEG = 2.0
QUANTILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9)
SELECTION_FACTOR = 2.0
SELECTION_ABS_TOL = 1e-9
ERROR_UNITS = ("linear", "db")


@dataclass(frozen=True, eq=False)
class DensePattern:
    """
    Pattern on a regular azimuth x elevation lattice.

    Attributes:
        azimuths: Strictly increasing azimuths (radians)
        elevations: Strictly increasing elevations (radians)
        values: Matrix of shape (len(elevations), len(azimuths))
        kind: Measurement kind of the values
    """
    azimuths: np.ndarray
    elevations: np.ndarray
    values: np.ndarray
    kind: MeasurementKind

    def __post_init__(self) -> None:
        for name in ("azimuths", "elevations"):
            axis = np.asarray(getattr(self, name), dtype=float)
            if axis.ndim != 1 or axis.size == 0 or np.any(np.diff(axis) <= 0.0):
                raise ValueError(f"{name} must be a nonempty strictly increasing vector")
            object.__setattr__(self, name, axis)
        values = np.asarray(self.values)
        if values.shape != (self.elevations.size, self.azimuths.size):
            raise ValueError(
                f"values shape {values.shape} does not match lattice "
                f"({self.elevations.size}, {self.azimuths.size})"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", MeasurementKind(self.kind))


def dense_lattice(step_deg: float = DEFAULT_LATTICE_STEP_DEG) -> Tuple[np.ndarray, np.ndarray]:
    """Full-sphere lattice: azimuths in [-pi, pi), elevations pole to pole inclusive."""
    az_count = int(round(360.0 / step_deg))
    el_count = int(round(180.0 / step_deg))
    if az_count < 1 or el_count < 1 or not math.isclose(az_count * step_deg, 360.0):
        raise ValueError(f"lattice step must divide 360 degrees, got {step_deg}")
    azimuths = -math.pi + 2.0 * math.pi * np.arange(az_count) / az_count
    elevations = np.linspace(-math.pi / 2, math.pi / 2, el_count + 1)
    return azimuths, elevations


def lattice_points(azimuths: np.ndarray, elevations: np.ndarray) -> PackedPoints:
    """Lattice directions in row-major (elevation, azimuth) order."""
    az_grid, el_grid = np.meshgrid(azimuths, elevations)
    return PackedPoints(azimuth=az_grid.ravel(), elevation=el_grid.ravel())


def dense_pattern(
    model: DesignSpaceModel,
    config: Union[ConfigurationPoint, Sequence[float]],
    excitation: Union[Excitation, Sequence[complex]],
    kind: MeasurementKind = MeasurementKind.COMPLEX_FIELD,
    step_deg: float = DEFAULT_LATTICE_STEP_DEG,
) -> DensePattern:
    """Evaluate a far-field design on the dense lattice."""
    azimuths, elevations = dense_lattice(step_deg)
    values = model.forward(
        model.check_config(config),
        excitation_array(excitation, model.excitation_dim),
        lattice_points(azimuths, elevations),
    )
    return DensePattern(
        azimuths=azimuths,
        elevations=elevations,
        values=to_kind(values, kind).reshape(elevations.size, azimuths.size),
        kind=kind,
    )


def total_error(predicted: DensePattern, truth: DensePattern) -> float:
    """RMS of value differences over the lattice (modulus for complex values)."""
    if (
        predicted.kind is not truth.kind
        or not np.array_equal(predicted.azimuths, truth.azimuths)
        or not np.array_equal(predicted.elevations, truth.elevations)
    ):
        raise ValueError("predicted and truth patterns must share lattice and kind")
    difference = np.abs(predicted.values - truth.values)
    return float(np.sqrt(np.mean(difference ** 2)))


def in_error_units(pattern: DensePattern, units: str = "linear") -> DensePattern:
    """
    Re-express a magnitude pattern in linear or dB units before scoring.

    Complex patterns pass through unchanged.
    """
    if units not in ERROR_UNITS:
        raise ValueError(f"units must be one of {ERROR_UNITS}, got {units!r}")
    if pattern.kind is MeasurementKind.COMPLEX_FIELD:
        return pattern
    target = MeasurementKind.MAGNITUDE_LINEAR if units == "linear" else MeasurementKind.MAGNITUDE_DB
    if pattern.kind is target:
        return pattern
    values = db_to_linear(pattern.values) if pattern.kind is MeasurementKind.MAGNITUDE_DB else pattern.values
    return DensePattern(
        azimuths=pattern.azimuths,
        elevations=pattern.elevations,
        values=to_kind(values, target),
        kind=target,
    )


def residual_in_units(fitted: np.ndarray, observed: SampledPattern) -> Tuple[float, float]:
    """
    (linear, dB) misfit of fitted complex field values against the samples.

    The linear misfit compares complex fields when the samples are complex
    and magnitudes otherwise; the dB misfit always compares magnitudes.
    """
    values = observed.value_array()
    if observed.kind is MeasurementKind.MAGNITUDE_DB:
        linear = db_to_linear(values)
        db = values.astype(float)
    else:
        linear = values
        db = to_kind(np.abs(values), MeasurementKind.MAGNITUDE_DB)
    linear_kind = (
        MeasurementKind.COMPLEX_FIELD
        if observed.kind is MeasurementKind.COMPLEX_FIELD
        else MeasurementKind.MAGNITUDE_LINEAR
    )
    return (
        kind_residual(fitted, linear, linear_kind),
        kind_residual(fitted, db, MeasurementKind.MAGNITUDE_DB),
    )


@dataclass(frozen=True)
class ScatterSummary:
    """
    Relationship between residual and total error across trials.

    Attributes:
        count: Number of trials
        spearman_rho: Rank correlation, None when either axis is constant
        residual_quantiles: Quantile level -> residual
        total_error_quantiles: Quantile level -> total error
    """
    count: int
    spearman_rho: Optional[float]
    residual_quantiles: Dict[float, float] = field(default_factory=dict)
    total_error_quantiles: Dict[float, float] = field(default_factory=dict)


def residual_total_scatter(trials: Sequence[Tuple[float, float]]) -> ScatterSummary:
    """Spearman rank correlation and per-axis quantiles of (residual, total_error) pairs."""
    if len(trials) < 3:
        raise ValueError(f"scatter summary needs at least 3 trials, got {len(trials)}")
    pairs = np.asarray(trials, dtype=float)
    residuals, totals = pairs[:, 0], pairs[:, 1]

    rho: Optional[float] = None
    if np.ptp(residuals) > 0.0 and np.ptp(totals) > 0.0:
        value = float(spearmanr(residuals, totals)[0])
        rho = value if math.isfinite(value) else None

    return ScatterSummary(
        count=len(trials),
        spearman_rho=rho,
        residual_quantiles={q: float(np.quantile(residuals, q)) for q in QUANTILE_LEVELS},
        total_error_quantiles={q: float(np.quantile(totals, q)) for q in QUANTILE_LEVELS},
    )


def ambiguity_fraction(
    trials: Sequence[Tuple[float, float]],
    reference: Sequence[Tuple[float, float]],
) -> float:
    """
    Fraction of trials that fit well but extrapolate badly: residual below
    the reference residual median while total error exceeds the reference
    total-error median. Random sampling is the usual reference.
    """
    if not trials or not reference:
        raise ValueError("ambiguity fraction needs nonempty trials and reference")
    ref = np.asarray(reference, dtype=float)
    residual_median = float(np.median(ref[:, 0]))
    total_median = float(np.median(ref[:, 1]))
    pairs = np.asarray(trials, dtype=float)
    flagged = (pairs[:, 0] < residual_median) & (pairs[:, 1] > total_median)
    return float(np.mean(flagged))


@dataclass(frozen=True)
class OrderScanEntry:
    rows: int
    cols: int
    min_residual: float


@dataclass(frozen=True)
class OrderScanResult:
    """
    Attributes:
        entries: One entry per scanned shape, rows-major
        selected: Chosen (rows, cols)
    """
    entries: Tuple[OrderScanEntry, ...]
    selected: Tuple[int, int]

    def residual(self, rows: int, cols: int) -> float:
        for entry in self.entries:
            if (entry.rows, entry.cols) == (rows, cols):
                return entry.min_residual
        raise KeyError((rows, cols))


def select_order(
    entries: Sequence[OrderScanEntry],
    eps_abs: float = 0.0,
    factor: float = SELECTION_FACTOR,
) -> Tuple[int, int]:
    """
    The smallest array whose residual is within `factor` of the best:
    residual <= factor * (min residual + eps_abs), then fewest elements,
    then smallest residual, then fewest rows.
    """
    if not entries:
        raise ValueError("no shapes to select from")
    threshold = factor * (min(e.min_residual for e in entries) + eps_abs)
    eligible = [e for e in entries if e.min_residual <= threshold]
    chosen = min(eligible, key=lambda e: (e.rows * e.cols, e.min_residual, e.rows, e.cols))
    return chosen.rows, chosen.cols


def model_order_scan(
    observed: SampledPattern,
    rows_range: Sequence[int],
    cols_range: Sequence[int],
    params: SolverParams = SolverParams(),
    rng_seed: int = 0,
    max_workers: int = 1,
) -> OrderScanResult:
    """
    Fit rectangular arrays of every shape in rows_range x cols_range and pick
    the smallest shape on the residual plateau.
    """
    shapes: List[Tuple[int, int]] = [(m, n) for m in rows_range for n in cols_range]
    if not shapes:
        raise ValueError("rows_range and cols_range must be nonempty")

    def fit(shape: Tuple[int, int]) -> OrderScanEntry:
        rows, cols = shape
        result = extrapolate(rect_array_model(rows, cols), observed, (), params, rng_seed)
        return OrderScanEntry(rows=rows, cols=cols, min_residual=result.residual)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            entries = tuple(pool.map(fit, shapes))
    else:
        entries = tuple(fit(shape) for shape in shapes)

    eps_abs = SELECTION_ABS_TOL * float(np.linalg.norm(observed.value_array()))
    return OrderScanResult(entries=entries, selected=select_order(entries, eps_abs))
