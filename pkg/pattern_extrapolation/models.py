"""
Data models for experiment workflow execution and activity parameters.

Activities and workflows take single dataclass parameters so optional
fields can be added later without breaking running executions. Fields are
plain strings and numbers (no enums or unions) so Temporal's JSON payload
converter round-trips them unchanged; they are turned into library types
(SolverParams, SamplingSpec, ...) inside the activities.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

from pattern_extrapolation.core import MeasurementKind
from pattern_extrapolation.metrics import ERROR_UNITS
from pattern_extrapolation.sampling import (
    AzimuthBlocks,
    AzimuthOnly,
    PrincipalPlanes,
    RandomSphere,
    SamplingSpec,
)
from pattern_extrapolation.solver import ExcitationConstraint, GridScheme, SolverParams

EXPERIMENT_FAMILIES = ("rect", "horn", "dish")
EXPERIMENT_MODES = ("scatter", "order-scan")
SAMPLING_KINDS = ("azimuth", "principal", "blocks", "random")


# Experiment Configuration
# ------------------------

@dataclass(frozen=True)
class SamplingLayout:
    """
    One sampling layout of an experiment.

    Attributes:
        kind: "azimuth", "principal", "blocks" or "random"
        count: Sample count for azimuth-only and random layouts
        az_count: Azimuth-cut samples of the principal-plane layout
        el_count: Elevation-cut samples of the principal-plane layout
        block_count: Number of contiguous azimuth blocks
        block_len: Samples per block
        max_elevation_deg: Upper bound of each block's random elevation
    """
    kind: str
    count: int = 200
    az_count: int = 360
    el_count: int = 181
    block_count: int = 8
    block_len: int = 25
    max_elevation_deg: float = 10.0

    def __post_init__(self) -> None:
        if self.kind not in SAMPLING_KINDS:
            raise ValueError(f"sampling kind must be one of {SAMPLING_KINDS}, got {self.kind!r}")
        # builds and validates the spec
        self.to_spec()

    def to_spec(self) -> SamplingSpec:
        if self.kind == "azimuth":
            return AzimuthOnly(self.count)
        if self.kind == "principal":
            return PrincipalPlanes(self.az_count, self.el_count)
        if self.kind == "blocks":
            return AzimuthBlocks(self.block_count, self.block_len, math.radians(self.max_elevation_deg))
        return RandomSphere(self.count)


@dataclass(frozen=True)
class SolverSettings:
    """Serializable form of SolverParams."""
    iterations: int = 10
    restarts: int = 4
    scheme: Optional[str] = None
    constraint: str = ExcitationConstraint.UNIT_NORM.value
    decay: float = 0.7
    initial_spacing: float = 0.25
    tolerance: float = 1e-6

    def __post_init__(self) -> None:
        self.to_params()

    def to_params(self) -> SolverParams:
        return SolverParams(
            max_iterations=self.iterations,
            grid_scheme=GridScheme(self.scheme) if self.scheme else None,
            initial_spacing_frac=self.initial_spacing,
            decay=self.decay,
            restarts=self.restarts,
            excitation_constraint=ExcitationConstraint(self.constraint),
            convergence_tol=self.tolerance,
        )


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A Monte Carlo study: draw truth designs, sample, perturb, extrapolate, score.

    Attributes:
        family: Antenna family ("rect", "horn" or "dish")
        rows: Rows of the rectangular array (rect only)
        cols: Columns of the rectangular array (rect only)
        measurement_kind: "complex", "mag" or "db"
        error_units: Units of magnitude errors, "linear" or "db"; complex
            patterns are always compared as complex fields
        sampling: Sampling layouts run on every trial
        sigmas: Relative noise levels run on every layout
        trials: Number of trials
        first_trial: Index of the first trial; seeds depend only on the index
        seed: Master seed
        solver: Solver settings
        dense_step_deg: Truth lattice spacing in degrees
        mode: "scatter" (residual vs. total error) or "order-scan"
        order_rows: Inclusive row range scanned in order-scan mode
        order_cols: Inclusive column range scanned in order-scan mode
        out_dir: Output directory
        workers: Trials run concurrently
    """
    family: str = "rect"
    rows: int = 3
    cols: int = 3
    measurement_kind: str = MeasurementKind.COMPLEX_FIELD.value
    error_units: str = "linear"
    sampling: Tuple[SamplingLayout, ...] = (SamplingLayout(kind="random"),)
    sigmas: Tuple[float, ...] = (0.0, 0.01, 0.03, 0.1)
    trials: int = 100
    first_trial: int = 0
    seed: int = 0
    solver: SolverSettings = field(default_factory=SolverSettings)
    dense_step_deg: float = 2.0
    mode: str = "scatter"
    order_rows: Tuple[int, int] = (1, 5)
    order_cols: Tuple[int, int] = (1, 5)
    out_dir: str = "results"
    workers: int = 4

    def __post_init__(self) -> None:
        if self.family not in EXPERIMENT_FAMILIES:
            raise ValueError(f"family must be one of {EXPERIMENT_FAMILIES}, got {self.family!r}")
        if self.mode not in EXPERIMENT_MODES:
            raise ValueError(f"mode must be one of {EXPERIMENT_MODES}, got {self.mode!r}")
        if self.mode == "order-scan" and self.family != "rect":
            raise ValueError("order-scan mode needs the rect family")
        MeasurementKind(self.measurement_kind)
        if self.error_units not in ERROR_UNITS:
            raise ValueError(f"error_units must be one of {ERROR_UNITS}, got {self.error_units!r}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"array shape must be positive, got {self.rows}x{self.cols}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.first_trial < 0:
            raise ValueError(f"first_trial must be nonnegative, got {self.first_trial}")
        if self.seed < 0:
            raise ValueError(f"seed must be nonnegative, got {self.seed}")
        if not self.sampling:
            raise ValueError("at least one sampling layout is required")
        kinds = [layout.kind for layout in self.sampling]
        if len(set(kinds)) != len(kinds):
            raise ValueError(f"sampling layouts must have distinct kinds, got {kinds}")
        if not self.sigmas or any(s < 0.0 for s in self.sigmas):
            raise ValueError(f"sigmas must be a nonempty list of nonnegative values, got {self.sigmas}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        for name in ("order_rows", "order_cols"):
            lo, hi = getattr(self, name)
            if not 1 <= lo <= hi:
                raise ValueError(f"{name} must be an inclusive range [lo, hi] with 1 <= lo <= hi")
        object.__setattr__(self, "sampling", tuple(self.sampling))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))

    @property
    def kind(self) -> MeasurementKind:
        return MeasurementKind(self.measurement_kind)

    @property
    def trial_indices(self) -> Tuple[int, ...]:
        return tuple(range(self.first_trial, self.first_trial + self.trials))


# Activity Parameters
# -------------------

@dataclass(frozen=True)
class TrialInput:
    """
    Input parameters for the run_trial activity.

    Attributes:
        run_id: Unique experiment execution ID (for staging file naming)
        experiment: Experiment configuration
        trial_index: Trial to run
        staging_dir: Directory for per-trial staging files
    """
    run_id: str
    experiment: ExperimentConfig
    trial_index: int
    staging_dir: str


@dataclass(frozen=True)
class WriteOutputsInput:
    """
    Input parameters for the write_experiment_outputs activity.

    Attributes:
        run_id: Unique experiment execution ID (for staging file naming)
        experiment: Experiment configuration
        staging_dir: Directory holding the per-trial staging files
    """
    run_id: str
    experiment: ExperimentConfig
    staging_dir: str


# Activity Return Types
# ---------------------

@dataclass(frozen=True)
class TrialSummary:
    """
    Metadata about one finished trial.

    Returned by run_trial so bulk rows stay in the staging file instead of
    Temporal's event history.

    Attributes:
        trial_index: Trial that finished
        rows_written: Data rows persisted for the trial
        best_residual: Smallest final residual over the trial's runs
    """
    trial_index: int
    rows_written: int
    best_residual: float


@dataclass(frozen=True)
class ExperimentOutputs:
    """
    Files written by write_experiment_outputs.

    Attributes:
        out_dir: Output directory
        files: Names of the files written, relative to out_dir
        trials: Number of trials assembled
    """
    out_dir: str
    files: Tuple[str, ...]
    trials: int


# Workflow Parameters
# -------------------

@dataclass(frozen=True)
class ExperimentInput:
    """
    Input parameters for the MonteCarloExperiment workflow.

    Attributes:
        run_id: Unique experiment execution ID (for staging file naming)
        experiment: Experiment configuration
        staging_dir: Directory for per-trial staging files
    """
    run_id: str
    experiment: ExperimentConfig
    staging_dir: str
