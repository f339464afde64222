"""
Recursive pattern extrapolation.

The pattern map is linear in the excitation, so the search is split in two:

1. A shrinking grid of candidate configurations is laid around the current
   iterate (3^d factorial points, or the 2d+1 compass stencil for
   high-dimensional configurations).
2. For every candidate the best excitation is a (unit-norm constrained)
   complex least-squares problem, solved exactly.
3. The candidate with the smallest residual becomes the next iterate.

The incumbent is always part of the grid, so the residual never increases.
Several independent random starts are run and the best is kept.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from pattern_extrapolation.core import (
    ConfigurationPoint,
    DesignSpaceModel,
    Excitation,
    MeasurementKind,
    PackedPoints,
    PointsLike,
    SampledPattern,
    db_to_linear,
    excitation_array,
    kind_residual,
    min_sample_count,
    pack_points,
    to_kind,
)

logger = logging.getLogger(__name__)

PHASE_RETRIEVAL_ITERATIONS = 5
FACTORIAL_MAX_DIM = 5
MAX_START_ATTEMPTS = 100
MAX_DIAGNOSTICS = 20

# Numerical failures that make a candidate unusable rather than fatal.
_CANDIDATE_ERRORS = (ValueError, ArithmeticError, np.linalg.LinAlgError)


class SolverFailure(ArithmeticError):
    """No candidate configuration could be evaluated."""


class GridScheme(str, Enum):
    FACTORIAL3 = "factorial3"
    COMPASS = "compass"


class ExcitationConstraint(str, Enum):
    UNIT_NORM = "unit-norm"
    UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class SolverParams:
    """
    Attributes:
        max_iterations: Grid iterations per start
        grid_scheme: Candidate stencil; None picks FACTORIAL3 for up to 5
            configuration coordinates and COMPASS above that
        initial_spacing_frac: First grid spacing as a fraction of each bound interval
        decay: Geometric spacing decay per iteration
        restarts: Independent uniformly random starts
        excitation_constraint: Constraint set for the excitation fit
        convergence_tol: Relative residual change (and relative residual
            level) that ends a start early
    """
    max_iterations: int = 10
    grid_scheme: Optional[GridScheme] = None
    initial_spacing_frac: float = 0.25
    decay: float = 0.7
    restarts: int = 4
    excitation_constraint: ExcitationConstraint = ExcitationConstraint.UNIT_NORM
    convergence_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ValueError(f"max_iterations must be nonnegative, got {self.max_iterations}")
        if not 0.0 < self.initial_spacing_frac <= 1.0:
            raise ValueError(f"initial_spacing_frac must lie in (0, 1], got {self.initial_spacing_frac}")
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must lie in (0, 1), got {self.decay}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.convergence_tol < 0.0:
            raise ValueError(f"convergence_tol must be nonnegative, got {self.convergence_tol}")
        if self.grid_scheme is not None:
            object.__setattr__(self, "grid_scheme", GridScheme(self.grid_scheme))
        object.__setattr__(self, "excitation_constraint", ExcitationConstraint(self.excitation_constraint))

    def scheme_for(self, config_dim: int) -> GridScheme:
        if self.grid_scheme is not None:
            return self.grid_scheme
        return GridScheme.FACTORIAL3 if config_dim <= FACTORIAL_MAX_DIM else GridScheme.COMPASS


@dataclass(frozen=True)
class ExtrapolationResult:
    """
    Estimated design and the pattern it predicts.

    Attributes:
        config: Estimated configuration
        excitation: Estimated excitation
        residual_history: Best residual after each iteration (entry 0 is the
            starting design); non-increasing
        predicted: Values at the query points, in the observed measurement kind
        converged: Whether a start ended on the convergence test rather than
            the iteration budget
        undersampled: Fewer observations than min_sample_count
        skipped_candidates: Candidates whose evaluation failed
        diagnostics: The first few failure messages
        restart: Index of the start that produced this result
    """
    config: ConfigurationPoint
    excitation: Excitation
    residual_history: Tuple[float, ...]
    predicted: np.ndarray = field(compare=False)
    converged: bool
    undersampled: bool = False
    skipped_candidates: int = 0
    diagnostics: Tuple[str, ...] = ()
    restart: int = 0

    @property
    def residual(self) -> float:
        return self.residual_history[-1]

    @property
    def iterations_used(self) -> int:
        return len(self.residual_history) - 1


def design_matrix(model: DesignSpaceModel, config: Union[ConfigurationPoint, Sequence[float]], points: PointsLike) -> np.ndarray:
    """K x N matrix whose column n is the pattern of unit excitation e_n."""
    return model.basis(model.check_config(config), points)


def _unit_norm_lstsq(matrix: np.ndarray, target: np.ndarray) -> np.ndarray:
    """
    argmin ||M a - p|| subject to ||a|| = 1.

    Stationarity gives (M^H M + lam I) a = M^H p. In the right singular basis
    ||a(lam)|| = ||g / (sigma^2 + lam)|| with g = V^H M^H p, which decreases
    strictly on (-sigma_min^2, inf); its unit crossing is bracketed by
    [-sigma_min^2, ||g|| - sigma_min^2]. When g has no component on the
    smallest singular direction the crossing may not exist (hard case) and
    the missing norm is made up along that direction.
    """
    n = matrix.shape[1]
    if n == 1:
        projected = matrix[:, 0].conj() @ target
        if projected == 0.0:
            return np.ones(1, dtype=complex)
        return np.array([projected / abs(projected)])

    _, singular, vh = np.linalg.svd(matrix, full_matrices=True)
    eig = np.zeros(n)
    eig[: singular.size] = singular ** 2
    g = vh @ (matrix.conj().T @ target)
    basis = vh.conj().T

    eig_min = float(eig.min())
    g_norm = float(np.linalg.norm(g))
    near = eig <= eig_min + 1e-12 * max(float(eig.max()), 1.0)
    rest = ~near

    if g_norm == 0.0 or np.all(np.abs(g[near]) <= 1e-12 * g_norm):
        coords = np.zeros(n, dtype=complex)
        coords[rest] = g[rest] / (eig[rest] - eig_min)
        rest_norm = float(np.linalg.norm(coords))
        if rest_norm <= 1.0:
            coords[np.flatnonzero(near)[0]] = math.sqrt(1.0 - rest_norm ** 2)
            return basis @ coords

    active = g != 0.0

    def norm_gap(lam: float) -> float:
        with np.errstate(divide="ignore"):
            coords = g[active] / (eig[active] + lam)
        return 1.0 / float(np.linalg.norm(coords)) - 1.0

    lower = -eig_min
    upper = g_norm - eig_min
    # the bracket end is exact only in real arithmetic; a rounded-down gap
    # there means the crossing sits on it
    if norm_gap(upper) <= 0.0:
        lam = upper
    else:
        lam = brentq(norm_gap, lower, upper, xtol=1e-15 * max(1.0, abs(upper)), rtol=4 * np.finfo(float).eps, maxiter=500)

    coords = np.zeros(n, dtype=complex)
    coords[active] = g[active] / (eig[active] + lam)
    a = basis @ coords
    return a / np.linalg.norm(a)


def _solve(matrix: np.ndarray, target: np.ndarray, constraint: ExcitationConstraint) -> Tuple[np.ndarray, float]:
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise ValueError("excitation must have at least one entry")
    if matrix.shape[0] != target.shape[0] or matrix.shape[0] < 1:
        raise ValueError(f"matrix has {matrix.shape[0]} rows but target has {target.shape[0]} entries")
    if constraint is ExcitationConstraint.UNCONSTRAINED:
        a = np.linalg.lstsq(matrix, target, rcond=None)[0]
    else:
        a = _unit_norm_lstsq(matrix, target)
    return a, float(np.linalg.norm(matrix @ a - target))


def solve_excitation(
    matrix: np.ndarray,
    p: np.ndarray,
    constraint: ExcitationConstraint = ExcitationConstraint.UNIT_NORM,
) -> Tuple[Excitation, float]:
    """
    Best excitation for a fixed configuration.

    UNCONSTRAINED returns the minimum-norm least-squares solution; UNIT_NORM
    the exact minimizer on the unit sphere. An all-zero matrix under
    UNIT_NORM yields the first basis vector and residual ||p||.

    Returns:
        (excitation, ||M a - p||_2)
    """
    constraint = ExcitationConstraint(constraint)
    a, residual = _solve(np.asarray(matrix, dtype=complex), np.asarray(p, dtype=complex).ravel(), constraint)
    return Excitation(tuple(a), unit_norm=constraint is ExcitationConstraint.UNIT_NORM), residual


def fit_excitation(
    matrix: np.ndarray,
    observed: np.ndarray,
    kind: MeasurementKind,
    constraint: ExcitationConstraint,
) -> Tuple[np.ndarray, float]:
    """
    Excitation fit in the observed kind's metric.

    Magnitude-only data is fitted by alternating phase retrieval: phases are
    taken from the current prediction and the complex problem is re-solved,
    a fixed number of times.
    """
    if kind is MeasurementKind.COMPLEX_FIELD:
        return _solve(matrix, observed, constraint)
    magnitude = observed if kind is MeasurementKind.MAGNITUDE_LINEAR else db_to_linear(observed)
    a, _ = _solve(matrix, magnitude.astype(complex), constraint)
    for _ in range(PHASE_RETRIEVAL_ITERATIONS):
        phase = np.exp(1j * np.angle(matrix @ a))
        a, _ = _solve(matrix, magnitude * phase, constraint)
    return a, kind_residual(matrix @ a, observed, kind)


def _candidate_arrays(
    center: np.ndarray,
    spacing: np.ndarray,
    scheme: GridScheme,
    lower: np.ndarray,
    upper: np.ndarray,
) -> List[np.ndarray]:
    """Clipped, duplicate-free candidates; the center always comes first."""
    dim = center.size
    if scheme is GridScheme.FACTORIAL3:
        steps = [np.array(s, dtype=float) for s in itertools.product((-1.0, 0.0, 1.0), repeat=dim) if any(s)]
    else:
        steps = []
        for index in range(dim):
            for sign in (-1.0, 1.0):
                step = np.zeros(dim)
                step[index] = sign
                steps.append(step)

    candidates = [center.copy()]
    seen = {tuple(center)}
    for step in steps:
        candidate = np.clip(center + step * spacing, lower, upper)
        key = tuple(candidate)
        if key not in seen:
            seen.add(key)
            candidates.append(candidate)
    return candidates


def candidate_grid(
    center: Union[ConfigurationPoint, Sequence[float]],
    spacing: Sequence[float],
    scheme: GridScheme,
    bounds: Sequence[Tuple[float, float]],
) -> List[ConfigurationPoint]:
    """
    Candidate configurations around `center`.

    FACTORIAL3 yields all 3^d points center +/- spacing per coordinate,
    COMPASS the center plus 2d single-coordinate moves. Points are clipped
    into `bounds` and deduplicated; the center is always the first entry.
    """
    center_values = center.as_array() if isinstance(center, ConfigurationPoint) else np.asarray(center, dtype=float)
    spacing = np.asarray(spacing, dtype=float)
    if np.any(spacing <= 0.0):
        raise ValueError("grid spacing must be positive")
    lower = np.array([lo for lo, _ in bounds], dtype=float)
    upper = np.array([hi for _, hi in bounds], dtype=float)
    return [
        ConfigurationPoint(tuple(c))
        for c in _candidate_arrays(center_values, spacing, GridScheme(scheme), lower, upper)
    ]


@dataclass
class _StartOutcome:
    config: np.ndarray
    excitation: np.ndarray
    history: List[float]
    converged: bool


class _CandidateEvaluator:
    """Evaluates one candidate configuration against the observed pattern."""

    def __init__(
        self,
        model: DesignSpaceModel,
        points: PackedPoints,
        observed: np.ndarray,
        kind: MeasurementKind,
        constraint: ExcitationConstraint,
    ) -> None:
        self.model = model
        self.points = points
        self.observed = observed
        self.kind = kind
        self.constraint = constraint
        self.skipped = 0
        self.diagnostics: List[str] = []

    def __call__(self, config: np.ndarray) -> Optional[Tuple[float, np.ndarray]]:
        try:
            matrix = self.model.basis(config, self.points)
            a, residual = fit_excitation(matrix, self.observed, self.kind, self.constraint)
        except _CANDIDATE_ERRORS as e:
            self.skipped += 1
            if len(self.diagnostics) < MAX_DIAGNOSTICS:
                self.diagnostics.append(f"config {np.round(config, 6).tolist()}: {e}")
            return None
        if not math.isfinite(residual):
            self.skipped += 1
            return None
        return residual, a


def _run_start(
    evaluate: _CandidateEvaluator,
    rng: np.random.Generator,
    params: SolverParams,
    scheme: GridScheme,
    target_norm: float,
) -> _StartOutcome:
    model = evaluate.model
    lower, upper = model.lower_bounds, model.upper_bounds

    for _ in range(MAX_START_ATTEMPTS):
        config = rng.uniform(lower, upper)
        outcome = evaluate(config)
        if outcome is not None:
            break
    else:
        raise SolverFailure(f"{model.name}: no valid starting configuration in {MAX_START_ATTEMPTS} draws")

    residual, excitation = outcome
    history = [residual]
    spacing0 = params.initial_spacing_frac * (upper - lower)
    tol = params.convergence_tol
    converged = residual <= tol * target_norm

    for iteration in range(params.max_iterations):
        if converged:
            break
        spacing = spacing0 * params.decay ** iteration
        moved = False
        previous = residual
        for candidate in _candidate_arrays(config, spacing, scheme, lower, upper)[1:]:
            result = evaluate(candidate)
            # strict comparison keeps the earliest candidate on ties
            if result is not None and result[0] < residual:
                residual, excitation = result
                config = candidate
                moved = True
        history.append(residual)
        if residual <= tol * target_norm:
            converged = True
        elif moved and previous - residual <= tol * previous:
            converged = True

    return _StartOutcome(config=config, excitation=excitation, history=history, converged=converged)


def extrapolate(
    model: DesignSpaceModel,
    observed: SampledPattern,
    queries: PointsLike,
    params: SolverParams = SolverParams(),
    rng_seed: int = 0,
) -> ExtrapolationResult:
    """
    Estimate the design behind `observed` and predict the pattern at `queries`.

    Runs `params.restarts` independent starts (uniform in the model's
    bounds, deterministic per seed) and keeps the one with the smallest
    final residual; ties go to the earliest start.
    """
    points = pack_points(observed.points)
    values = observed.value_array()
    kind = observed.kind
    target_norm = float(np.linalg.norm(values))

    undersampled = len(observed) < min_sample_count(model, kind)
    if undersampled:
        logger.warning(
            "%s: %d observations is below the recommended minimum of %d",
            model.name, len(observed), min_sample_count(model, kind),
        )

    scheme = params.scheme_for(model.config_dim)
    evaluate = _CandidateEvaluator(model, points, values, kind, params.excitation_constraint)
    rng = np.random.default_rng(rng_seed)

    best: Optional[_StartOutcome] = None
    best_index = 0
    for index in range(params.restarts):
        outcome = _run_start(evaluate, rng, params, scheme, target_norm)
        logger.debug(
            "%s start %d: residual %.6g after %d iterations",
            model.name, index, outcome.history[-1], len(outcome.history) - 1,
        )
        if best is None or outcome.history[-1] < best.history[-1]:
            best, best_index = outcome, index

    if evaluate.skipped:
        logger.warning("%s: skipped %d candidate configurations", model.name, evaluate.skipped)

    query_points = pack_points(queries)
    if len(query_points):
        predicted = to_kind(model.forward(best.config, best.excitation, query_points), kind)
    else:
        predicted = np.zeros(0, dtype=complex if kind is MeasurementKind.COMPLEX_FIELD else float)

    return ExtrapolationResult(
        config=ConfigurationPoint(tuple(best.config)),
        excitation=Excitation(
            tuple(best.excitation),
            unit_norm=params.excitation_constraint is ExcitationConstraint.UNIT_NORM,
        ),
        residual_history=tuple(float(r) for r in best.history),
        predicted=predicted,
        converged=best.converged,
        undersampled=undersampled,
        skipped_candidates=evaluate.skipped,
        diagnostics=tuple(evaluate.diagnostics),
        restart=best_index,
    )


def residual_error(
    model: DesignSpaceModel,
    config: Union[ConfigurationPoint, Sequence[float]],
    excitation: Union[Excitation, Sequence[complex]],
    observed: SampledPattern,
) -> float:
    """||Phi_K(design) - p||_2 in the observed kind's value space."""
    values = model.forward(
        model.check_config(config),
        excitation_array(excitation, model.excitation_dim),
        pack_points(observed.points),
    )
    return kind_residual(values, observed.value_array(), observed.kind)
