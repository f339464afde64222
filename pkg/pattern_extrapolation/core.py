"""
Shared domain types and unit conventions.

Every length is expressed in wavelengths (lambda = 1), so the wavenumber
is k = 2*pi and a path length d contributes the phase exp(i*2*pi*d).
Azimuth is measured in the horizontal plane, elevation from it.

Following the same convention as the workflow parameters in models.py,
domain values are frozen dataclasses: they are immutable and safe to share
between the worker threads that run trials concurrently.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

WAVENUMBER = 2.0 * math.pi

# 20*log10(1e-15) == -300 dB
DB_FLOOR = -300.0
_MAGNITUDE_FLOOR = 1e-15

UNIT_NORM_TOL = 1e-9


def normalize_azimuth(azimuth: float) -> float:
    """Wrap an azimuth into [-pi, pi). Values already in range are returned untouched."""
    if not math.isfinite(azimuth):
        raise ValueError(f"azimuth must be finite, got {azimuth}")
    if -math.pi <= azimuth < math.pi:
        return float(azimuth)
    wrapped = math.fmod(azimuth + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    result = wrapped - math.pi
    # fmod rounding can land exactly on +pi
    if result >= math.pi:
        result -= 2.0 * math.pi
    return result


@dataclass(frozen=True)
class Direction:
    """
    A far-field direction on the unit sphere.

    Attributes:
        azimuth: Radians in [-pi, pi); normalized modulo 2*pi on construction
        elevation: Radians in [-pi/2, pi/2]
    """
    azimuth: float
    elevation: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.elevation) or abs(self.elevation) > math.pi / 2:
            raise ValueError(f"elevation must lie in [-pi/2, pi/2], got {self.elevation}")
        object.__setattr__(self, "azimuth", normalize_azimuth(self.azimuth))
        object.__setattr__(self, "elevation", float(self.elevation))

    def unit_vector(self) -> np.ndarray:
        """Cartesian unit vector; boresight (0, 0) maps to +y."""
        cos_el = math.cos(self.elevation)
        return np.array([
            cos_el * math.sin(self.azimuth),
            cos_el * math.cos(self.azimuth),
            math.sin(self.elevation),
        ])


@dataclass(frozen=True)
class SamplePoint:
    """
    Where a pattern value is measured: a far-field direction or a near-field
    position (3-vector in wavelengths). Exactly one of the two is set.
    """
    direction: Optional[Direction] = None
    position: Optional[Tuple[float, float, float]] = None

    def __post_init__(self) -> None:
        if (self.direction is None) == (self.position is None):
            raise ValueError("SamplePoint needs exactly one of direction or position")
        if self.position is not None:
            position = tuple(float(c) for c in self.position)
            if len(position) != 3 or not all(math.isfinite(c) for c in position):
                raise ValueError(f"position must be a finite 3-vector, got {self.position}")
            object.__setattr__(self, "position", position)

    @classmethod
    def far(cls, azimuth: float, elevation: float) -> "SamplePoint":
        return cls(direction=Direction(azimuth, elevation))

    @classmethod
    def near(cls, x: float, y: float, z: float) -> "SamplePoint":
        return cls(position=(x, y, z))

    @property
    def is_far_field(self) -> bool:
        return self.direction is not None


class MeasurementKind(str, Enum):
    """Value space V of a single measurement."""
    COMPLEX_FIELD = "complex"
    MAGNITUDE_LINEAR = "mag"
    MAGNITUDE_DB = "db"

    @property
    def value_dim(self) -> int:
        """Real dimension of V."""
        return 2 if self is MeasurementKind.COMPLEX_FIELD else 1

    @property
    def is_magnitude(self) -> bool:
        return self is not MeasurementKind.COMPLEX_FIELD


@dataclass(frozen=True)
class ConfigurationPoint:
    """
    Real configuration vector x of a design space.

    Units are wavelengths for lengths and inverse wavelengths for
    curvatures. Bounds are checked by DesignSpaceModel.check_config.
    """
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Excitation:
    """
    Complex port amplitudes a in C^N.

    Attributes:
        values: Complex excitation per port
        unit_norm: When set, ||a||_2 must equal 1 within UNIT_NORM_TOL
    """
    values: Tuple[complex, ...]
    unit_norm: bool = False

    def __post_init__(self) -> None:
        values = tuple(complex(v) for v in self.values)
        if not all(math.isfinite(v.real) and math.isfinite(v.imag) for v in values):
            raise ValueError("excitation entries must be finite")
        object.__setattr__(self, "values", values)
        if self.unit_norm and abs(self.norm - 1.0) > UNIT_NORM_TOL:
            raise ValueError(f"unit-norm excitation has norm {self.norm!r}")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=complex)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SampledPattern:
    """
    Measured pattern p: sample points paired with values of one kind.

    Complex-field values are stored as complex numbers, magnitude kinds as
    floats (linear magnitude or dB).
    """
    points: Tuple[SamplePoint, ...]
    values: Tuple[Union[complex, float], ...]
    kind: MeasurementKind

    def __post_init__(self) -> None:
        points = tuple(self.points)
        kind = MeasurementKind(self.kind)
        if kind is MeasurementKind.COMPLEX_FIELD:
            values = tuple(complex(v) for v in self.values)
        else:
            values = tuple(float(np.real(v)) for v in self.values)
        if len(points) < 1 or len(points) != len(values):
            raise ValueError(
                f"pattern needs K >= 1 points with one value each, got "
                f"{len(points)} points and {len(values)} values"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)

    def value_array(self) -> np.ndarray:
        dtype = complex if self.kind is MeasurementKind.COMPLEX_FIELD else float
        return np.array(self.values, dtype=dtype)

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PackedPoints:
    """Vectorized view of a sample point list; far-field or near-field, never mixed."""
    azimuth: Optional[np.ndarray] = field(default=None, compare=False)
    elevation: Optional[np.ndarray] = field(default=None, compare=False)
    positions: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def is_far_field(self) -> bool:
        return self.positions is None

    def __len__(self) -> int:
        if self.positions is not None:
            return self.positions.shape[0]
        return self.azimuth.shape[0]


PointsLike = Union[Sequence[SamplePoint], Sequence[Direction], PackedPoints]


def pack_points(points: PointsLike) -> PackedPoints:
    """
    Convert sample points (or bare Directions) into arrays once, so forward
    models evaluated thousands of times by the solver stay vectorized.
    """
    if isinstance(points, PackedPoints):
        return points
    directions = []
    positions = []
    for point in points:
        if isinstance(point, Direction):
            directions.append(point)
        elif point.direction is not None:
            directions.append(point.direction)
        else:
            positions.append(point.position)
    if directions and positions:
        raise ValueError("cannot mix far-field directions and near-field positions")
    if positions:
        return PackedPoints(positions=np.array(positions, dtype=float))
    return PackedPoints(
        azimuth=np.array([d.azimuth for d in directions], dtype=float),
        elevation=np.array([d.elevation for d in directions], dtype=float),
    )


def excitation_array(a: Union[Excitation, Sequence[complex], np.ndarray], expected: int) -> np.ndarray:
    """Excitation as a complex vector, checked against the port count."""
    values = a.as_array() if isinstance(a, Excitation) else np.asarray(a, dtype=complex).ravel()
    if values.shape != (expected,):
        raise ValueError(f"excitation has {values.size} entries, expected {expected}")
    return values


def to_kind(values: np.ndarray, kind: MeasurementKind) -> np.ndarray:
    """Map complex field values into the value space of `kind`."""
    values = np.asarray(values, dtype=complex)
    if kind is MeasurementKind.COMPLEX_FIELD:
        return values
    magnitude = np.abs(values)
    if kind is MeasurementKind.MAGNITUDE_LINEAR:
        return magnitude
    return 20.0 * np.log10(np.maximum(magnitude, _MAGNITUDE_FLOOR))


def db_to_linear(values: np.ndarray) -> np.ndarray:
    return np.power(10.0, np.asarray(values, dtype=float) / 20.0)


def kind_residual(predicted: np.ndarray, observed: np.ndarray, kind: MeasurementKind) -> float:
    """||to_kind(predicted) - observed||_2, the misfit in the observed value space."""
    return float(np.linalg.norm(to_kind(predicted, kind) - observed))


ForwardMap = Callable[[np.ndarray, np.ndarray, PointsLike], np.ndarray]
BasisMap = Callable[[np.ndarray, PointsLike], np.ndarray]


@dataclass(frozen=True)
class DesignSpaceModel:
    """
    A named antenna family D = C x E.

    Attributes:
        name: Family identifier (e.g. "rect-3x3", "horn")
        config_bounds: Per-coordinate (lo, hi) bounds of the configuration
        excitation_dim: Number of complex excitation ports N
        forward: Pattern map (config, excitation, points) -> complex values
        basis: Design matrix builder (config, points) -> K x N complex matrix;
            forward(x, a, s) == basis(x, s) @ a
        draw_truth: Optional sampler (rng) -> (config, excitation) used to
            draw ground-truth designs inside the experiment envelope
        near_field: Whether the model is evaluated at near-field positions
    """
    name: str
    config_bounds: Tuple[Tuple[float, float], ...]
    excitation_dim: int
    forward: ForwardMap = field(compare=False)
    basis: BasisMap = field(compare=False)
    draw_truth: Optional[Callable[[np.random.Generator], Tuple[np.ndarray, np.ndarray]]] = field(
        default=None, compare=False
    )
    near_field: bool = False

    def __post_init__(self) -> None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.config_bounds)
        for index, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise ValueError(f"{self.name}: bound {index} has lo={lo} >= hi={hi}")
        if self.excitation_dim < 0:
            raise ValueError(f"{self.name}: excitation_dim must be nonnegative")
        object.__setattr__(self, "config_bounds", bounds)

    @property
    def config_dim(self) -> int:
        return len(self.config_bounds)

    @property
    def lower_bounds(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.config_bounds], dtype=float)

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([hi for _, hi in self.config_bounds], dtype=float)

    def check_config(self, config: Union[ConfigurationPoint, Sequence[float], np.ndarray]) -> np.ndarray:
        """Validate length and bounds; returns the configuration as an array."""
        values = config.as_array() if isinstance(config, ConfigurationPoint) else np.asarray(config, dtype=float)
        if values.shape != (self.config_dim,):
            raise ValueError(
                f"{self.name}: configuration has {values.size} entries, expected {self.config_dim}"
            )
        if np.any(values < self.lower_bounds) or np.any(values > self.upper_bounds):
            raise ValueError(f"{self.name}: configuration {values.tolist()} is outside its bounds")
        return values


def design_dim(model: DesignSpaceModel) -> int:
    """Real dimension of D: each complex excitation port counts twice."""
    return model.config_dim + 2 * model.excitation_dim


def min_sample_count(model: DesignSpaceModel, kind: MeasurementKind) -> int:
    """Smallest K with K * dim V > 2 * dim D."""
    return (2 * design_dim(model)) // MeasurementKind(kind).value_dim + 1
