"""
Phased-array pattern maps: isotropic elements, no mutual coupling.

Both maps are linear in the excitation, so each is implemented as a design
matrix (one column per element) applied to the excitation vector.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from pattern_extrapolation.core import (
    WAVENUMBER,
    Excitation,
    PointsLike,
    excitation_array,
    pack_points,
)


@dataclass(frozen=True)
class RectArrayConfig:
    """
    Rectangular M x N array on the (x, z) aperture plane.

    The first row and column sit at offset 0 and are never stored.

    Attributes:
        row_offsets: y_2..y_M in wavelengths, nonnegative and nondecreasing
        col_offsets: x_2..x_N in wavelengths, nonnegative and nondecreasing
    """
    row_offsets: Tuple[float, ...]
    col_offsets: Tuple[float, ...]

    def __post_init__(self) -> None:
        for name in ("row_offsets", "col_offsets"):
            offsets = tuple(float(v) for v in getattr(self, name))
            if any(v < 0.0 for v in offsets):
                raise ValueError(f"{name} must be nonnegative, got {offsets}")
            if any(b < a for a, b in zip(offsets, offsets[1:])):
                raise ValueError(f"{name} must be nondecreasing, got {offsets}")
            object.__setattr__(self, name, offsets)

    @classmethod
    def from_spacings(cls, row_spacings: Sequence[float], col_spacings: Sequence[float]) -> "RectArrayConfig":
        """Build offsets as cumulative sums of adjacent-element spacings."""
        return cls(
            row_offsets=tuple(np.cumsum(np.asarray(row_spacings, dtype=float))),
            col_offsets=tuple(np.cumsum(np.asarray(col_spacings, dtype=float))),
        )

    @property
    def rows(self) -> int:
        return len(self.row_offsets) + 1

    @property
    def cols(self) -> int:
        return len(self.col_offsets) + 1

    @property
    def y(self) -> np.ndarray:
        return np.concatenate(([0.0], self.row_offsets))

    @property
    def x(self) -> np.ndarray:
        return np.concatenate(([0.0], self.col_offsets))


@dataclass(frozen=True)
class GeneralArrayConfig:
    """
    Arbitrary array of N isotropic elements; overlapping elements are allowed.

    Attributes:
        positions: Element positions x_m, 3-vectors in wavelengths
    """
    positions: Tuple[Tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        positions = tuple(tuple(float(c) for c in p) for p in self.positions)
        if not positions:
            raise ValueError("a general array needs at least one element")
        if any(len(p) != 3 for p in positions):
            raise ValueError("element positions must be 3-vectors")
        object.__setattr__(self, "positions", positions)

    @classmethod
    def from_flat(cls, values: Sequence[float]) -> "GeneralArrayConfig":
        flat = np.asarray(values, dtype=float)
        return cls(positions=tuple(map(tuple, flat.reshape(-1, 3))))

    @property
    def elements(self) -> int:
        return len(self.positions)


def nearfield_basis(config: GeneralArrayConfig, points: PointsLike) -> np.ndarray:
    """K x N matrix with entries exp(i*2*pi*||x_m - s_k||)."""
    packed = pack_points(points)
    if packed.is_far_field:
        raise ValueError("near-field pattern needs position sample points")
    elements = np.array(config.positions)
    offsets = elements[None, :, :] - packed.positions[:, None, :]
    distances = np.linalg.norm(offsets, axis=2)
    return np.exp(1j * WAVENUMBER * distances)


def array_nearfield_pattern(config: GeneralArrayConfig, a: Excitation, points: PointsLike) -> np.ndarray:
    """Sum_m a_m exp(i*2*pi*||x_m - s_k||) at each position s_k; no path-loss term."""
    weights = excitation_array(a, config.elements)
    return nearfield_basis(config, points) @ weights


def rect_array_basis(config: RectArrayConfig, points: PointsLike) -> np.ndarray:
    """
    K x (M*N) matrix, columns in row-major (j, k) order, entries
    exp(i*2*pi*(y_j sin(theta) + x_k sin(phi))).
    """
    packed = pack_points(points)
    if not packed.is_far_field:
        raise ValueError("rectangular-array pattern needs far-field directions")
    row_phase = np.exp(1j * WAVENUMBER * np.outer(np.sin(packed.elevation), config.y))
    col_phase = np.exp(1j * WAVENUMBER * np.outer(np.sin(packed.azimuth), config.x))
    basis = row_phase[:, :, None] * col_phase[:, None, :]
    return basis.reshape(len(packed), config.rows * config.cols)


def rect_array_pattern(config: RectArrayConfig, a: Excitation, dirs: PointsLike) -> np.ndarray:
    weights = excitation_array(a, config.rows * config.cols)
    return rect_array_basis(config, dirs) @ weights
