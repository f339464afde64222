"""
Design-space registry: each antenna family as a DesignSpaceModel.

A model flattens its family's typed configuration into one real vector so
the solver can search it uniformly, and carries the envelope that truth
designs are drawn from in simulation studies:

- rectangular arrays: adjacent-element spacings up to one-half wavelength
- E-plane horns: all three dimensions up to 6 wavelengths
- dishes: rim radii up to 6 wavelengths, feed within 6 wavelengths of the
  vertex, curvature coefficients in [0, 6]
"""

from typing import Callable, Dict, Optional, Tuple

import numpy as np

from pattern_extrapolation.core import DesignSpaceModel, PointsLike
from pattern_extrapolation.forward_models import (
    DishConfig,
    GeneralArrayConfig,
    HornConfig,
    RectArrayConfig,
    check_reflector_grid,
    dish_basis,
    horn_basis,
    nearfield_basis,
    rect_array_basis,
)

DEFAULT_MAX_SPACING = 0.5
DEFAULT_MAX_DIMENSION = 6.0
DEFAULT_MIN_DIMENSION = 0.25
DEFAULT_MAX_CURVATURE = 6.0
DEFAULT_FEED_EXTENT = 6.0


def random_unit_excitation(rng: np.random.Generator, ports: int) -> np.ndarray:
    """Complex Gaussian excitation scaled to unit norm."""
    a = rng.standard_normal(ports) + 1j * rng.standard_normal(ports)
    return a / np.linalg.norm(a)


def _linear_forward(basis: Callable[[np.ndarray, PointsLike], np.ndarray]):
    def forward(config: np.ndarray, a: np.ndarray, points: PointsLike) -> np.ndarray:
        return basis(config, points) @ np.asarray(a, dtype=complex)
    return forward


def decode_rect_config(values: np.ndarray, rows: int) -> RectArrayConfig:
    values = np.asarray(values, dtype=float)
    return RectArrayConfig.from_spacings(values[: rows - 1], values[rows - 1:])


def rect_array_model(rows: int, cols: int, max_spacing: float = DEFAULT_MAX_SPACING) -> DesignSpaceModel:
    """
    M x N rectangular array. Configuration: M-1 row spacings then N-1
    column spacings, each in [0, max_spacing]; excitations row-major.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"array shape must be positive, got {rows}x{cols}")

    def basis(config: np.ndarray, points: PointsLike) -> np.ndarray:
        return rect_array_basis(decode_rect_config(config, rows), points)

    def draw_truth(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        spacings = rng.uniform(0.0, max_spacing, size=rows + cols - 2)
        return spacings, random_unit_excitation(rng, rows * cols)

    return DesignSpaceModel(
        name=f"rect-{rows}x{cols}",
        config_bounds=((0.0, max_spacing),) * (rows + cols - 2),
        excitation_dim=rows * cols,
        forward=_linear_forward(basis),
        basis=basis,
        draw_truth=draw_truth,
    )


def general_array_model(elements: int, extent: float = 1.0) -> DesignSpaceModel:
    """N free elements inside the cube [-extent, extent]^3, sampled in the near field."""
    if elements < 1:
        raise ValueError(f"a general array needs at least one element, got {elements}")

    def basis(config: np.ndarray, points: PointsLike) -> np.ndarray:
        return nearfield_basis(GeneralArrayConfig.from_flat(config), points)

    def draw_truth(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        return rng.uniform(-extent, extent, size=3 * elements), random_unit_excitation(rng, elements)

    return DesignSpaceModel(
        name=f"general-{elements}",
        config_bounds=((-extent, extent),) * (3 * elements),
        excitation_dim=elements,
        forward=_linear_forward(basis),
        basis=basis,
        draw_truth=draw_truth,
        near_field=True,
    )


def decode_horn_config(values: np.ndarray) -> HornConfig:
    width, mouth_height, slant_radius = (float(v) for v in values)
    return HornConfig(width=width, mouth_height=mouth_height, slant_radius=slant_radius)


def horn_model(
    max_dim: float = DEFAULT_MAX_DIMENSION,
    min_dim: float = DEFAULT_MIN_DIMENSION,
) -> DesignSpaceModel:
    """E-plane horn: (width, mouth_height, slant_radius), one excitation port."""

    def basis(config: np.ndarray, points: PointsLike) -> np.ndarray:
        return horn_basis(decode_horn_config(config), points)

    def draw_truth(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        width = rng.uniform(min_dim, max_dim)
        mouth_height = rng.uniform(min_dim, max_dim)
        slant_radius = rng.uniform(max(min_dim, 0.5 * mouth_height), max_dim)
        return np.array([width, mouth_height, slant_radius]), random_unit_excitation(rng, 1)

    return DesignSpaceModel(
        name="horn",
        config_bounds=((min_dim, max_dim),) * 3,
        excitation_dim=1,
        forward=_linear_forward(basis),
        basis=basis,
        draw_truth=draw_truth,
    )


def dish_model(
    max_radius: float = DEFAULT_MAX_DIMENSION,
    max_curvature: float = DEFAULT_MAX_CURVATURE,
    feed_extent: float = DEFAULT_FEED_EXTENT,
    min_radius: float = DEFAULT_MIN_DIMENSION,
    n_angular: int = 20,
    n_radial: int = 10,
) -> DesignSpaceModel:
    """
    Paraboloid dish: (radius_x, radius_z, curv_a, curv_b, feed_x, feed_y,
    feed_z), one excitation port. The feed-orientation factor is omitted;
    an isotropic feed makes it irrelevant.
    """
    check_reflector_grid(n_angular, n_radial)

    def basis(config: np.ndarray, points: PointsLike) -> np.ndarray:
        return dish_basis(DishConfig.from_flat(config), points, n_angular, n_radial)

    def draw_truth(rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        radii = rng.uniform(min_radius, max_radius, size=2)
        curvatures = rng.uniform(0.0, max_curvature, size=2)
        feed = np.array([
            rng.uniform(-feed_extent, feed_extent),
            rng.uniform(0.0, feed_extent),
            rng.uniform(-feed_extent, feed_extent),
        ])
        return np.concatenate((radii, curvatures, feed)), random_unit_excitation(rng, 1)

    return DesignSpaceModel(
        name="dish",
        config_bounds=(
            (min_radius, max_radius),
            (min_radius, max_radius),
            (0.0, max_curvature),
            (0.0, max_curvature),
            (-feed_extent, feed_extent),
            (-feed_extent, feed_extent),
            (-feed_extent, feed_extent),
        ),
        excitation_dim=1,
        forward=_linear_forward(basis),
        basis=basis,
        draw_truth=draw_truth,
    )


MODEL_FAMILIES: Dict[str, str] = {
    "rect": "rectangular phased array (needs rows, cols)",
    "general": "general phased array sampled in the near field (needs elements)",
    "horn": "E-plane sectoral horn",
    "dish": "paraboloidal reflector with isotropic feed",
}


def build_model(
    family: str,
    rows: Optional[int] = None,
    cols: Optional[int] = None,
    elements: Optional[int] = None,
) -> DesignSpaceModel:
    """Look up a family by name and build its design space."""
    if family == "rect":
        if rows is None or cols is None:
            raise ValueError("rect model needs rows and cols")
        return rect_array_model(rows, cols)
    if family == "general":
        if elements is None:
            raise ValueError("general model needs elements")
        return general_array_model(elements)
    if family == "horn":
        return horn_model()
    if family == "dish":
        return dish_model()
    raise ValueError(f"unknown model family {family!r}; expected one of {sorted(MODEL_FAMILIES)}")
