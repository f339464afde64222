"""
Paraboloidal reflector, physical-optics ray summation.

Rays leave an isotropic feed, reflect off a dense polar grid of facets on
the surface y = a u^2 + b v^2, and are summed in the far field with the
coordinate origin as phase reference. No feed taper, blockage, or
obliquity factor is modelled.
"""

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from pattern_extrapolation.core import WAVENUMBER, Excitation, PointsLike, excitation_array, pack_points

DEFAULT_ANGULAR_POINTS = 20
DEFAULT_RADIAL_POINTS = 10


@dataclass(frozen=True)
class DishConfig:
    """
    Attributes:
        radius_x: Rim semi-axis along x (wavelengths)
        radius_z: Rim semi-axis along z (wavelengths)
        curv_a: Paraboloid coefficient on x^2 (1/wavelengths)
        curv_b: Paraboloid coefficient on z^2 (1/wavelengths)
        feed: Feed position (wavelengths)
    """
    radius_x: float
    radius_z: float
    curv_a: float
    curv_b: float
    feed: Tuple[float, float, float]

    def __post_init__(self) -> None:
        if not (self.radius_x > 0.0 and self.radius_z > 0.0):
            raise ValueError(f"dish radii must be positive, got {self.radius_x}, {self.radius_z}")
        if self.curv_a < 0.0 or self.curv_b < 0.0:
            raise ValueError(f"dish curvatures must be nonnegative, got {self.curv_a}, {self.curv_b}")
        feed = tuple(float(c) for c in self.feed)
        if len(feed) != 3:
            raise ValueError("dish feed must be a 3-vector")
        object.__setattr__(self, "feed", feed)

    @classmethod
    def from_flat(cls, values) -> "DishConfig":
        """(radius_x, radius_z, curv_a, curv_b, feed_x, feed_y, feed_z)"""
        rx, rz, a, b, fx, fy, fz = (float(v) for v in values)
        return cls(radius_x=rx, radius_z=rz, curv_a=a, curv_b=b, feed=(fx, fy, fz))


def check_reflector_grid(n_angular: int, n_radial: int) -> None:
    # odd angular counts have no mirror partner for u -> -u
    if n_angular < 4 or n_angular % 2 or n_radial < 1:
        raise ValueError(
            f"reflector grid needs an even n_angular >= 4 and n_radial >= 1, got {n_angular}, {n_radial}"
        )


def _polar_grid(config: DishConfig, n_angular: int, n_radial: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Facet centers (u, v) and their flat (parameter-domain) areas."""
    d_angle = 2.0 * math.pi / n_angular
    d_radius = 1.0 / n_radial
    angles = d_angle * (np.arange(n_angular) + 0.5)
    radii = d_radius * (np.arange(n_radial) + 0.5)

    cos_a = np.cos(angles)
    sin_a = np.sin(angles)
    # Mirror partners: pi - angle for u -> -u, -angle for v -> -v.
    # Averaging over both reflections makes the grid mirror-exact in
    # floating point.
    index = np.arange(n_angular)
    mirror_u = (n_angular // 2 - 1 - index) % n_angular
    mirror_v = n_angular - 1 - index
    cos_a = 0.5 * (cos_a - cos_a[mirror_u])
    cos_a = 0.5 * (cos_a + cos_a[mirror_v])
    sin_a = 0.5 * (sin_a - sin_a[mirror_v])
    sin_a = 0.5 * (sin_a + sin_a[mirror_u])

    u = config.radius_x * np.outer(cos_a, radii).ravel()
    v = config.radius_z * np.outer(sin_a, radii).ravel()
    # exact annular-sector area in the (u, v) domain
    flat_area = config.radius_x * config.radius_z * d_angle * d_radius * np.tile(radii, n_angular)
    return u, v, flat_area


def reflector_grid(
    config: DishConfig,
    n_angular: int = DEFAULT_ANGULAR_POINTS,
    n_radial: int = DEFAULT_RADIAL_POINTS,
) -> List[Tuple[np.ndarray, float]]:
    """
    Polar facet grid over the elliptical rim, lifted to the reflector surface.

    Returns n_angular * n_radial (point, weight) pairs; the weight is the
    facet's surface area in square wavelengths. n_angular must be even and
    at least 4; the grid is then exactly symmetric under u -> -u and v -> -v.
    """
    points, weights = reflector_facets(config, n_angular, n_radial)
    return [(point, float(weight)) for point, weight in zip(points, weights)]


def reflector_facets(
    config: DishConfig,
    n_angular: int = DEFAULT_ANGULAR_POINTS,
    n_radial: int = DEFAULT_RADIAL_POINTS,
) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of reflector_grid: (n, 3) points and (n,) weights."""
    check_reflector_grid(n_angular, n_radial)
    u, v, flat_area = _polar_grid(config, n_angular, n_radial)
    y = config.curv_a * u ** 2 + config.curv_b * v ** 2
    slope = np.sqrt(1.0 + (2.0 * config.curv_a * u) ** 2 + (2.0 * config.curv_b * v) ** 2)
    return np.column_stack((u, y, v)), flat_area * slope


def _unit_vectors(azimuth: np.ndarray, elevation: np.ndarray) -> np.ndarray:
    cos_el = np.cos(elevation)
    return np.column_stack((cos_el * np.sin(azimuth), cos_el * np.cos(azimuth), np.sin(elevation)))


def dish_basis(
    config: DishConfig,
    points: PointsLike,
    n_angular: int = DEFAULT_ANGULAR_POINTS,
    n_radial: int = DEFAULT_RADIAL_POINTS,
) -> np.ndarray:
    packed = pack_points(points)
    if not packed.is_far_field:
        raise ValueError("dish pattern needs far-field directions")
    facets, weights = reflector_facets(config, n_angular, n_radial)
    feed_path = np.linalg.norm(np.asarray(config.feed)[None, :] - facets, axis=1)
    advance = _unit_vectors(packed.azimuth, packed.elevation) @ facets.T
    terms = np.exp(1j * WAVENUMBER * (feed_path[None, :] - advance))
    return (terms @ weights)[:, None]


def dish_pattern(
    config: DishConfig,
    a: Excitation,
    dirs: PointsLike,
    n_angular: int = DEFAULT_ANGULAR_POINTS,
    n_radial: int = DEFAULT_RADIAL_POINTS,
) -> np.ndarray:
    """a1 * sum_i w_i exp(i*2*pi*(||feed - r_i|| - r_i . u)) for each direction u."""
    weights = excitation_array(a, 1)
    return dish_basis(config, dirs, n_angular, n_radial) @ weights
