"""
E-plane sectoral horn, closed-form aperture model.

The aperture field is separable. In the E-plane (elevation) the flare adds a
quadratic phase error across the mouth, which integrates in closed form
through the Fresnel integrals; in the H-plane the TE10 cosine taper
integrates to a pair of sinc terms. The horn is oriented so that its
E-field lies in the elevation plane.
"""

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import fresnel as _scipy_fresnel

from pattern_extrapolation.core import Excitation, PointsLike, excitation_array, pack_points


@dataclass(frozen=True)
class HornConfig:
    """
    Attributes:
        width: H-plane aperture width a (wavelengths)
        mouth_height: E-plane aperture height b1 (wavelengths)
        slant_radius: Flare slant radius rho1 (wavelengths)
    """
    width: float
    mouth_height: float
    slant_radius: float

    def __post_init__(self) -> None:
        for name in ("width", "mouth_height", "slant_radius"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0.0:
                raise ValueError(f"horn {name} must be positive, got {value}")
            object.__setattr__(self, name, value)
        if self.mouth_height > 2.0 * self.slant_radius:
            raise ValueError(
                f"mouth_height {self.mouth_height} exceeds twice the slant radius {self.slant_radius}"
            )


def fresnel(x: float) -> Tuple[float, float]:
    """
    Fresnel integrals (C(x), S(x)) with kernel cos/sin(pi t^2 / 2).

    Note the order: scipy returns (S, C).
    """
    s, c = _scipy_fresnel(x)
    return float(c), float(s)


def eplane_factor(config: HornConfig, elevation: np.ndarray) -> np.ndarray:
    """
    ((1 + cos t) / 2) * integral over |y| <= b1/2 of
    exp(-i k y^2 / (2 rho1)) exp(i k y sin t) dy, with k = 2*pi.

    Completing the square gives exp(i*pi*rho1*sin^2 t) * sqrt(rho1/2) *
    [(C(t2) - C(t1)) - i (S(t2) - S(t1))] with t = sqrt(2/rho1) * (y - rho1 sin t).
    """
    rho = config.slant_radius
    half = 0.5 * config.mouth_height
    sin_el = np.sin(elevation)
    scale = math.sqrt(2.0 / rho)
    s1, c1 = _scipy_fresnel(scale * (-half - rho * sin_el))
    s2, c2 = _scipy_fresnel(scale * (half - rho * sin_el))
    aperture = math.sqrt(rho / 2.0) * ((c2 - c1) - 1j * (s2 - s1))
    obliquity = 0.5 * (1.0 + np.cos(elevation))
    return obliquity * np.exp(1j * math.pi * rho * sin_el ** 2) * aperture


def hplane_factor(config: HornConfig, azimuth: np.ndarray) -> np.ndarray:
    """
    integral over |x| <= w/2 of cos(pi x / w) exp(i k x sin p) dx
    == (w/2) * [sinc(1/2 - w sin p) + sinc(1/2 + w sin p)], normalized sinc.
    """
    w = config.width
    u = w * np.sin(azimuth)
    return 0.5 * w * (np.sinc(0.5 - u) + np.sinc(0.5 + u))


def horn_basis(config: HornConfig, points: PointsLike) -> np.ndarray:
    packed = pack_points(points)
    if not packed.is_far_field:
        raise ValueError("horn pattern needs far-field directions")
    values = eplane_factor(config, packed.elevation) * hplane_factor(config, packed.azimuth)
    return values[:, None]


def eplane_horn_pattern(config: HornConfig, a: Excitation, dirs: PointsLike) -> np.ndarray:
    """a1 * E(elevation) * H(azimuth) at each direction."""
    weights = excitation_array(a, 1)
    return horn_basis(config, dirs) @ weights
