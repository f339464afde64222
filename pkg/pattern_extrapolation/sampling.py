"""
Sample-point layouts and measurement noise.

Four layouts are supported, in increasing order of how well they break the
symmetries of typical antennas:

- azimuth cut only (elevation 0)
- principal planes (azimuth cut plus elevation cut at azimuth 0)
- contiguous blocks of azimuth samples, each block at its own random small
  elevation
- directions uniform over the sphere

Everything is deterministic given a seed.
"""

import math
from dataclasses import dataclass
from typing import List, Union

import numpy as np

from pattern_extrapolation.core import Direction

DEFAULT_MAX_ELEVATION = math.radians(10.0)


def _require_positive(**counts: int) -> None:
    for name, value in counts.items():
        if value < 1:
            raise ValueError(f"{name} must be >= 1, got {value}")


@dataclass(frozen=True)
class AzimuthOnly:
    count: int

    def __post_init__(self) -> None:
        _require_positive(count=self.count)


@dataclass(frozen=True)
class PrincipalPlanes:
    az_count: int
    el_count: int

    def __post_init__(self) -> None:
        _require_positive(az_count=self.az_count, el_count=self.el_count)


@dataclass(frozen=True)
class AzimuthBlocks:
    block_count: int
    block_len: int
    max_elevation: float = DEFAULT_MAX_ELEVATION

    def __post_init__(self) -> None:
        _require_positive(block_count=self.block_count, block_len=self.block_len)
        if not 0.0 < self.max_elevation < math.pi / 2:
            raise ValueError(f"max_elevation must lie in (0, pi/2), got {self.max_elevation}")


@dataclass(frozen=True)
class RandomSphere:
    count: int

    def __post_init__(self) -> None:
        _require_positive(count=self.count)


SamplingSpec = Union[AzimuthOnly, PrincipalPlanes, AzimuthBlocks, RandomSphere]


def _azimuth_cut(count: int) -> np.ndarray:
    """count evenly spaced azimuths starting at -pi."""
    return -math.pi + 2.0 * math.pi * np.arange(count) / count


def _to_directions(azimuth: np.ndarray, elevation: np.ndarray) -> List[Direction]:
    return [Direction(float(az), float(el)) for az, el in zip(azimuth, elevation)]


def generate_samples(spec: SamplingSpec, rng_seed: int) -> List[Direction]:
    """Directions for a sampling layout; only the random layouts consume the seed."""
    rng = np.random.default_rng(rng_seed)

    if isinstance(spec, AzimuthOnly):
        azimuth = _azimuth_cut(spec.count)
        return _to_directions(azimuth, np.zeros_like(azimuth))

    if isinstance(spec, PrincipalPlanes):
        azimuth = _azimuth_cut(spec.az_count)
        if spec.el_count == 1:
            elevation = np.zeros(1)
        else:
            elevation = np.linspace(-math.pi / 2, math.pi / 2, spec.el_count)
        return _to_directions(azimuth, np.zeros_like(azimuth)) + _to_directions(
            np.zeros_like(elevation), elevation
        )

    if isinstance(spec, AzimuthBlocks):
        azimuth = _azimuth_cut(spec.block_count * spec.block_len).reshape(spec.block_count, spec.block_len)
        # (0, max_elevation]: uniform draws are [0, max), so reflect them
        block_elevation = spec.max_elevation - rng.uniform(0.0, spec.max_elevation, size=spec.block_count)
        elevation = np.repeat(block_elevation[:, None], spec.block_len, axis=1)
        return _to_directions(azimuth.ravel(), elevation.ravel())

    if isinstance(spec, RandomSphere):
        azimuth = rng.uniform(-math.pi, math.pi, size=spec.count)
        # area-preserving: sin(elevation) is uniform on [-1, 1]
        elevation = np.arcsin(rng.uniform(-1.0, 1.0, size=spec.count))
        return _to_directions(azimuth, elevation)

    raise ValueError(f"unsupported sampling spec {spec!r}")


def add_noise(values: np.ndarray, sigma_rel: float, rng_seed: int) -> np.ndarray:
    """
    Additive complex white Gaussian noise.

    Each of the real and imaginary parts gets standard deviation
    sigma_rel * RMS(values) / sqrt(2), so the noise RMS is sigma_rel times
    the signal RMS. sigma_rel == 0 returns the input unchanged.
    """
    values = np.asarray(values, dtype=complex)
    if values.size == 0:
        raise ValueError("cannot add noise to an empty pattern")
    if sigma_rel < 0.0:
        raise ValueError(f"sigma_rel must be nonnegative, got {sigma_rel}")
    if sigma_rel == 0.0:
        return values.copy()
    rng = np.random.default_rng(rng_seed)
    rms = math.sqrt(float(np.mean(np.abs(values) ** 2)))
    scale = sigma_rel * rms / math.sqrt(2.0)
    noise = rng.standard_normal(values.shape) + 1j * rng.standard_normal(values.shape)
    return values + scale * noise
