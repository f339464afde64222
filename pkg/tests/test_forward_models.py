"""
Unit tests for the antenna pattern maps.

Tests cover:
- Rectangular and near-field arrays (hand-computed cells, symmetries, linearity)
- E-plane horn closed form against numerical quadrature
- Dish ray summation against a direct per-facet loop
"""

import math

import numpy as np
import pytest
from scipy import integrate

from pattern_extrapolation.core import WAVENUMBER, SamplePoint
from pattern_extrapolation.designs import dish_model
from pattern_extrapolation.forward_models import (
    DishConfig,
    GeneralArrayConfig,
    HornConfig,
    RectArrayConfig,
    array_nearfield_pattern,
    dish_basis,
    dish_pattern,
    eplane_horn_pattern,
    fresnel,
    nearfield_basis,
    rect_array_basis,
    rect_array_pattern,
    reflector_facets,
    reflector_grid,
)
from pattern_extrapolation.forward_models.horn import eplane_factor, hplane_factor


def random_directions(rng, count, max_elevation=math.pi / 2):
    return [
        SamplePoint.far(rng.uniform(-math.pi, math.pi), rng.uniform(-max_elevation, max_elevation))
        for _ in range(count)
    ]


class TestRectArray:
    """Test the far-field rectangular array map."""

    def test_single_element_is_isotropic(self):
        config = RectArrayConfig(row_offsets=(), col_offsets=())
        dirs = random_directions(np.random.default_rng(0), 25)
        assert np.array_equal(rect_array_basis(config, dirs), np.ones((25, 1), dtype=complex))

    def test_half_wavelength_pair(self):
        config = RectArrayConfig(row_offsets=(), col_offsets=(0.5,))
        basis = rect_array_basis(config, [SamplePoint.far(math.pi / 6, 0.0)])
        assert np.allclose(basis, [[1.0, 1j]], atol=1e-12)

    def test_endfire_pair_cancels(self):
        config = RectArrayConfig(row_offsets=(), col_offsets=(0.5,))
        value = rect_array_pattern(config, [1.0, 1.0], [SamplePoint.far(math.pi / 2, 0.0)])
        assert abs(value[0]) < 1e-12

    def test_boresight_sums_excitation(self):
        rng = np.random.default_rng(9)
        config = RectArrayConfig.from_spacings(rng.uniform(0, 0.5, 2), rng.uniform(0, 0.5, 2))
        a = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        value = rect_array_pattern(config, a, [SamplePoint.far(0.0, 0.0)])
        assert value[0] == pytest.approx(a.sum())

    def test_row_major_column_order(self):
        config = RectArrayConfig(row_offsets=(0.25,), col_offsets=(0.5,))
        direction = SamplePoint.far(math.pi / 6, math.pi / 6)
        basis = rect_array_basis(config, [direction])[0]
        eighth = np.exp(1j * math.pi / 4)
        # (row, col): (0,0) (0,1) (1,0) (1,1)
        assert np.allclose(basis, [1.0, 1j, eighth, 1j * eighth])

    def test_from_spacings_accumulates(self):
        config = RectArrayConfig.from_spacings([0.1, 0.2], [0.3])
        assert np.allclose(config.y, [0.0, 0.1, 0.3])
        assert np.allclose(config.x, [0.0, 0.3])
        assert (config.rows, config.cols) == (3, 2)

    def test_offsets_must_be_nondecreasing(self):
        with pytest.raises(ValueError):
            RectArrayConfig(row_offsets=(0.3, 0.1), col_offsets=())
        with pytest.raises(ValueError):
            RectArrayConfig(row_offsets=(), col_offsets=(-0.1,))

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(1)
        config = RectArrayConfig.from_spacings(rng.uniform(0, 0.5, 2), rng.uniform(0, 0.5, 3))
        dirs = random_directions(rng, 40, max_elevation=1.5)
        mirrored = [SamplePoint.far(-p.direction.azimuth, -p.direction.elevation) for p in dirs]
        assert np.allclose(rect_array_basis(config, mirrored), np.conj(rect_array_basis(config, dirs)))

    def test_linear_in_excitation(self):
        rng = np.random.default_rng(2)
        config = RectArrayConfig.from_spacings([0.4], [0.2, 0.3])
        dirs = random_directions(rng, 30)
        a = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        b = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        alpha = 0.7 - 1.3j
        assert np.allclose(
            rect_array_pattern(config, alpha * a + b, dirs),
            alpha * rect_array_pattern(config, a, dirs) + rect_array_pattern(config, b, dirs),
        )

    def test_rejects_positions_and_bad_excitation(self):
        config = RectArrayConfig(row_offsets=(0.5,), col_offsets=())
        with pytest.raises(ValueError):
            rect_array_basis(config, [SamplePoint.near(0, 1, 0)])
        with pytest.raises(ValueError):
            rect_array_pattern(config, [1.0, 1.0, 1.0], [SamplePoint.far(0, 0)])


class TestNearFieldArray:
    """Test the general array evaluated at near-field positions."""

    def test_single_cell(self):
        config = GeneralArrayConfig(positions=((0.0, 0.0, 0.0),))
        value = array_nearfield_pattern(config, [1.0], [SamplePoint.near(0.0, 2.25, 0.0)])
        assert value[0] == pytest.approx(1j, abs=1e-12)

    def test_integer_wavelength_distance(self):
        config = GeneralArrayConfig(positions=((0.0, 0.0, 0.0),))
        value = array_nearfield_pattern(config, [1.0], [SamplePoint.near(100.0, 0.0, 0.0)])
        assert value[0] == pytest.approx(1.0, abs=1e-9)

    def test_quarter_wavelength_pair(self):
        config = GeneralArrayConfig(positions=((0.0, 0.0, 0.0), (0.0, 0.0, 0.25)))
        value = array_nearfield_pattern(config, [1.0, 1.0], [SamplePoint.near(0.0, 0.0, 100.0)])
        assert value[0] == pytest.approx(1.0 - 1j, abs=1e-9)

    def test_magnitude_bounded_by_excitation(self):
        rng = np.random.default_rng(10)
        config = GeneralArrayConfig.from_flat(rng.uniform(-1, 1, size=12))
        a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        samples = [SamplePoint.near(*p) for p in rng.uniform(-3, 3, size=(50, 3))]
        values = array_nearfield_pattern(config, a, samples)
        assert np.all(np.abs(values) <= np.abs(a).sum() + 1e-12)

    def test_overlapping_elements_add(self):
        config = GeneralArrayConfig(positions=((0.1, 0.2, 0.3), (0.1, 0.2, 0.3)))
        point = [SamplePoint.near(1.0, 1.0, 1.0)]
        single = GeneralArrayConfig(positions=((0.1, 0.2, 0.3),))
        assert array_nearfield_pattern(config, [1.0, 1.0], point)[0] == pytest.approx(
            2.0 * array_nearfield_pattern(single, [1.0], point)[0]
        )

    def test_z_mirror_is_invisible_in_plane(self):
        rng = np.random.default_rng(3)
        positions = rng.uniform(-1.0, 1.0, size=(4, 3))
        mirrored = positions * np.array([1.0, 1.0, -1.0])
        samples = [SamplePoint.near(x, y, 0.0) for x, y in rng.uniform(-3.0, 3.0, size=(20, 2))]
        a = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        original = array_nearfield_pattern(GeneralArrayConfig.from_flat(positions.ravel()), a, samples)
        flipped = array_nearfield_pattern(GeneralArrayConfig.from_flat(mirrored.ravel()), a, samples)
        assert np.array_equal(original, flipped)

    def test_basis_entries_have_unit_modulus(self):
        rng = np.random.default_rng(4)
        config = GeneralArrayConfig.from_flat(rng.uniform(-1, 1, size=9))
        samples = [SamplePoint.near(*p) for p in rng.uniform(-2, 2, size=(10, 3))]
        assert np.allclose(np.abs(nearfield_basis(config, samples)), 1.0)

    def test_rejects_directions(self):
        config = GeneralArrayConfig(positions=((0.0, 0.0, 0.0),))
        with pytest.raises(ValueError):
            nearfield_basis(config, [SamplePoint.far(0, 0)])


def _quad_complex(fn, lo, hi):
    real, _ = integrate.quad(lambda t: fn(t).real, lo, hi, limit=200, epsabs=1e-12)
    imag, _ = integrate.quad(lambda t: fn(t).imag, lo, hi, limit=200, epsabs=1e-12)
    return real + 1j * imag


class TestHorn:
    """Compare the closed-form horn factors with numerical quadrature."""

    def test_fresnel_order_and_values(self):
        for x in (0.0, 0.3, 1.0, 2.7):
            c, s = fresnel(x)
            c_ref, _ = integrate.quad(lambda t: math.cos(math.pi * t * t / 2), 0.0, x, epsabs=1e-13)
            s_ref, _ = integrate.quad(lambda t: math.sin(math.pi * t * t / 2), 0.0, x, epsabs=1e-13)
            assert c == pytest.approx(c_ref, abs=1e-8)
            assert s == pytest.approx(s_ref, abs=1e-8)

    def test_fresnel_is_odd(self):
        assert fresnel(0.0) == (0.0, 0.0)
        c, s = fresnel(1.3)
        assert fresnel(-1.3) == (pytest.approx(-c), pytest.approx(-s))

    def test_eplane_even_in_elevation(self):
        config = HornConfig(width=2.0, mouth_height=3.5, slant_radius=2.5)
        elevation = np.linspace(0.0, 1.5, 16)
        assert np.allclose(eplane_factor(config, elevation), eplane_factor(config, -elevation))

    def test_long_flare_approaches_uniform_phase_aperture(self):
        config = HornConfig(width=1.0, mouth_height=2.0, slant_radius=1e6)
        elevation = np.array([0.0, 0.05, 0.2])
        b = config.mouth_height
        # with no quadratic phase the E-plane integral is b * sinc(b sin t)
        uniform = 0.5 * (1 + np.cos(elevation)) * b * np.sinc(b * np.sin(elevation))
        closed = eplane_factor(config, elevation)
        assert np.allclose(closed, uniform, rtol=1e-4, atol=0)

    @pytest.mark.parametrize(
        "config",
        [
            HornConfig(width=1.0, mouth_height=2.0, slant_radius=3.0),
            HornConfig(width=4.5, mouth_height=5.5, slant_radius=3.0),
            HornConfig(width=0.5, mouth_height=0.75, slant_radius=6.0),
        ],
    )
    def test_eplane_factor_matches_quadrature(self, config):
        rho = config.slant_radius
        half = 0.5 * config.mouth_height
        for elevation in (-1.2, -0.3, 0.0, 0.45, 1.5):
            closed = eplane_factor(config, np.array([elevation]))[0]
            integrand = lambda y: np.exp(  # noqa: E731
                -1j * WAVENUMBER * y * y / (2 * rho) + 1j * WAVENUMBER * y * math.sin(elevation)
            )
            numeric = 0.5 * (1 + math.cos(elevation)) * _quad_complex(integrand, -half, half)
            assert abs(closed - numeric) <= 1e-6 * config.mouth_height

    def test_hplane_factor_matches_quadrature(self):
        config = HornConfig(width=2.3, mouth_height=1.0, slant_radius=1.0)
        w = config.width
        for azimuth in (-2.5, -0.8, 0.0, 0.2, 1.1, 3.0):
            closed = hplane_factor(config, np.array([azimuth]))[0]
            numeric, _ = integrate.quad(
                lambda x: math.cos(math.pi * x / w) * math.cos(WAVENUMBER * x * math.sin(azimuth)),
                -w / 2,
                w / 2,
                epsabs=1e-12,
            )
            assert closed == pytest.approx(numeric, abs=1e-8)

    def test_boresight_hplane_value(self):
        # integral of cos(pi x / w) over the mouth is 2w/pi
        config = HornConfig(width=3.0, mouth_height=1.0, slant_radius=1.0)
        assert hplane_factor(config, np.array([0.0]))[0] == pytest.approx(6.0 / math.pi)

    def test_pattern_scales_with_excitation(self):
        config = HornConfig(width=2.0, mouth_height=3.0, slant_radius=4.0)
        dirs = random_directions(np.random.default_rng(6), 10)
        assert np.allclose(
            eplane_horn_pattern(config, [2 - 1j], dirs),
            (2 - 1j) * eplane_horn_pattern(config, [1.0], dirs),
        )

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            HornConfig(width=0.0, mouth_height=1.0, slant_radius=1.0)
        with pytest.raises(ValueError):
            HornConfig(width=1.0, mouth_height=5.0, slant_radius=2.0)


class TestDish:
    """Test the reflector grid and the far-field ray sum."""

    def test_grid_size_and_count(self):
        config = DishConfig(radius_x=2.0, radius_z=3.0, curv_a=0.1, curv_b=0.2, feed=(0.0, 2.0, 0.0))
        grid = reflector_grid(config, n_angular=12, n_radial=5)
        assert len(grid) == 60
        point, weight = grid[0]
        assert point.shape == (3,)
        assert weight > 0.0

    def test_facets_lie_on_surface_inside_rim(self):
        config = DishConfig(radius_x=2.0, radius_z=3.0, curv_a=0.4, curv_b=0.25, feed=(0.0, 1.0, 0.0))
        points, _ = reflector_facets(config, 16, 6)
        u, y, v = points[:, 0], points[:, 1], points[:, 2]
        assert np.allclose(y, 0.4 * u ** 2 + 0.25 * v ** 2)
        assert np.all((u / 2.0) ** 2 + (v / 3.0) ** 2 <= 1.0)

    def test_flat_dish_area(self):
        config = DishConfig(radius_x=2.0, radius_z=1.5, curv_a=0.0, curv_b=0.0, feed=(0.0, 1.0, 0.0))
        _, weights = reflector_facets(config, 20, 10)
        assert weights.sum() == pytest.approx(math.pi * 2.0 * 1.5, rel=1e-12)

    def test_flat_mirror_boresight(self):
        config = DishConfig(radius_x=1.0, radius_z=1.0, curv_a=0.0, curv_b=0.0, feed=(0.0, 5.0, 0.0))
        grid = reflector_grid(config)
        expected = sum(
            weight * np.exp(1j * WAVENUMBER * math.sqrt(point[0] ** 2 + point[2] ** 2 + 25.0))
            for point, weight in grid
        )
        actual = dish_pattern(config, [1.0], [SamplePoint.far(0.0, 0.0)])[0]
        assert abs(actual - expected) <= 1e-10
        assert abs(actual) <= sum(weight for _, weight in grid)

    def test_too_few_angular_points(self):
        config = DishConfig(radius_x=1.0, radius_z=1.0, curv_a=0.1, curv_b=0.1, feed=(0.0, 1.0, 0.0))
        with pytest.raises(ValueError):
            reflector_grid(config, n_angular=2)

    @pytest.mark.parametrize("n_angular", [5, 21, 33])
    def test_odd_angular_count_rejected(self, n_angular):
        config = DishConfig(radius_x=2.0, radius_z=1.0, curv_a=0.3, curv_b=0.5, feed=(0.0, 1.2, 0.3))
        with pytest.raises(ValueError, match="even"):
            reflector_grid(config, n_angular=n_angular)
        with pytest.raises(ValueError, match="even"):
            dish_model(n_angular=n_angular)

    @pytest.mark.parametrize("n_angular", [4, 12, 22, 34])
    def test_grid_mirrors_exactly(self, n_angular):
        config = DishConfig(radius_x=2.0, radius_z=1.0, curv_a=0.3, curv_b=0.5, feed=(0.0, 1.2, 0.3))
        points, weights = reflector_facets(config, n_angular, 5)
        for sign in ((-1.0, 1.0, 1.0), (1.0, 1.0, -1.0)):
            mirrored = points * np.array(sign)
            order = np.lexsort(points.T)
            mirrored_order = np.lexsort(mirrored.T)
            assert np.array_equal(points[order], mirrored[mirrored_order])
            assert np.array_equal(weights[order], weights[mirrored_order])

    def test_matches_direct_summation(self):
        config = DishConfig(radius_x=1.5, radius_z=2.5, curv_a=0.3, curv_b=0.1, feed=(0.2, 1.7, -0.4))
        dirs = random_directions(np.random.default_rng(7), 15)
        grid = reflector_grid(config, 10, 4)
        expected = []
        for point in dirs:
            u = point.direction.unit_vector()
            total = 0j
            for facet, weight in grid:
                path = np.linalg.norm(np.asarray(config.feed) - facet) - facet @ u
                total += weight * np.exp(1j * WAVENUMBER * path)
            expected.append(total)
        actual = dish_pattern(config, [1.0], dirs, n_angular=10, n_radial=4)
        assert np.allclose(actual, expected, rtol=0, atol=1e-10)

    def test_x_mirror_symmetry(self):
        config = DishConfig(radius_x=2.0, radius_z=1.0, curv_a=0.3, curv_b=0.5, feed=(0.0, 1.2, 0.3))
        rng = np.random.default_rng(8)
        dirs = random_directions(rng, 20)
        mirrored = [SamplePoint.far(-p.direction.azimuth, p.direction.elevation) for p in dirs]
        assert np.allclose(dish_basis(config, dirs), dish_basis(config, mirrored), rtol=0, atol=1e-10)

    def test_rejects_invalid_config(self):
        with pytest.raises(ValueError):
            DishConfig(radius_x=0.0, radius_z=1.0, curv_a=0.1, curv_b=0.1, feed=(0, 1, 0))
        with pytest.raises(ValueError):
            DishConfig(radius_x=1.0, radius_z=1.0, curv_a=-0.1, curv_b=0.1, feed=(0, 1, 0))
