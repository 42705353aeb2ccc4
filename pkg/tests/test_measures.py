import math

import numpy as np
import pytest

from app.services.curves import Curve
from app.services.measures_quadrature import (
    QuadratureSpec,
    area_density_param,
    integrate_curve,
    integrate_patch,
    length_density,
    limit_area_forms,
    surface_measure_density,
)
from app.services.surfaces import LevelSurface, ParamPatch
from app.utils.extrapolation import decay_order

AT = (2.0, 0.5)


@pytest.fixture
def x2_plane_patch():
    return LevelSurface("x2"), ParamPatch(["u1", "0", "u2"], ((1.0, 3.0), (0.0, 1.0)), "x2-plane")


### Length
@pytest.mark.parametrize("L", [1.0, 4.0, 9.0])
def test_length_densities_of_vertical_line(affine, L):
    d = length_density(affine, Curve(["1", "t", "0"]), 0.5, L)
    assert d.ds_L == pytest.approx(math.sqrt(L))
    assert d.ds == pytest.approx(1.0)
    assert d.ds_bar == pytest.approx(0.0)
    assert not bool(d.horizontal)


def test_second_order_length_expansion(affine):
    c = Curve(["2", "t", "0.25*t"])
    grid = [16.0, 64.0, 256.0, 1024.0]
    errors = []
    for L in grid:
        d = length_density(affine, c, 0.0, L)
        errors.append(float(d.ds_L / math.sqrt(L) - d.ds - d.ds_bar / L))
    assert decay_order(grid, errors) >= 1.9


def test_horizontal_point_uses_the_horizontal_form(heisenberg):
    d = length_density(heisenberg, Curve(["t", "0", "0"]), 0.2, 4.0)
    assert bool(d.horizontal)
    assert np.isnan(d.ds_bar)
    assert d.horizontal_form == pytest.approx(0.5)


### Area
@pytest.mark.parametrize("L", [1.0, 4.0, 16.0])
def test_area_densities_on_x2_plane(affine, x2_plane_patch, L):
    s, patch = x2_plane_patch
    u1 = AT[0]
    area = area_density_param(affine, patch, AT, L)
    assert area.finite == pytest.approx(math.sqrt(L + 1) / u1)
    assert area.limit == pytest.approx(1 / u1)
    assert area.printed_limit == pytest.approx(area.limit)
    assert surface_measure_density(affine, s, patch, AT, L) == pytest.approx(area.finite / math.sqrt(L))


def test_limit_area_forms_on_x2_plane(affine, x2_plane_patch):
    s, patch = x2_plane_patch
    sigma, sigma_bar = limit_area_forms(affine, s, patch, AT)
    assert sigma == pytest.approx(1 / AT[0])
    assert sigma_bar == pytest.approx(1 / (2 * AT[0]))


def test_printed_density_only_for_affine(e11):
    patch = ParamPatch(["u1", "u2", "0"], ((0.0, 1.0), (0.0, 1.0)))
    assert area_density_param(e11, patch, (0.3, 0.4), 1.0).printed_limit is None


### Quadrature
def test_periodic_curve_integral():
    c = Curve(["cos(t)", "sin(t)", "0"], (0.0, 2 * math.pi), closed=True)
    result = integrate_curve(lambda t: np.cos(t) ** 2, c)
    assert result.converged
    assert result.value == pytest.approx(math.pi, rel=1e-12)


def test_open_curve_integral():
    result = integrate_curve(lambda t: t ** 2, Curve(["t", "0", "0"]))
    assert result.value == pytest.approx(1 / 3, rel=1e-12)
    assert result.levels == 1


def test_patch_integral():
    patch = ParamPatch(["u1", "u2", "0"], ((0.0, 1.0), (0.0, 2.0)))
    result = integrate_patch(lambda at: np.ones(at.shape[1:]), patch)
    assert result.converged
    assert result.value == pytest.approx(2.0, rel=1e-12)


def test_kink_does_not_converge_with_one_refinement():
    result = integrate_curve(lambda t: np.abs(t - 1 / 3), Curve(["t", "0", "0"]), QuadratureSpec(refinement_limit=1))
    assert not result.converged
    assert result.levels == 1
    assert result.value == pytest.approx(5 / 18, abs=1e-3)


@pytest.mark.parametrize(
    "kwargs",
    [{"tolerance": 0.0}, {"refinement_limit": 0}, {"initial_nodes": 0}, {"rule": "simpson"}],
)
def test_invalid_quadrature_spec(kwargs):
    with pytest.raises(ValueError):
        QuadratureSpec(**kwargs)
