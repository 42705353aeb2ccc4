import math

import pytest

from app.models.errors import ReportError, UnsupportedGroupError
from app.services.curves import Curve
from app.services.gauss_bonnet import (
    AffineLimitIdentities,
    E11LimitIdentity,
    ScenarioOutcome,
    SurfaceWithBoundary,
    build_report,
    divergence_slope,
    gb_residual_finite_L,
    limit_identities_affine,
    limit_identity_e11,
)
from app.services.measures_quadrature import TRAPEZOID_NODES, QuadratureResult, QuadratureSpec
from app.services.surfaces import LevelSurface, ParamPatch
from app.utils.extrapolation import extrapolate

AFFINE_X3_AREA = 2 * math.pi * (2 / math.sqrt(3) - 1)
AFFINE_X2_AREA = 2 * math.pi * (2 - math.sqrt(3))
SHORT_FIT_GRID = [4.0 ** k for k in range(2, 8)]


def _with_boundary(name, g, disk):
    s, patch, components = disk
    c = Curve(components, (0.0, 2 * math.pi), closed=True, name=f"{name}-boundary")
    return SurfaceWithBoundary(name, g, s, patch, [c])


def _exact(value):
    return QuadratureResult(value=value, error=0.0, converged=True, levels=1, evaluations=1)


### Finite-L Gauss-Bonnet
@pytest.mark.parametrize("L", [1.0, 4.0])
@pytest.mark.parametrize(
    "group_fixture, disk_fixture",
    [("affine", "affine_x3_disk"), ("affine", "affine_x2_disk"), ("e11", "e11_x3_disk")],
)
def test_finite_L_residual_vanishes(request, group_fixture, disk_fixture, quadrature, L):
    sb = _with_boundary(disk_fixture, request.getfixturevalue(group_fixture), request.getfixturevalue(disk_fixture))
    result = gb_residual_finite_L(sb, L, quadrature)
    assert result.converged
    assert result.rhs == pytest.approx(2 * math.pi / math.sqrt(L))
    assert abs(result.scaled_residual) <= 1e-6
    assert abs(result.flipped_residual) > 1.0 / math.sqrt(L)


def test_annulus_residual_and_limit_on_e11_x1_plane(e11, quadrature):
    patch = ParamPatch(["1", "u1*cos(u2)", "u1*sin(u2)"], ((0.5, 1.0), (0.0, 2 * math.pi)), "e11-x1-annulus", (False, True))
    outer = Curve(["1", "cos(t)", "sin(t)"], (0.0, 2 * math.pi), closed=True, name="outer")
    inner = Curve(["1", "0.5*cos(t)", "-0.5*sin(t)"], (0.0, 2 * math.pi), closed=True, name="inner")
    sb = SurfaceWithBoundary("x1-annulus", e11, LevelSurface("x1 - 1"), patch, [outer, inner], euler_characteristic=0)

    grid = [4.0 ** k for k in range(1, 7)]
    lhs = []
    for L in grid:
        result = gb_residual_finite_L(sb, L, quadrature)
        assert result.rhs == 0.0
        assert abs(result.scaled_residual) <= 1e-6
        lhs.append(result.interior.value + result.boundary_value)

    limit = extrapolate([math.sqrt(L) for L in grid], lhs).limit
    assert limit_identity_e11(sb, quadrature).value == pytest.approx(limit, abs=1e-4)


def test_published_interior_scales_with_L_on_affine_x3_disk(affine, affine_x3_disk, quadrature):
    result = gb_residual_finite_L(_with_boundary("x3-disk", affine, affine_x3_disk), 4.0, quadrature)
    assert result.published_interior.value == pytest.approx(4.0 * result.interior.value, rel=1e-6)
    assert abs(result.published_residual) > 1.0


def test_published_interior_matches_on_e11_x3_disk(e11, e11_x3_disk, quadrature):
    result = gb_residual_finite_L(_with_boundary("x3-disk", e11, e11_x3_disk), 4.0, quadrature)
    assert result.published_interior.value == pytest.approx(result.interior.value, abs=1e-8)
    assert result.published_residual == pytest.approx(result.residual, abs=1e-8)


def test_heisenberg_has_no_published_column(heisenberg, quadrature):
    patch = ParamPatch(["1 + u1*cos(u2)", "u1*sin(u2)", "0"], ((0.0, 0.5), (0.0, 2 * math.pi)), "heisenberg-x3", (False, True))
    boundary = Curve(["1 + 0.5*cos(t)", "0.5*sin(t)", "0"], (0.0, 2 * math.pi), closed=True)
    sb = SurfaceWithBoundary("x3-disk", heisenberg, LevelSurface("x3"), patch, [boundary])
    result = gb_residual_finite_L(sb, 4.0, quadrature)
    assert result.published_interior is None
    assert result.published_residual is None


def test_residual_is_invariant_under_boundary_reparametrisation(e11, e11_x3_disk, quadrature):
    sb = _with_boundary("x3-disk", e11, e11_x3_disk)
    doubled = Curve(["cos(2*t)", "sin(2*t)", "0"], (0.0, math.pi), closed=True, name="x3-disk-boundary-fast")
    fast = SurfaceWithBoundary(sb.name, e11, sb.surface, sb.patch, [doubled])
    for L in (1.0, 4.0):
        reference = gb_residual_finite_L(sb, L, quadrature)
        reparametrised = gb_residual_finite_L(fast, L, quadrature)
        assert reparametrised.boundary_value == pytest.approx(reference.boundary_value, rel=1e-8)
        assert reparametrised.residual == pytest.approx(reference.residual, abs=1e-8)


@pytest.mark.parametrize(
    "group_fixture, disk_fixture", [("affine", "affine_x3_disk"), ("e11", "e11_x1_disk")]
)
def test_residual_is_stable_under_refinement_doubling(request, group_fixture, disk_fixture, quadrature):
    sb = _with_boundary(disk_fixture, request.getfixturevalue(group_fixture), request.getfixturevalue(disk_fixture))
    refined = QuadratureSpec(initial_nodes=2 * TRAPEZOID_NODES)
    coarse = gb_residual_finite_L(sb, 4.0, quadrature)
    fine = gb_residual_finite_L(sb, 4.0, refined)
    assert abs(fine.residual - coarse.residual) <= 1e-6


### Limit identities
def test_affine_area_identity_on_x3_disk(affine, affine_x3_disk, quadrature):
    sb = _with_boundary("x3-disk", affine, affine_x3_disk)
    identities = limit_identities_affine(sb, quadrature)
    assert identities.area.value == pytest.approx(AFFINE_X3_AREA, rel=1e-8)
    flipped = limit_identities_affine(sb.flipped(), quadrature)
    assert flipped.area.value == pytest.approx(-AFFINE_X3_AREA, rel=1e-8)


def test_affine_area_identity_on_x2_disk(affine, affine_x2_disk, quadrature):
    sb = _with_boundary("x2-disk", affine, affine_x2_disk)
    assert limit_identities_affine(sb, quadrature).area.value == pytest.approx(AFFINE_X2_AREA, rel=1e-8)


def test_affine_identities_need_the_affine_group(e11, e11_x3_disk, quadrature):
    with pytest.raises(UnsupportedGroupError):
        limit_identities_affine(_with_boundary("x3-disk", e11, e11_x3_disk), quadrature)


def test_e11_limit_identity_on_x3_disk(e11, e11_x3_disk, quadrature):
    identity = limit_identity_e11(_with_boundary("x3-disk", e11, e11_x3_disk), quadrature)
    assert abs(identity.value) <= 1e-6


def test_e11_limit_identity_on_x1_disk(e11, e11_x1_disk, quadrature):
    identity = limit_identity_e11(_with_boundary("x1-disk", e11, e11_x1_disk), quadrature)
    assert identity.interior.value == pytest.approx(-2 * math.pi / math.sqrt(2) * 0.5651591039924851, rel=1e-6)
    assert abs(identity.value) <= 1e-4


def test_divergence_slope_on_affine_x3_disk(affine, affine_x3_disk, quadrature):
    slope = divergence_slope(_with_boundary("x3-disk", affine, affine_x3_disk), SHORT_FIT_GRID, quadrature)
    assert abs(slope.c1) < 1e-5
    assert slope.c0 == pytest.approx(-AFFINE_X3_AREA, rel=1e-6)
    assert slope.published_prediction == pytest.approx(-AFFINE_X3_AREA, rel=1e-8)
    assert slope.oracle_bounded
    assert slope.reference_expectation == 0.0
    assert slope.consistent is True

    outcome = ScenarioOutcome(
        scenario="affine-divergence", surface=_with_boundary("x3-disk", affine, affine_x3_disk), divergence=slope
    )
    report = build_report([outcome])
    row = report.divergence_slopes[0]
    assert row.reference_expectation == 0.0
    assert row.consistent is True
    assert abs(row.oracle_c1) <= 3 * row.oracle_c1_error + 1e-10


### Report
def test_report_asserts_only_groups_with_exact_tables(affine, e11, affine_x3_disk, e11_x3_disk):
    affine_outcome = ScenarioOutcome(
        scenario="affine-case",
        surface=_with_boundary("x3-disk", affine, affine_x3_disk),
        affine_identities=AffineLimitIdentities(
            area=_exact(AFFINE_X3_AREA), area_bar=_exact(0.1), a_term=_exact(0.0), boundary=[_exact(0.1)]
        ),
    )
    e11_outcome = ScenarioOutcome(
        scenario="e11-case",
        surface=_with_boundary("x3-disk", e11, e11_x3_disk),
        e11_identity=E11LimitIdentity(interior=_exact(0.0), boundary=[_exact(1e-9)]),
    )
    report = build_report([affine_outcome, e11_outcome])

    assert report.scenarios == ["affine-case", "e11-case"]
    assert len(report.table_summaries) == 4
    assert [(d.entry, d.component) for d in report.table_differences] == [("R(X1,X3)X1", "X3")]

    area, second_order, e11_row = report.limit_identities
    assert (area.identity, second_order.identity, e11_row.identity) == ("area", "second-order", "limit-gauss-bonnet")
    assert not area.asserted and area.passed is None
    assert area.traces_to == ["affine_curvature: R(X1,X3)X1 X3"]
    assert second_order.value == pytest.approx(0.0)
    assert e11_row.asserted and e11_row.passed
    assert e11_row.traces_to == []


def test_empty_report_is_an_error():
    with pytest.raises(ReportError):
        build_report([])
