import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.models.errors import EngineError, ReportError, UnsupportedGroupError
from app.models.schemas import (
    DivergenceRow,
    GBReportSchema,
    GBResidualRow,
    LimitIdentityRow,
    TableDifferenceRow,
    TableSummaryRow,
)
from app.services.connection_curvature import TableComparison, compare_tables, koszul_connection
from app.services.curves import CLOSED_FORM_GROUPS, HORIZONTAL_TOLERANCE, Curve
from app.services.groups import GroupModel
from app.services.measures_quadrature import (
    QuadratureResult,
    QuadratureSpec,
    area_density_param,
    integrate_curve,
    integrate_patch,
    length_density,
    limit_area_forms,
)
from app.services.surfaces import (
    LevelSurface,
    ParamPatch,
    gaussian_curvature_extrinsic,
    gaussian_curvature_intrinsic,
    gaussian_limit_published,
    geodesic_curvature,
    limit_line_density,
    require_positive_L,
    surface_frames,
)
from app.utils.extrapolation import DEFAULT_FIT_EXPONENTS, DEFAULT_FIT_GRID, MonomialFit, fit_monomials
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

E11_IDENTITY_TOLERANCE = 1e-4
ERROR_BARS = 3.0
ORACLE_FLOOR = 1e-10
ORACLE_FRACTIONS = (0.25, 0.5, 0.75)


@dataclass
class SurfaceWithBoundary:
    name: str
    group: GroupModel
    surface: LevelSurface
    patch: ParamPatch
    boundary: List[Curve]
    euler_characteristic: int = 1

    def flipped(self) -> "SurfaceWithBoundary":
        return SurfaceWithBoundary(
            self.name, self.group, self.surface.flipped(), self.patch, self.boundary, self.euler_characteristic
        )


@dataclass
class GBResidual:
    L: float
    interior: QuadratureResult
    boundary: List[QuadratureResult]
    rhs: float
    published_interior: Optional[QuadratureResult] = None

    @property
    def boundary_value(self) -> float:
        return math.fsum(b.value for b in self.boundary)

    @property
    def boundary_error(self) -> float:
        return math.fsum(b.error for b in self.boundary)

    @property
    def residual(self) -> float:
        return self.interior.value + self.boundary_value - self.rhs

    @property
    def flipped_residual(self) -> float:
        """Residual with every boundary traversed the other way."""
        return self.interior.value - self.boundary_value - self.rhs

    @property
    def published_residual(self) -> Optional[float]:
        """Residual with the interior curvature taken from the published tables and the closed-form II."""
        if self.published_interior is None:
            return None
        return self.published_interior.value + self.boundary_value - self.rhs

    @property
    def scaled_residual(self) -> float:
        return self.residual * math.sqrt(self.L)

    @property
    def converged(self) -> bool:
        return self.interior.converged and all(b.converged for b in self.boundary)


@dataclass
class AffineLimitIdentities:
    """Area identity int q_bar^2 d sigma and the second-order identity, with their pieces."""
    area: QuadratureResult
    area_bar: QuadratureResult
    a_term: QuadratureResult
    boundary: List[QuadratureResult]
    band_nodes: int = 0

    @property
    def second_order(self) -> float:
        return -self.area_bar.value + self.a_term.value + math.fsum(b.value for b in self.boundary)

    @property
    def second_order_error(self) -> float:
        return self.area_bar.error + self.a_term.error + math.fsum(b.error for b in self.boundary)

    @property
    def converged(self) -> bool:
        parts = [self.area, self.area_bar, self.a_term] + list(self.boundary)
        return all(p.converged for p in parts)


@dataclass
class E11LimitIdentity:
    interior: QuadratureResult
    boundary: List[QuadratureResult]
    band_nodes: int = 0

    @property
    def value(self) -> float:
        return self.interior.value + math.fsum(b.value for b in self.boundary)

    @property
    def error(self) -> float:
        return self.interior.error + math.fsum(b.error for b in self.boundary)

    @property
    def converged(self) -> bool:
        return self.interior.converged and all(b.converged for b in self.boundary)


@dataclass
class DivergenceSlope:
    fit: MonomialFit
    grid: List[float]
    values: List[float]
    published_prediction: Optional[float] = None
    oracle_c1: Optional[float] = None
    oracle_c1_error: float = 0.0

    @property
    def c1(self) -> float:
        return self.fit.coefficient(1.0)

    @property
    def c0(self) -> float:
        return self.fit.coefficient(0.0)

    @property
    def within_error_bars(self) -> bool:
        return abs(self.c1) <= ERROR_BARS * self.fit.error(1.0)

    @property
    def oracle_bounded(self) -> bool:
        """The intrinsic curvature carries no L^1 term at the sampled points."""
        if self.oracle_c1 is None:
            return False
        return abs(self.oracle_c1) <= ERROR_BARS * self.oracle_c1_error + ORACLE_FLOOR

    @property
    def reference_expectation(self) -> Optional[float]:
        return 0.0 if self.oracle_bounded else None

    @property
    def consistent(self) -> Optional[bool]:
        return self.within_error_bars if self.oracle_bounded else None


@dataclass
class ScenarioOutcome:
    scenario: str
    surface: SurfaceWithBoundary
    gb_rows: List[GBResidual] = field(default_factory=list)
    affine_identities: Optional[AffineLimitIdentities] = None
    e11_identity: Optional[E11LimitIdentity] = None
    divergence: Optional[DivergenceSlope] = None


# 📌 **Finite-L Gauss-Bonnet**
def _interior_integral(sb: SurfaceWithBoundary, L: float, spec: QuadratureSpec, mode: str = "reference") -> QuadratureResult:
    g, s, patch = sb.group, sb.surface, sb.patch
    sqrt_L = math.sqrt(L)

    def density(at: np.ndarray) -> np.ndarray:
        K = gaussian_curvature_extrinsic(g, s, patch.point(at), L, mode=mode)
        return K * area_density_param(g, patch, at, L).finite / sqrt_L

    return integrate_patch(density, patch, spec)


def gb_residual_finite_L(
    sb: SurfaceWithBoundary, L: float, spec: Optional[QuadratureSpec] = None, published: bool = True
) -> GBResidual:
    """
    int K^{Sigma,L} (1/sqrt L) d sigma_{Sigma,L} + sum int k^{L,s} (1/sqrt L) ds_L
    against 2 pi chi / sqrt(L).
    :param published: Also integrate the published-table curvature where closed forms exist.
    """
    spec = spec or QuadratureSpec()
    L = require_positive_L(L)
    try:
        g, s = sb.group, sb.surface
        connection = koszul_connection(g)
        sqrt_L = math.sqrt(L)
        interior = _interior_integral(sb, L, spec)
        boundary = []
        for c in sb.boundary:

            def density(t: np.ndarray, c: Curve = c) -> np.ndarray:
                k = geodesic_curvature(g, s, c, t, L, connection).signed
                return k * length_density(g, c, t, L).ds_L / sqrt_L

            boundary.append(integrate_curve(density, c, spec))
        published_interior = None
        if published and g.name in CLOSED_FORM_GROUPS:
            published_interior = _interior_integral(sb, L, spec, mode="published")
        result = GBResidual(
            L=L,
            interior=interior,
            boundary=boundary,
            rhs=2 * math.pi * sb.euler_characteristic / sqrt_L,
            published_interior=published_interior,
        )
        logger.info(f"{sb.name} L={L:g}: Gauss-Bonnet residual {result.residual:.3e} (flipped {result.flipped_residual:.3e})")
        return result
    except EngineError as e:
        logger.error(f"Gauss-Bonnet evaluation failed for {sb.name} at L={L}: {str(e)}", exc_info=True)
        raise


# 📌 **Limit identities**
def _banded_boundary(sb: SurfaceWithBoundary, c: Curve, spec: QuadratureSpec, weight: Callable, excluded: bool):
    """
    Integrates weight(density, omega, h) of the product-form limit density
    along c; nodes with |omega| below the horizontality threshold are counted
    and, when `excluded`, contribute zero.
    """
    counts = []
    connection = koszul_connection(sb.group)

    def integrand(t: np.ndarray) -> np.ndarray:
        density, omega, h = limit_line_density(sb.group, sb.surface, c, t, connection)
        scale = np.maximum(1.0, np.maximum(np.sqrt(h), np.abs(omega)))
        band = np.abs(omega) < HORIZONTAL_TOLERANCE * scale
        counts.append(int(np.count_nonzero(band)))
        with np.errstate(divide="ignore", invalid="ignore"):
            values = weight(density, omega, h)
        return np.where(band, 0.0, values) if excluded else values

    result = integrate_curve(integrand, c, spec)
    return result, counts[-1] if counts else 0


def limit_identities_affine(sb: SurfaceWithBoundary, spec: Optional[QuadratureSpec] = None) -> AffineLimitIdentities:
    """
    int q_bar^2 d sigma and
    -int q_bar^2 d sigma_bar + int A d sigma + sum int k^{inf,s} ds_bar,
    reported with quadrature errors; horizontal boundary nodes are excluded.
    """
    spec = spec or QuadratureSpec()
    g, s, patch = sb.group, sb.surface, sb.patch
    if g.name != "affine":
        raise UnsupportedGroupError(f"Affine limit identities need the affine group, got '{g.name}'")
    try:

        def q2(at: np.ndarray) -> np.ndarray:
            return surface_frames(g, s, patch.point(at), 1.0).q_bar ** 2

        area = integrate_patch(lambda at: q2(at) * limit_area_forms(g, s, patch, at)[0], patch, spec)
        area_bar = integrate_patch(lambda at: q2(at) * limit_area_forms(g, s, patch, at)[1], patch, spec)
        a_term = integrate_patch(
            lambda at: gaussian_limit_published(g, s, patch.point(at)).a_value * limit_area_forms(g, s, patch, at)[0],
            patch,
            spec,
        )
        boundary, band_nodes = [], 0
        for c in sb.boundary:
            result, count = _banded_boundary(sb, c, spec, lambda k, omega, h: k * h / (2 * omega ** 2), excluded=True)
            boundary.append(result)
            band_nodes += count
        identities = AffineLimitIdentities(area=area, area_bar=area_bar, a_term=a_term, boundary=boundary, band_nodes=band_nodes)
        logger.info(
            f"{sb.name}: area identity {area.value:.9f}, second-order identity {identities.second_order:.6e} "
            f"({band_nodes} boundary nodes in the horizontal band)"
        )
        return identities
    except EngineError as e:
        logger.error(f"Affine limit identities failed for {sb.name}: {str(e)}", exc_info=True)
        raise


def limit_identity_e11(sb: SurfaceWithBoundary, spec: Optional[QuadratureSpec] = None) -> E11LimitIdentity:
    """int K^{Sigma,inf} d sigma + sum int k^{inf,s} ds; the boundary term is continuous through horizontal points."""
    spec = spec or QuadratureSpec()
    g, s, patch = sb.group, sb.surface, sb.patch
    if g.name != "e11":
        raise UnsupportedGroupError(f"E(1,1) limit identity needs the e11 group, got '{g.name}'")
    try:
        interior = integrate_patch(
            lambda at: gaussian_limit_published(g, s, patch.point(at)).e11_value * limit_area_forms(g, s, patch, at)[0],
            patch,
            spec,
        )
        boundary, band_nodes = [], 0
        for c in sb.boundary:
            result, count = _banded_boundary(sb, c, spec, lambda k, omega, h: k, excluded=False)
            boundary.append(result)
            band_nodes += count
        identity = E11LimitIdentity(interior=interior, boundary=boundary, band_nodes=band_nodes)
        logger.info(f"{sb.name}: limit Gauss-Bonnet value {identity.value:.3e} +/- {identity.error:.1e}")
        return identity
    except EngineError as e:
        logger.error(f"E(1,1) limit identity failed for {sb.name}: {str(e)}", exc_info=True)
        raise


def _oracle_points(patch: ParamPatch) -> np.ndarray:
    (lo1, hi1), (lo2, hi2) = patch.domain
    u1 = [lo1 + f * (hi1 - lo1) for f in ORACLE_FRACTIONS]
    u2 = [lo2 + f * (hi2 - lo2) for f in ORACLE_FRACTIONS]
    return np.array(np.meshgrid(u1, u2, indexing="ij")).reshape(2, -1)


def intrinsic_divergence(sb: SurfaceWithBoundary, grid: Sequence[float] = tuple(DEFAULT_FIT_GRID)) -> Tuple[float, float]:
    """
    Largest L^1 coefficient of the intrinsic (Brioschi) curvature over interior
    sample points of the patch, with its error bar.
    """
    at = _oracle_points(sb.patch)
    samples = np.array([gaussian_curvature_intrinsic(sb.group, sb.patch, at, L) for L in grid])
    worst, worst_error, margin = 0.0, 0.0, -math.inf
    for column in samples.T:
        noise = 64 * np.finfo(float).eps * np.asarray(grid) * max(1.0, float(np.max(np.abs(column))))
        fit = fit_monomials(grid, column, DEFAULT_FIT_EXPONENTS, noise)
        c1, error = fit.coefficient(1.0), fit.error(1.0)
        if abs(c1) - ERROR_BARS * error > margin:
            worst, worst_error, margin = c1, error, abs(c1) - ERROR_BARS * error
    return worst, worst_error


def divergence_slope(
    sb: SurfaceWithBoundary, grid: Sequence[float] = tuple(DEFAULT_FIT_GRID), spec: Optional[QuadratureSpec] = None
) -> DivergenceSlope:
    """
    Fits int K^{Sigma,L} (1/sqrt L) d sigma_{Sigma,L} over the grid; c1 is
    compared with -int q_bar^2 d sigma (published asymptotics) and with the
    expectation certified by the intrinsic curvature.
    """
    spec = spec or QuadratureSpec()
    results = [_interior_integral(sb, L, spec) for L in grid]
    values = [r.value for r in results]
    fit = fit_monomials(grid, values, DEFAULT_FIT_EXPONENTS, [r.error for r in results])
    prediction = None
    if sb.group.name == "affine":
        g, s, patch = sb.group, sb.surface, sb.patch
        area = integrate_patch(
            lambda at: surface_frames(g, s, patch.point(at), 1.0).q_bar ** 2 * limit_area_forms(g, s, patch, at)[0],
            patch,
            spec,
        )
        prediction = -area.value
    elif sb.group.name == "e11":
        prediction = 0.0
    oracle_c1, oracle_error = intrinsic_divergence(sb, grid)
    slope = DivergenceSlope(
        fit=fit,
        grid=[float(L) for L in grid],
        values=values,
        published_prediction=prediction,
        oracle_c1=oracle_c1,
        oracle_c1_error=oracle_error,
    )
    logger.info(f"{sb.name}: divergence slope c1 = {slope.c1:.3e} +/- {fit.error(1.0):.1e}, c0 = {slope.c0:.9f}")
    if not slope.oracle_bounded:
        logger.warning(f"{sb.name}: intrinsic curvature grows with L (c1 = {oracle_c1:.3e}); no reference expectation")
    return slope


# 📌 **Report**
def _traces(comparisons: Sequence[TableComparison]) -> List[str]:
    return [f"{d.table}: {d.entry} {d.component}" for comp in comparisons for d in comp.differences]


def table_rows(comparisons: Sequence[TableComparison]) -> Tuple[List[TableSummaryRow], List[TableDifferenceRow]]:
    summaries, differences = [], []
    for comp in comparisons:
        summaries.append(
            TableSummaryRow(
                table=comp.table,
                group=comp.group_name,
                kind="connection" if comp.table.endswith("connection") else "curvature",
                entries_compared=comp.entries_compared,
                matching=comp.matching,
                exact=comp.exact,
            )
        )
        differences.extend(TableDifferenceRow(group=comp.group_name, **vars(d)) for d in comp.differences)
    return summaries, differences


def build_report(outcomes: Sequence[ScenarioOutcome]) -> GBReportSchema:
    """
    Deterministic report in scenario order. Identities are asserted only for
    groups whose derived tables match the published ones exactly; otherwise
    they are observations annotated with the differing table entries.
    """
    if not outcomes:
        raise ReportError("No scenario results to report")
    report = GBReportSchema()
    comparisons_by_group = {}
    for outcome in outcomes:
        g = outcome.surface.group
        if g.name not in comparisons_by_group:
            comparisons_by_group[g.name] = compare_tables(g)
            summaries, differences = table_rows(comparisons_by_group[g.name])
            report.table_summaries.extend(summaries)
            report.table_differences.extend(differences)
        if outcome.scenario not in report.scenarios:
            report.scenarios.append(outcome.scenario)

        comparisons = comparisons_by_group[g.name]
        exact = bool(comparisons) and all(c.exact for c in comparisons)
        traces = _traces(comparisons)
        sb = outcome.surface

        for row in outcome.gb_rows:
            report.gb_residuals.append(
                GBResidualRow(
                    scenario=outcome.scenario,
                    surface=sb.name,
                    L=row.L,
                    interior=row.interior.value,
                    interior_error=row.interior.error,
                    boundary=row.boundary_value,
                    boundary_error=row.boundary_error,
                    rhs=row.rhs,
                    residual=row.residual,
                    scaled_residual=row.scaled_residual,
                    flipped_residual=row.flipped_residual,
                    interior_published=row.published_interior.value if row.published_interior is not None else None,
                    residual_published=row.published_residual,
                    converged=row.converged,
                )
            )
        if outcome.affine_identities is not None:
            ids = outcome.affine_identities
            for identity, value, error in (
                ("area", ids.area.value, ids.area.error),
                ("second-order", ids.second_order, ids.second_order_error),
            ):
                report.limit_identities.append(
                    LimitIdentityRow(
                        scenario=outcome.scenario,
                        surface=sb.name,
                        identity=identity,
                        value=value,
                        error=error,
                        band_nodes=ids.band_nodes if identity == "second-order" else 0,
                        converged=ids.converged,
                        asserted=exact,
                        passed=(abs(value) <= E11_IDENTITY_TOLERANCE) if exact else None,
                        traces_to=traces,
                    )
                )
        if outcome.e11_identity is not None:
            identity = outcome.e11_identity
            report.limit_identities.append(
                LimitIdentityRow(
                    scenario=outcome.scenario,
                    surface=sb.name,
                    identity="limit-gauss-bonnet",
                    value=identity.value,
                    error=identity.error,
                    band_nodes=identity.band_nodes,
                    converged=identity.converged,
                    asserted=exact,
                    passed=(abs(identity.value) <= E11_IDENTITY_TOLERANCE) if exact else None,
                    traces_to=traces,
                )
            )
        if outcome.divergence is not None:
            slope = outcome.divergence
            report.divergence_slopes.append(
                DivergenceRow(
                    scenario=outcome.scenario,
                    surface=sb.name,
                    c1=slope.c1,
                    c1_error=slope.fit.error(1.0),
                    c0=slope.c0,
                    c0_error=slope.fit.error(0.0),
                    published_prediction=slope.published_prediction,
                    reference_expectation=slope.reference_expectation,
                    oracle_c1=slope.oracle_c1,
                    oracle_c1_error=slope.oracle_c1_error,
                    within_error_bars=slope.within_error_bars,
                    consistent=slope.consistent,
                    condition_number=slope.fit.condition_number,
                )
            )
    return report
