import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from app.models.errors import DomainViolationError, EngineError, ScenarioValidationError
from app.models.schemas import (
    CurveCurvatureRow,
    CurveDto,
    CurveLimitRow,
    GBReportSchema,
    GroupDefinitionDto,
    RunResultSchema,
    ScenarioSchema,
    SurfaceCurvatureRow,
    SurfaceDto,
    TableDifferenceRow,
    TableSummaryRow,
)
from app.services.config_service import ConfigService
from app.services.connection_curvature import (
    compare_tables,
    curvature_symmetry_defects,
    derived_tables,
    metric_defects,
    torsion_defects,
)
from app.services.curves import Curve, curve_curvature, extrapolate_curvature
from app.services.gauss_bonnet import (
    ScenarioOutcome,
    SurfaceWithBoundary,
    build_report,
    divergence_slope,
    gb_residual_finite_L,
    limit_identities_affine,
    limit_identity_e11,
    table_rows,
)
from app.services.groups import GroupModel, builtin_group, builtin_names, sample_domain_points, validate_group
from app.services.measures_quadrature import QuadratureSpec
from app.services.surfaces import (
    CLOSED_FORM_GROUPS,
    CURVE_ON_SURFACE_TOLERANCE,
    LevelSurface,
    ParamPatch,
    extrapolate_geodesic_curvature,
    gaussian_curvature_extrinsic,
    geodesic_curvature,
    mean_curvature,
    second_fundamental_form_closed,
    second_fundamental_form_def,
    surface_frames,
)
from app.utils.extrapolation import DEFAULT_CURVE_GRID, DEFAULT_FIT_GRID
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

PIPELINES = ("gauss-bonnet", "limit-identities", "curve-curvature", "surface-curvature")
SAMPLES_PER_AXIS = 7
BOUNDARY_SAMPLES = 33
GROUP_VALIDATION_POINTS = 16


@dataclass
class ScenarioRun:
    """Everything one scenario produced, in input order."""
    name: str
    outcomes: List[ScenarioOutcome] = field(default_factory=list)
    curve_rows: List[CurveCurvatureRow] = field(default_factory=list)
    curve_limit_rows: List[CurveLimitRow] = field(default_factory=list)
    surface_rows: List[SurfaceCurvatureRow] = field(default_factory=list)


@dataclass
class ValidatedScenario:
    schema: ScenarioSchema
    group: GroupModel
    surfaces: Dict[str, Tuple[LevelSurface, Optional[ParamPatch], List[Curve]]]
    curves: List[Tuple[Curve, List[float], Optional[str]]]


def _location(error: Dict) -> str:
    return ".".join(str(part) for part in error.get("loc", ()))


class ScenarioService:
    """
    Loads, validates and runs scenario files, and writes the CSV tables, the
    JSON report and the plain-text summary.
    """
    def __init__(self, config: Optional[ConfigService] = None):
        self.config = config or ConfigService()
        logger.info("ScenarioService initialized successfully.")

    # 📌 **Loading**
    def load(self, path: str) -> ScenarioSchema:
        """
        Reads and schema-validates a scenario file.
        :param path: Path to a JSON scenario.
        :return: ScenarioSchema.
        """
        try:
            with open(path, "r", encoding="utf-8") as handle:
                data = json.load(handle)
        except json.JSONDecodeError as e:
            logger.error(f"Scenario file {path} is not valid JSON: {str(e)}", exc_info=True)
            raise ScenarioValidationError(e.msg, f"{path}:{e.lineno}:{e.colno}")
        except OSError as e:
            logger.error(f"Scenario file {path} could not be read: {str(e)}", exc_info=True)
            raise ScenarioValidationError(e.strerror or str(e), path)
        return self.parse(data, source=path)

    def parse(self, data: Dict, source: str = "scenario") -> ScenarioSchema:
        try:
            return ScenarioSchema.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            logger.error(f"Scenario {source} failed schema validation: {str(e)}", exc_info=True)
            raise ScenarioValidationError(first["msg"], f"{source}: {_location(first)}")

    # 📌 **Validation**
    def build_group(self, scenario: ScenarioSchema) -> GroupModel:
        if (scenario.group is None) == (scenario.group_definition is None):
            raise ScenarioValidationError("exactly one of 'group' or 'group_definition' is required", "group")
        if scenario.group is not None:
            return builtin_group(scenario.group)
        return self.group_from_definition(scenario.group_definition)

    @staticmethod
    def group_from_definition(definition: GroupDefinitionDto) -> GroupModel:
        brackets = {}
        for key, values in definition.brackets.items():
            if len(key) != 2 or not key.isdigit() or len(values) != 3:
                raise ScenarioValidationError(f"bad bracket entry '{key}'", "group_definition.brackets")
            brackets[(int(key[0]), int(key[1]))] = values
        coordinate = definition.domain_coordinate - 1 if definition.domain_coordinate is not None else None
        try:
            g = GroupModel(
                definition.name,
                definition.frame,
                definition.coframe,
                brackets,
                domain_coordinate=coordinate,
                domain_lower=definition.domain_lower,
            )
            validate_group(g, sample_domain_points(g, GROUP_VALIDATION_POINTS))
            return g
        except EngineError as e:
            raise ScenarioValidationError(str(e), "group_definition")

    @staticmethod
    def _check_samples(g: GroupModel, s: LevelSurface, points: np.ndarray, location: str) -> None:
        try:
            g.check_domain(points)
        except DomainViolationError as e:
            raise ScenarioValidationError(f"violates the domain predicate {g.domain_description()} ({str(e)})", location)
        off = float(np.max(np.abs(s.value(points))))
        if off > CURVE_ON_SURFACE_TOLERANCE:
            raise ScenarioValidationError(f"leaves the surface {s.u} = 0 by {off:.3e}", location)

    @staticmethod
    def build_curve(dto: CurveDto, location: str) -> Curve:
        try:
            return Curve(dto.components, tuple(dto.interval), closed=dto.closed, name=dto.name)
        except EngineError as e:
            raise ScenarioValidationError(str(e), location)

    def build_surface(
        self, g: GroupModel, dto: SurfaceDto, location: str
    ) -> Tuple[LevelSurface, Optional[ParamPatch], List[Curve]]:
        """Parses one surface and checks its patch, boundary and sample points against u = 0 and the domain."""
        try:
            s = LevelSurface(dto.u, orientation=dto.orientation, name=dto.name)
            patch = None
            if dto.patch is not None:
                patch = ParamPatch(
                    dto.patch.f, dto.patch.domain, name=dto.name, periodic=tuple(dto.patch.periodic)
                )
        except (EngineError, ValueError) as e:
            raise ScenarioValidationError(str(e), location)

        if patch is not None:
            axes = [np.linspace(lo, hi, SAMPLES_PER_AXIS) for lo, hi in patch.domain]
            at = np.array(np.meshgrid(*axes, indexing="ij"))
            self._check_samples(g, s, patch.point(at), f"{location}.patch")

        boundary = []
        for i, curve_dto in enumerate(dto.boundary):
            where = f"{location}.boundary[{i}]"
            c = self.build_curve(curve_dto, where)
            if not c.closed:
                raise ScenarioValidationError("boundary curves must be closed", where)
            t = np.linspace(c.interval[0], c.interval[1], BOUNDARY_SAMPLES)
            self._check_samples(g, s, c.point(t), where)
            boundary.append(c)

        if dto.points:
            points = np.asarray(dto.points, dtype=float)
            if points.ndim != 2 or points.shape[1] != 3:
                raise ScenarioValidationError("points must be [x1, x2, x3] triples", f"{location}.points")
            self._check_samples(g, s, points.T, f"{location}.points")
        return s, patch, boundary

    def validate(self, scenario: ScenarioSchema) -> ValidatedScenario:
        """
        Resolves the group and every expression, and checks domains and
        on-surface conditions; errors carry the offending location.
        """
        try:
            for i, name in enumerate(scenario.pipelines):
                if name not in PIPELINES:
                    raise ScenarioValidationError(f"unknown pipeline '{name}'; expected one of {list(PIPELINES)}", f"pipelines[{i}]")
            for key, grid in (("l_grid", scenario.l_grid), ("fit_grid", scenario.fit_grid or [])):
                if any(L <= 0 for L in grid):
                    raise ScenarioValidationError("L values must be positive", key)
            g = self.build_group(scenario)
            surfaces = {}
            for i, dto in enumerate(scenario.surfaces):
                if dto.name in surfaces:
                    raise ScenarioValidationError(f"duplicate surface name '{dto.name}'", f"surfaces[{i}].name")
                surfaces[dto.name] = self.build_surface(g, dto, f"surfaces[{i}]")
            curves = []
            for i, query in enumerate(scenario.curves):
                where = f"curves[{i}]"
                c = self.build_curve(query.curve, f"{where}.curve")
                if query.surface is not None and query.surface not in surfaces:
                    raise ScenarioValidationError(f"unknown surface '{query.surface}'", f"{where}.surface")
                try:
                    g.check_domain(c.point(np.asarray(query.t, dtype=float)))
                except DomainViolationError as e:
                    raise ScenarioValidationError(
                        f"violates the domain predicate {g.domain_description()} ({str(e)})", f"{where}.t"
                    )
                curves.append((c, list(query.t), query.surface))
            logger.info(f"Scenario '{scenario.name}' validated: {len(surfaces)} surfaces, {len(curves)} curve queries.")
            return ValidatedScenario(schema=scenario, group=g, surfaces=surfaces, curves=curves)
        except ScenarioValidationError as e:
            logger.error(f"Scenario '{scenario.name}' is invalid: {str(e)}", exc_info=True)
            raise

    # 📌 **Pipelines**
    def _quadrature(self, scenario: ScenarioSchema, tolerance: Optional[float]) -> QuadratureSpec:
        q = scenario.quadrature
        return QuadratureSpec(
            rule=q.rule,
            initial_nodes=q.initial_nodes,
            refinement_limit=q.refinement_limit,
            tolerance=tolerance or q.tolerance,
        )

    def gauss_bonnet_rows(self, sb: SurfaceWithBoundary, l_grid: Sequence[float], spec: QuadratureSpec):
        with ThreadPoolExecutor(max_workers=self.config.get_workers()) as pool:
            return list(pool.map(lambda L: gb_residual_finite_L(sb, L, spec), l_grid))

    def curve_curvature(
        self,
        g: GroupModel,
        c: Curve,
        ts: Sequence[float],
        l_grid: Sequence[float],
        surface: Optional[LevelSurface] = None,
    ) -> Tuple[List[CurveCurvatureRow], List[CurveLimitRow]]:
        """Per-(t, L) curvature rows and one classification/extrapolation row per t."""
        rows, limits = [], []
        for t in ts:
            for L in l_grid:
                signed = float(geodesic_curvature(g, surface, c, t, L).signed) if surface is not None else None
                rows.append(
                    CurveCurvatureRow(
                        group=g.name,
                        curve=c.name,
                        t=t,
                        L=L,
                        curvature=float(curve_curvature(g, c, t, L)),
                        geodesic_signed=signed,
                        surface=surface.name if surface is not None else None,
                    )
                )
            if surface is not None:
                result = extrapolate_geodesic_curvature(g, surface, c, t, DEFAULT_CURVE_GRID)
            else:
                result = extrapolate_curvature(g, c, t, DEFAULT_CURVE_GRID)
            limits.append(
                CurveLimitRow(
                    group=g.name,
                    curve=c.name,
                    t=t,
                    classification=result.classification.value,
                    predicted=result.predicted,
                    fitted=result.fitted,
                    observed_order=result.observed_order,
                    flagged=result.flagged,
                    surface=surface.name if surface is not None else None,
                )
            )
        return rows, limits

    def surface_curvature(
        self, g: GroupModel, s: LevelSurface, points: Sequence[Sequence[float]], l_grid: Sequence[float]
    ) -> List[SurfaceCurvatureRow]:
        """
        Pointwise frame data, H_L and K^{Sigma,L} in reference and published mode,
        the symmetry residual of II^L and the gap between its two routes.
        """
        rows = []
        closed_form = g.name in CLOSED_FORM_GROUPS
        for point in points:
            for L in l_grid:
                frames = surface_frames(g, s, point, L)
                form = second_fundamental_form_def(g, s, point, L)
                route = None
                if closed_form:
                    closed = second_fundamental_form_closed(g, s, point, L)
                    route = float(np.max(np.abs(form.matrix - closed.matrix)))
                rows.append(
                    SurfaceCurvatureRow(
                        group=g.name,
                        surface=s.name,
                        x1=point[0],
                        x2=point[1],
                        x3=point[2],
                        L=L,
                        p_bar=float(frames.p_bar),
                        q_bar=float(frames.q_bar),
                        mean_curvature=float(mean_curvature(g, s, point, L)),
                        gaussian_reference=float(gaussian_curvature_extrinsic(g, s, point, L)),
                        gaussian_published=float(gaussian_curvature_extrinsic(g, s, point, L, mode="published")) if closed_form else None,
                        symmetry_residual=float(np.max(form.symmetry_defect)),
                        route_residual=route,
                    )
                )
        return rows

    def execute(
        self,
        scenario: ScenarioSchema,
        pipelines: Optional[Sequence[str]] = None,
        tolerance: Optional[float] = None,
        l_grid: Optional[Sequence[float]] = None,
    ) -> ScenarioRun:
        """Runs the requested pipelines of one scenario without writing anything."""
        validated = self.validate(scenario)
        g = validated.group
        pipelines = list(pipelines or scenario.pipelines)
        l_grid = list(l_grid or scenario.l_grid)
        fit_grid = list(scenario.fit_grid or DEFAULT_FIT_GRID)
        spec = self._quadrature(scenario, tolerance)
        run = ScenarioRun(name=scenario.name)
        logger.info(f"Running scenario '{scenario.name}' ({g.name}): {', '.join(pipelines)}")
        try:
            for dto in scenario.surfaces:
                s, patch, boundary = validated.surfaces[dto.name]
                if "surface-curvature" in pipelines and dto.points:
                    run.surface_rows.extend(self.surface_curvature(g, s, dto.points, l_grid))
                if patch is None or not boundary:
                    continue
                sb = SurfaceWithBoundary(dto.name, g, s, patch, boundary, dto.euler_characteristic)
                outcome = ScenarioOutcome(scenario=scenario.name, surface=sb)
                if "gauss-bonnet" in pipelines:
                    outcome.gb_rows = self.gauss_bonnet_rows(sb, l_grid, spec)
                if "limit-identities" in pipelines:
                    if g.name == "affine":
                        outcome.affine_identities = limit_identities_affine(sb, spec)
                    elif g.name == "e11":
                        outcome.e11_identity = limit_identity_e11(sb, spec)
                    else:
                        logger.warning(f"No published limit identity for group '{g.name}'; fitting the divergence slope only.")
                    outcome.divergence = divergence_slope(sb, fit_grid, spec)
                run.outcomes.append(outcome)

            if "curve-curvature" in pipelines:
                for c, ts, surface_name in validated.curves:
                    surface = validated.surfaces[surface_name][0] if surface_name else None
                    rows, limits = self.curve_curvature(g, c, ts, l_grid, surface)
                    run.curve_rows.extend(rows)
                    run.curve_limit_rows.extend(limits)
            logger.info(f"Scenario '{scenario.name}' finished.")
            return run
        except EngineError as e:
            logger.error(f"Scenario '{scenario.name}' failed: {str(e)}", exc_info=True)
            raise

    def run(
        self,
        scenarios: Sequence[ScenarioSchema],
        out_dir: Optional[str] = None,
        pipelines: Optional[Sequence[str]] = None,
        tolerance: Optional[float] = None,
        l_grid: Optional[Sequence[float]] = None,
    ) -> Tuple[RunResultSchema, Optional[GBReportSchema]]:
        """
        Executes scenarios concurrently, assembles one report in input order
        and writes CSV, JSON and summary outputs.
        :return: RunResultSchema and the report (None when no surface pipeline ran).
        """
        out_dir = out_dir or self.config.get_output_dir()
        with ThreadPoolExecutor(max_workers=self.config.get_workers()) as pool:
            runs = list(pool.map(lambda sc: self.execute(sc, pipelines, tolerance, l_grid), scenarios))

        outcomes = [o for r in runs for o in r.outcomes]
        report = build_report(outcomes) if outcomes else None
        os.makedirs(out_dir, exist_ok=True)
        outputs = []
        tables = {
            "curve_curvature.csv": [row for r in runs for row in r.curve_rows],
            "curve_limits.csv": [row for r in runs for row in r.curve_limit_rows],
            "surface_curvature.csv": [row for r in runs for row in r.surface_rows],
        }
        if report is not None:
            tables.update(
                {
                    "gb_residuals.csv": report.gb_residuals,
                    "limit_identities.csv": report.limit_identities,
                    "divergence_slopes.csv": report.divergence_slopes,
                    "table_summary.csv": report.table_summaries,
                    "table_differences.csv": report.table_differences,
                }
            )
        for filename, rows in tables.items():
            if rows:
                outputs.append(write_csv(os.path.join(out_dir, filename), rows))

        result = RunResultSchema(outputs=outputs)
        if report is not None:
            rows = report.limit_identities
            result.identities_reported = len(rows)
            result.identities_checked = sum(1 for r in rows if r.asserted)
            result.identities_passed = sum(1 for r in rows if r.asserted and r.passed)
            outputs.append(write_json(os.path.join(out_dir, "report.json"), report))
        outputs.append(write_text(os.path.join(out_dir, "summary.txt"), format_summary(report, runs)))
        logger.info(f"Wrote {len(outputs)} outputs to {out_dir}.")
        return result, report

    def table_report(self) -> Tuple[GBReportSchema, Dict[str, Dict[str, int]]]:
        """
        Compares every derived table with its published counterpart and
        counts violations of the exact tensor identities of each built-in group.
        """
        report = GBReportSchema()
        defects = {}
        for name in builtin_names():
            g = builtin_group(name)
            summaries, differences = table_rows(compare_tables(g))
            report.table_summaries.extend(summaries)
            report.table_differences.extend(differences)
            connection, curvature = derived_tables(g)
            defects[name] = {
                "torsion": len(torsion_defects(connection, g)),
                "metric": len(metric_defects(connection)),
                **{k: len(v) for k, v in curvature_symmetry_defects(curvature).items()},
            }
        return report, defects

    def verify_tables(self, out_dir: Optional[str] = None) -> Tuple[RunResultSchema, GBReportSchema]:
        out_dir = out_dir or self.config.get_output_dir()
        report, defects = self.table_report()
        os.makedirs(out_dir, exist_ok=True)
        outputs = [
            write_csv(os.path.join(out_dir, "table_summary.csv"), report.table_summaries),
            write_json(os.path.join(out_dir, "tables.json"), report),
        ]
        if report.table_differences:
            outputs.append(write_csv(os.path.join(out_dir, "table_differences.csv"), report.table_differences))
        lines = [f"{name}: " + ", ".join(f"{k} defects {v}" for k, v in counts.items()) for name, counts in defects.items()]
        text = format_tables(report.table_summaries, report.table_differences) + "\n".join(lines) + "\n"
        outputs.append(write_text(os.path.join(out_dir, "tables.txt"), text))
        return RunResultSchema(outputs=outputs), report


# 📌 **Writers**
def write_csv(path: str, rows: Sequence[BaseModel]) -> str:
    fieldnames = list(type(rows[0]).model_fields)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            record = row.model_dump()
            writer.writerow({k: "; ".join(v) if isinstance(v, list) else ("" if v is None else v) for k, v in record.items()})
    return path


def write_json(path: str, report: BaseModel) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(report.model_dump_json(indent=2))
        handle.write("\n")
    return path


def write_text(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def format_tables(summaries: Sequence[TableSummaryRow], differences: Sequence[TableDifferenceRow]) -> str:
    lines = ["Table comparisons"]
    for s in summaries:
        status = "exact" if s.exact else f"{s.entries_compared - s.matching} differing"
        lines.append(f"  {s.table:<22} {s.group:<8} {s.matching}/{s.entries_compared} match ({status})")
    for d in differences:
        lines.append(f"  ! {d.table} {d.entry} {d.component}: derived {d.derived}, published {d.reference}, difference {d.difference}")
    return "\n".join(lines) + "\n"


def format_summary(report: Optional[GBReportSchema], runs: Sequence[ScenarioRun]) -> str:
    """Plain-text tables of everything written to CSV, in the same order."""
    lines = []
    if report is not None:
        lines.append(format_tables(report.table_summaries, report.table_differences))
        if report.gb_residuals:
            lines.append("Finite-L Gauss-Bonnet")
            for r in report.gb_residuals:
                flag = "" if r.converged else "  (not converged)"
                published = "n/a" if r.residual_published is None else f"{r.residual_published: .3e}"
                lines.append(
                    f"  {r.scenario:<20} {r.surface:<16} L={r.L:<8g} residual {r.residual: .3e}  "
                    f"scaled {r.scaled_residual: .3e}  flipped {r.flipped_residual: .3e}  published {published}{flag}"
                )
        if report.limit_identities:
            lines.append("Limit identities")
            for r in report.limit_identities:
                status = ("PASS" if r.passed else "FAIL") if r.asserted else "reported"
                lines.append(
                    f"  {r.scenario:<20} {r.surface:<16} {r.identity:<18} {r.value: .9f} +/- {r.error:.1e}  "
                    f"[{status}] band nodes {r.band_nodes}"
                )
        if report.divergence_slopes:
            lines.append("Divergence slopes")
            for r in report.divergence_slopes:
                prediction = "n/a" if r.published_prediction is None else f"{r.published_prediction:.6f}"
                expectation = "n/a" if r.reference_expectation is None else f"{r.reference_expectation:g}"
                lines.append(
                    f"  {r.scenario:<20} {r.surface:<16} c1 {r.c1: .3e} +/- {r.c1_error:.1e}  c0 {r.c0: .6f}  "
                    f"published c1 {prediction}  reference c1 {expectation}  consistent {r.consistent}"
                )
    limit_rows = [row for r in runs for row in r.curve_limit_rows]
    if limit_rows:
        lines.append("Curve curvature limits")
        for r in limit_rows:
            lines.append(
                f"  {r.curve:<16} t={r.t:<8g} {r.classification:<20} predicted {r.predicted: .9f}  "
                f"fitted {r.fitted: .9f}{'  (flagged)' if r.flagged else ''}"
            )
    surface_rows = [row for r in runs for row in r.surface_rows]
    if surface_rows:
        lines.append(f"Surface curvature: {len(surface_rows)} rows")
    return "\n".join(lines) + "\n"
