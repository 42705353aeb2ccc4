from pydantic import BaseModel, Field
from typing import Dict, List, Optional

SCHEMA_VERSION = "1.0"


# 📌 **Group Definition Schema**
class GroupDefinitionDto(BaseModel):
    name: str = Field(..., description="Group name used in reports")
    frame: List[List[str]] = Field(..., description="Rows a_i^j of X_i = sum_j a_i^j d/dx_j as expressions in x1, x2, x3")
    coframe: List[List[str]] = Field(..., description="Rows of the dual coframe (omega_1, omega_2, omega)")
    brackets: Dict[str, List[str]] = Field(..., description="Keys '12', '13', '23' mapped to the X1, X2, X3 components of the bracket")
    domain_coordinate: Optional[int] = Field(None, description="1-based coordinate that must stay above domain_lower")
    domain_lower: float = Field(0.0, description="Lower bound of the domain coordinate")


# 📌 **Curve Schema**
class CurveDto(BaseModel):
    name: str = Field("curve", description="Curve label")
    components: List[str] = Field(..., min_length=3, max_length=3, description="gamma_1, gamma_2, gamma_3 as expressions in t")
    interval: List[float] = Field([0.0, 1.0], min_length=2, max_length=2, description="Parameter interval [a, b]")
    closed: bool = Field(False, description="Closed curve (periodic quadrature)")


class CurveQueryDto(BaseModel):
    curve: CurveDto = Field(..., description="Curve to evaluate")
    t: List[float] = Field(..., description="Parameter values to evaluate at")
    surface: Optional[str] = Field(None, description="Surface name for geodesic curvature")


# 📌 **Surface Schema**
class PatchDto(BaseModel):
    f: List[str] = Field(..., min_length=3, max_length=3, description="f_1, f_2, f_3 as expressions in u1, u2")
    domain: List[List[float]] = Field(..., description="[[u1_min, u1_max], [u2_min, u2_max]]")
    periodic: List[bool] = Field([False, False], description="Parameters that wrap around")


class SurfaceDto(BaseModel):
    name: str = Field(..., description="Surface label")
    u: str = Field(..., description="Defining function u(x1, x2, x3); the surface is u = 0")
    orientation: int = Field(1, description="Sign multiplying u (fixes the normal)")
    patch: Optional[PatchDto] = Field(None, description="Parametrization paired with u")
    euler_characteristic: int = Field(1, description="User-declared Euler characteristic")
    boundary: List[CurveDto] = Field(default_factory=list, description="Closed boundary curves")
    points: List[List[float]] = Field(default_factory=list, description="Sample points for pointwise curvature rows")


class QuadratureSpecDto(BaseModel):
    rule: str = Field("auto", description="auto, gauss-legendre or trapezoid")
    initial_nodes: int = Field(16, description="Gauss-Legendre nodes per panel")
    refinement_limit: int = Field(8, description="Maximum number of refinement levels")
    tolerance: float = Field(1e-10, description="Relative acceptance tolerance")


# 📌 **Scenario Schema**
class ScenarioSchema(BaseModel):
    name: str = Field(..., description="Scenario name")
    group: Optional[str] = Field(None, description="Built-in group name")
    group_definition: Optional[GroupDefinitionDto] = Field(None, description="Inline group definition")
    surfaces: List[SurfaceDto] = Field(default_factory=list, description="Surfaces with boundary")
    curves: List[CurveQueryDto] = Field(default_factory=list, description="Curve curvature queries")
    l_grid: List[float] = Field([1.0, 4.0, 16.0], description="Finite-L values")
    fit_grid: Optional[List[float]] = Field(None, description="Geometric L grid for limit fits")
    quadrature: QuadratureSpecDto = Field(default_factory=QuadratureSpecDto, description="Quadrature settings")
    pipelines: List[str] = Field(
        ["gauss-bonnet", "limit-identities"], description="Pipelines to run: gauss-bonnet, limit-identities, curve-curvature, surface-curvature"
    )


# 📌 **Request Schemas**
class CurveCurvatureRequest(BaseModel):
    group: str = Field(..., description="Built-in group name")
    curve: CurveDto = Field(..., description="Curve")
    t: float = Field(..., description="Parameter value")
    l_grid: Optional[List[float]] = Field(None, description="L values; defaults to 4^k, k = 1..10")


class SurfaceCurvatureRequest(BaseModel):
    group: str = Field(..., description="Built-in group name")
    surface: SurfaceDto = Field(..., description="Surface with sample points")
    l_grid: List[float] = Field([1.0, 4.0, 16.0], description="L values")


# 📌 **Row Schemas**
class TableSummaryRow(BaseModel):
    table: str
    group: str
    kind: str = Field(..., description="connection or curvature")
    entries_compared: int
    matching: int
    exact: bool


class TableDifferenceRow(BaseModel):
    table: str
    group: str
    entry: str
    component: str
    derived: str
    reference: str
    difference: str


class CurveCurvatureRow(BaseModel):
    group: str
    curve: str
    t: float
    L: float
    curvature: float
    geodesic_signed: Optional[float] = Field(None, description="Signed geodesic curvature when the query names a surface")
    surface: Optional[str] = None


class CurveLimitRow(BaseModel):
    group: str
    curve: str
    t: float
    classification: str
    predicted: float
    fitted: float
    observed_order: float
    flagged: bool
    surface: Optional[str] = None


class SurfaceCurvatureRow(BaseModel):
    group: str
    surface: str
    x1: float
    x2: float
    x3: float
    L: float
    p_bar: float
    q_bar: float
    mean_curvature: float
    gaussian_reference: float
    gaussian_published: Optional[float] = None
    symmetry_residual: float
    route_residual: Optional[float] = None


class GBResidualRow(BaseModel):
    scenario: str
    surface: str
    L: float
    interior: float
    interior_error: float
    boundary: float
    boundary_error: float
    rhs: float
    residual: float
    scaled_residual: float
    flipped_residual: float
    interior_published: Optional[float] = Field(None, description="Interior integral with the published curvature table and closed-form II")
    residual_published: Optional[float] = None
    converged: bool


class LimitIdentityRow(BaseModel):
    scenario: str
    surface: str
    identity: str
    value: float
    error: float
    band_nodes: int = 0
    converged: bool = True
    asserted: bool = Field(..., description="True when the identity is checked, False when only reported")
    passed: Optional[bool] = None
    traces_to: List[str] = Field(default_factory=list, description="Table entries the discrepancy traces to")


class DivergenceRow(BaseModel):
    scenario: str
    surface: str
    c1: float
    c1_error: float
    c0: float
    c0_error: float
    published_prediction: Optional[float] = None
    reference_expectation: Optional[float] = Field(None, description="0 when the intrinsic curvature certifies no L^1 growth")
    oracle_c1: Optional[float] = None
    oracle_c1_error: float = 0.0
    within_error_bars: bool
    consistent: Optional[bool] = Field(None, description="c1 agrees with the reference expectation within 3 error bars")
    condition_number: float


# 📌 **Report Schemas**
class GBReportSchema(BaseModel):
    schema_version: str = Field(SCHEMA_VERSION, description="Report format version")
    scenarios: List[str] = Field(default_factory=list)
    orientation_convention: str = Field(
        "boundary traversed so that J_L(gamma') points into the surface; d sigma signed by the patch (u1, u2) order",
        description="Orientation convention used for every integral",
    )
    table_summaries: List[TableSummaryRow] = Field(default_factory=list)
    table_differences: List[TableDifferenceRow] = Field(default_factory=list)
    gb_residuals: List[GBResidualRow] = Field(default_factory=list)
    limit_identities: List[LimitIdentityRow] = Field(default_factory=list)
    divergence_slopes: List[DivergenceRow] = Field(default_factory=list)


class RunResultSchema(BaseModel):
    exit_status: int = Field(0, description="0 on success, 1 on engine error")
    outputs: List[str] = Field(default_factory=list, description="Paths of the emitted files")
    identities_checked: int = 0
    identities_passed: int = 0
    identities_reported: int = 0
