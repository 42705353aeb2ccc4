from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from app.models.errors import EngineError
from app.models.schemas import (
    CurveCurvatureRequest,
    CurveQueryDto,
    GBReportSchema,
    ScenarioSchema,
    SurfaceCurvatureRequest,
)
from app.services.gauss_bonnet import build_report
from app.services.groups import builtin_group, builtin_names
from app.services.scenario_service import ScenarioService
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

# Initialize FastAPI App
app = FastAPI(
    title="Sub-Riemannian Limits Verification API",
    description="API for connection and curvature tables, curvature limits and Gauss-Bonnet checks",
    version="1.0.0"
)

# CORS Configuration - Allow requests from a local report viewer
origins = [
    "http://localhost:3000",
]

app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Initialize Services
scenario_service = ScenarioService()


def _engine_failure(what: str, e: Exception) -> HTTPException:
    if isinstance(e, EngineError):
        logger.error(f"{what} rejected: {str(e)}", exc_info=True)
        return HTTPException(status_code=400, detail=str(e))
    logger.error(f"{what} failed: {str(e)}", exc_info=True)
    return HTTPException(status_code=500, detail=f"{what} failed: {str(e)}")


def _scenario_report(scenario: ScenarioSchema, pipelines=None) -> GBReportSchema:
    run = scenario_service.execute(scenario, pipelines)
    return build_report(run.outcomes)


@app.get("/")
async def root():
    return {"message": "Sub-Riemannian limits API is running!"}

### **Group Registry Endpoint**
@app.get("/api/groups")
async def list_groups():
    """
    Lists the built-in groups with their domains and bracket tables.
    """
    return [
        {"name": name, "domain": builtin_group(name).domain_description(), "brackets": builtin_group(name).bracket_table()}
        for name in builtin_names()
    ]

### **Table Verification Endpoint**
@app.get("/api/verify-tables")
async def verify_tables():
    """
    Compares the derived connection and curvature tables with the published ones.
    """
    try:
        report, defects = scenario_service.table_report()
        return {"report": report, "identity_defects": defects}
    except Exception as e:
        raise _engine_failure("Table verification", e)

### **Curve Curvature Endpoint**
@app.post("/api/curve-curvature")
async def curve_curvature(request: CurveCurvatureRequest):
    """
    Curvature of the curve at t for each L, with the classified limit.
    """
    try:
        scenario = ScenarioSchema(
            name="curve-curvature",
            group=request.group,
            curves=[CurveQueryDto(curve=request.curve, t=[request.t])],
            l_grid=request.l_grid or scenario_service.config.get_default_l_grid(),
            pipelines=["curve-curvature"],
        )
        run = scenario_service.execute(scenario)
        return {"rows": run.curve_rows, "limits": run.curve_limit_rows}
    except Exception as e:
        raise _engine_failure("Curve curvature", e)

### **Surface Curvature Endpoint**
@app.post("/api/surface-curvature")
async def surface_curvature(request: SurfaceCurvatureRequest):
    """
    Pointwise frame data, mean curvature and Gaussian curvature at the surface's sample points.
    """
    try:
        scenario = ScenarioSchema(
            name="surface-curvature",
            group=request.group,
            surfaces=[request.surface],
            l_grid=request.l_grid,
            pipelines=["surface-curvature"],
        )
        return {"rows": scenario_service.execute(scenario).surface_rows}
    except Exception as e:
        raise _engine_failure("Surface curvature", e)

### **Gauss-Bonnet Endpoint**
@app.post("/api/gauss-bonnet", response_model=GBReportSchema)
async def gauss_bonnet(scenario: ScenarioSchema):
    """
    Finite-L Gauss-Bonnet residuals for every surface with a patch and boundary.
    """
    try:
        return _scenario_report(scenario, ["gauss-bonnet"])
    except Exception as e:
        raise _engine_failure("Gauss-Bonnet", e)

### **Limit Identities Endpoint**
@app.post("/api/limit-identities", response_model=GBReportSchema)
async def limit_identities(scenario: ScenarioSchema):
    """
    Limit identities and divergence slopes, reported or asserted per the table comparison.
    """
    try:
        return _scenario_report(scenario, ["limit-identities"])
    except Exception as e:
        raise _engine_failure("Limit identities", e)

### **Report Endpoint**
@app.post("/api/report", response_model=GBReportSchema)
async def report(scenario: ScenarioSchema):
    """
    Runs every pipeline the scenario requests and returns the versioned report.
    """
    try:
        return _scenario_report(scenario)
    except Exception as e:
        raise _engine_failure("Report", e)
