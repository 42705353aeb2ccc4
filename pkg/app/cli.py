import argparse
import sys
from typing import List, Optional

from app.models.errors import EngineError
from app.models.schemas import CurveDto, CurveQueryDto, ScenarioSchema, SurfaceDto
from app.services.config_service import ConfigService
from app.services.groups import builtin_group, builtin_names
from app.services.scenario_service import ScenarioService
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

EXIT_OK = 0
EXIT_ENGINE_ERROR = 1
EXIT_USAGE = 2


def _grid(text: str) -> List[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")
    if not values or any(v <= 0 for v in values):
        raise argparse.ArgumentTypeError("L values must be positive")
    return values


def _positive(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srlimits",
        description="Sub-Riemannian limits, curvature tables and Gauss-Bonnet checks in three-dimensional Lie groups.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="Output directory (defaults to SRLIMITS_OUTPUT_DIR)")
    common.add_argument("--l-grid", type=_grid, help="Comma-separated L values, e.g. 1,4,16")
    common.add_argument("--tolerance", type=_positive, help="Quadrature tolerance")

    sub = parser.add_subparsers(dest="command", required=True)

    groups = sub.add_parser("groups", help="Built-in group registry")
    groups.add_argument("action", choices=["list"])

    sub.add_parser("verify-tables", parents=[common], help="Compare derived tables with the published ones")

    curve = sub.add_parser("curve-curvature", parents=[common], help="Curvature of a curve for each L and its limit")
    curve.add_argument("--group", required=True, choices=builtin_names())
    curve.add_argument("--curve", nargs=3, required=True, metavar=("G1", "G2", "G3"), help="Components in t")
    curve.add_argument("--t", nargs="+", type=float, required=True)
    curve.add_argument("--surface-u", help="Defining function of a surface containing the curve")

    surface = sub.add_parser("surface-curvature", parents=[common], help="Pointwise mean and Gaussian curvature")
    surface.add_argument("--group", required=True, choices=builtin_names())
    surface.add_argument("--u", required=True, help="Defining function u(x1, x2, x3)")
    surface.add_argument("--point", nargs=3, type=float, action="append", required=True, metavar=("X1", "X2", "X3"))

    for name, help_text in (
        ("gauss-bonnet", "Finite-L Gauss-Bonnet residuals of scenario surfaces"),
        ("limit-identities", "Limit identities and divergence slopes of scenario surfaces"),
        ("report", "Every pipeline a scenario requests"),
    ):
        command = sub.add_parser(name, parents=[common], help=help_text)
        command.add_argument("scenarios", nargs="+", help="Scenario JSON files")
    return parser


def _print_summary(outputs: List[str]) -> None:
    with open(outputs[-1], "r", encoding="utf-8") as handle:
        print(handle.read(), end="")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        if args.command == "groups":
            for name in builtin_names():
                g = builtin_group(name)
                print(f"{name}\tdomain {g.domain_description()}\tbrackets {g.bracket_table()}")
            return EXIT_OK

        service = ScenarioService(ConfigService())
        if args.command == "verify-tables":
            result, _ = service.verify_tables(args.out)
            _print_summary(result.outputs)
            return EXIT_OK

        if args.command == "curve-curvature":
            surfaces = [SurfaceDto(name="surface", u=args.surface_u)] if args.surface_u else []
            scenario = ScenarioSchema(
                name="curve-curvature",
                group=args.group,
                surfaces=surfaces,
                curves=[
                    CurveQueryDto(
                        curve=CurveDto(name="curve", components=args.curve),
                        t=args.t,
                        surface="surface" if args.surface_u else None,
                    )
                ],
                pipelines=["curve-curvature"],
            )
            scenarios, pipelines = [scenario], None
        elif args.command == "surface-curvature":
            scenario = ScenarioSchema(
                name="surface-curvature",
                group=args.group,
                surfaces=[SurfaceDto(name="surface", u=args.u, points=args.point)],
                pipelines=["surface-curvature"],
            )
            scenarios, pipelines = [scenario], None
        else:
            scenarios = [service.load(path) for path in args.scenarios]
            pipelines = None if args.command == "report" else [args.command]

        result, _ = service.run(scenarios, args.out, pipelines=pipelines, tolerance=args.tolerance, l_grid=args.l_grid)
        _print_summary(result.outputs)
        print(
            f"identities checked {result.identities_checked}, passed {result.identities_passed}, "
            f"reported {result.identities_reported}"
        )
        return result.exit_status
    except EngineError as e:
        logger.error(f"{args.command} failed: {str(e)}", exc_info=True)
        print(f"error: {str(e)}", file=sys.stderr)
        return EXIT_ENGINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
