import csv
import json
import os

import pytest

from app.cli import EXIT_ENGINE_ERROR, EXIT_OK, EXIT_USAGE, main
from app.models.errors import ScenarioValidationError, UnknownGroupError
from app.services.scenario_service import ScenarioService


@pytest.fixture
def service():
    return ScenarioService()


def _scenario(**overrides):
    data = {
        "name": "case",
        "group": "affine",
        "surfaces": [
            {
                "name": "plane",
                "u": "x3",
                "patch": {"f": ["2 + u1", "u2", "0"], "domain": [[0.0, 1.0], [0.0, 1.0]]},
            }
        ],
    }
    data.update(overrides)
    return data


def _rows(path):
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


### Validation
@pytest.mark.parametrize("name", ["affine-flat-disk", "e11-limit-gb"])
def test_bundled_scenarios_validate(service, scenario_path, name):
    validated = service.validate(service.load(scenario_path(name)))
    assert validated.group.name in ("affine", "e11")
    assert all(boundary for _, _, boundary in validated.surfaces.values())


@pytest.mark.parametrize(
    "overrides, location, message",
    [
        (
            {"surfaces": [{"name": "plane", "u": "x3", "patch": {"f": ["u1 - 1", "u2", "0"], "domain": [[0.0, 1.0], [0.0, 1.0]]}}]},
            "surfaces[0].patch",
            "x1 > 0",
        ),
        (
            {
                "surfaces": [
                    {
                        "name": "plane",
                        "u": "x3",
                        "boundary": [{"components": ["2 + cos(t)", "sin(t)", "0.1"], "interval": [0.0, 6.283185307179586], "closed": True}],
                    }
                ]
            },
            "surfaces[0].boundary[0]",
            "leaves the surface",
        ),
        (
            {"surfaces": [{"name": "plane", "u": "x3", "boundary": [{"components": ["2 + t", "t", "0"]}]}]},
            "surfaces[0].boundary[0]",
            "closed",
        ),
        ({"pipelines": ["gauss-bonnet", "volume"]}, "pipelines[1]", "unknown pipeline"),
        ({"group": None}, "group", "exactly one"),
        ({"surfaces": [{"name": "plane", "u": "x3 +"}]}, "surfaces[0]", ""),
        ({"l_grid": [1.0, -4.0]}, "l_grid", "positive"),
        ({"curves": [{"curve": {"components": ["1", "t", "0"]}, "t": [0.5], "surface": "missing"}]}, "curves[0].surface", "unknown surface"),
        ({"curves": [{"curve": {"components": ["t - 1", "t", "0"]}, "t": [0.5]}]}, "curves[0].t", "x1 > 0"),
    ],
)
def test_invalid_scenarios_name_the_location(service, overrides, location, message):
    with pytest.raises(ScenarioValidationError) as excinfo:
        service.validate(service.parse(_scenario(**overrides)))
    assert excinfo.value.location == location
    assert message in str(excinfo.value)


def test_schema_errors_become_validation_errors(service):
    with pytest.raises(ScenarioValidationError) as excinfo:
        service.parse({"name": "case", "group": "affine", "curves": [{"curve": {"components": ["1", "t"]}, "t": [0.0]}]})
    assert "curves" in excinfo.value.location


def test_unknown_builtin_group_is_an_engine_error(service):
    with pytest.raises(UnknownGroupError):
        service.validate(service.parse(_scenario(group="sol")))


def test_missing_file_is_a_validation_error(service, tmp_path):
    with pytest.raises(ScenarioValidationError):
        service.load(str(tmp_path / "absent.json"))


def test_malformed_json_reports_the_position(service, tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x",\n "group": }', encoding="utf-8")
    with pytest.raises(ScenarioValidationError) as excinfo:
        service.load(str(path))
    assert excinfo.value.location.startswith(f"{path}:2:")


### CLI
def test_groups_list(capsys):
    assert main(["groups", "list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "affine" in out and "e11" in out and "heisenberg" in out


def test_verify_tables_writes_outputs(tmp_path, capsys):
    assert main(["verify-tables", "--out", str(tmp_path)]) == EXIT_OK
    for name in ("table_summary.csv", "tables.json", "table_differences.csv", "tables.txt"):
        assert (tmp_path / name).exists()
    differences = _rows(tmp_path / "table_differences.csv")
    assert [(row["entry"], row["component"]) for row in differences] == [("R(X1,X3)X1", "X3")]
    assert "R(X1,X3)X1" in capsys.readouterr().out


def test_curve_curvature_command(tmp_path):
    argv = ["curve-curvature", "--group", "affine", "--curve", "1", "t", "0", "--t", "0.5", "--l-grid", "1,4,16", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    rows = _rows(tmp_path / "curve_curvature.csv")
    assert [float(r["L"]) for r in rows] == [1.0, 4.0, 16.0]
    assert all(float(r["curvature"]) == pytest.approx(1.0) for r in rows)
    limits = _rows(tmp_path / "curve_limits.csv")
    assert limits[0]["classification"] == "NonHorizontal"


def test_surface_curvature_command(tmp_path):
    argv = ["surface-curvature", "--group", "affine", "--u", "x2", "--point", "2", "0", "5", "--l-grid", "4", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    (row,) = _rows(tmp_path / "surface_curvature.csv")
    assert float(row["gaussian_reference"]) == pytest.approx(0.0, abs=1e-8)
    assert float(row["route_residual"]) == pytest.approx(0.0, abs=1e-9)


def test_gauss_bonnet_command(tmp_path, scenario_path):
    argv = ["gauss-bonnet", scenario_path("affine-flat-disk"), "--l-grid", "1,4", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    with open(tmp_path / "report.json", encoding="utf-8") as handle:
        report = json.load(handle)
    assert report["schema_version"] == "1.0"
    assert len(report["gb_residuals"]) == 4
    assert all(abs(r["scaled_residual"]) <= 1e-6 for r in report["gb_residuals"])
    assert all(r["residual_published"] is not None for r in report["gb_residuals"])
    assert report["limit_identities"] == []
    assert os.path.exists(tmp_path / "summary.txt")


def test_runs_are_deterministic(tmp_path):
    outputs = []
    for run in ("first", "second"):
        out = tmp_path / run
        argv = ["curve-curvature", "--group", "e11", "--curve", "cos(t)", "sin(t)", "0", "--t", "0", "1", "--l-grid", "1", "--out", str(out)]
        assert main(argv) == EXIT_OK
        outputs.append((out / "curve_curvature.csv").read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]


def test_missing_scenario_file_exits_with_engine_error(tmp_path):
    assert main(["gauss-bonnet", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == EXIT_ENGINE_ERROR


@pytest.mark.parametrize("argv", [["bogus"], ["curve-curvature", "--group", "affine"], ["verify-tables", "--l-grid", "0,1"]])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE
