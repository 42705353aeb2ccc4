import os

import pytest

from app.services.groups import builtin_group
from app.services.measures_quadrature import QuadratureSpec
from app.services.surfaces import LevelSurface, ParamPatch

SCENARIO_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "app", "scenarios")
TWO_PI = 6.283185307179586


### Fixtures
@pytest.fixture(scope="module")
def affine():
    return builtin_group("affine")


@pytest.fixture(scope="module")
def e11():
    return builtin_group("e11")


@pytest.fixture(scope="module")
def heisenberg():
    return builtin_group("heisenberg")


@pytest.fixture
def quadrature():
    return QuadratureSpec()


@pytest.fixture
def scenario_path():
    def path(name: str) -> str:
        return os.path.join(SCENARIO_DIR, f"{name}.json")

    return path


### Surfaces shared by several modules
@pytest.fixture
def affine_x3_disk():
    return (
        LevelSurface("x3", name="affine-x3"),
        ParamPatch(["2 + u1*cos(u2)", "-u1*sin(u2)", "0"], ((0.0, 1.0), (0.0, TWO_PI)), "affine-x3", (False, True)),
        ["2 + cos(t)", "-sin(t)", "0"],
    )


@pytest.fixture
def affine_x2_disk():
    return (
        LevelSurface("x2", name="affine-x2"),
        ParamPatch(["2 + u1*cos(u2)", "0", "u1*sin(u2)"], ((0.0, 1.0), (0.0, TWO_PI)), "affine-x2", (False, True)),
        ["2 + cos(t)", "0", "sin(t)"],
    )


@pytest.fixture
def e11_x3_disk():
    return (
        LevelSurface("x3", name="e11-x3"),
        ParamPatch(["u1*cos(u2)", "u1*sin(u2)", "0"], ((0.0, 1.0), (0.0, TWO_PI)), "e11-x3", (False, True)),
        ["cos(t)", "sin(t)", "0"],
    )


@pytest.fixture
def e11_x1_disk():
    return (
        LevelSurface("x1 - 1", name="e11-x1"),
        ParamPatch(["1", "u1*cos(u2)", "u1*sin(u2)"], ((0.0, 1.0), (0.0, TWO_PI)), "e11-x1", (False, True)),
        ["1", "cos(t)", "sin(t)"],
    )
