from fractions import Fraction

import numpy as np
import pytest

from app.services.connection_curvature import (
    chart_sectional_curvature,
    compare_connection,
    compare_curvature,
    compare_tables,
    curvature_symmetry_defects,
    derived_tables,
    koszul_connection,
    metric_defects,
    reference_curvature,
    sectional_curvature,
    torsion_defects,
)
from app.services.groups import builtin_group
from app.services.laurent import SqrtLPoly


@pytest.mark.parametrize("name", ["affine", "e11"])
def test_derived_connection_matches_published_table(name):
    comparison = compare_connection(koszul_connection(builtin_group(name)), f"{name}_connection")
    assert comparison.entries_compared == 27
    assert comparison.exact
    assert comparison.matching == 27


def test_connection_against_the_other_groups_table_differs(affine):
    comparison = compare_connection(koszul_connection(affine), "e11_connection")
    assert not comparison.exact
    assert comparison.differences
    assert all(d.table == "e11_connection" for d in comparison.differences)


def test_affine_connection_entries(affine):
    t = koszul_connection(affine)
    assert t[0, 1, 2] == SqrtLPoly.constant(Fraction(1, 2))
    assert t[0, 2, 1] == SqrtLPoly.parse("-1/2*L")
    assert t[2, 2, 0] == SqrtLPoly.parse("L")
    assert t[0, 0, 0].is_zero()


def test_heisenberg_connection(heisenberg):
    t = koszul_connection(heisenberg)
    assert t[0, 1, 2] == SqrtLPoly.constant(Fraction(1, 2))
    assert t[1, 0, 2] == SqrtLPoly.constant(Fraction(-1, 2))
    assert t[2, 2, 0].is_zero()


@pytest.mark.parametrize("name", ["affine", "e11", "heisenberg"])
def test_exact_tensor_identities(name):
    g = builtin_group(name)
    connection, curvature = derived_tables(g)
    assert torsion_defects(connection, g) == []
    assert metric_defects(connection) == []
    assert all(not defects for defects in curvature_symmetry_defects(curvature).values())


def test_e11_curvature_matches_published_table(e11):
    _, curvature = derived_tables(e11)
    assert compare_curvature(curvature, "e11_curvature").exact


def test_affine_curvature_has_one_differing_entry(affine):
    _, curvature = derived_tables(affine)
    comparison = compare_curvature(curvature, "affine_curvature")
    assert comparison.entries_compared == 27
    assert len(comparison.differences) == 1
    difference = comparison.differences[0]
    assert difference.entry == "R(X1,X3)X1"
    assert difference.component == "X3"
    assert SqrtLPoly.parse(difference.derived) == SqrtLPoly.parse("1 - 1/4*L")
    assert SqrtLPoly.parse(difference.reference) == SqrtLPoly.parse("3/4*L")
    assert SqrtLPoly.parse(difference.difference) == SqrtLPoly.parse("1 - L")


def test_compare_tables_per_group(affine, heisenberg):
    assert [c.table for c in compare_tables(affine)] == ["affine_connection", "affine_curvature"]
    assert compare_tables(heisenberg) == []


@pytest.mark.parametrize("L", [2.0, 5.0])
def test_chart_oracle_sides_with_the_derived_table(affine, L):
    point = [1.5, 0.2, -0.3]
    u, v = np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0])
    _, curvature = derived_tables(affine)
    derived = float(sectional_curvature(curvature, u, v, L))
    published = float(sectional_curvature(reference_curvature("affine_curvature"), u, v, L))
    chart = chart_sectional_curvature(affine, point, u, v, L)
    assert derived == pytest.approx(L / 4 - 1)
    assert chart == pytest.approx(derived, rel=1e-4)
    assert abs(chart - published) > 0.5


@pytest.mark.parametrize("name", ["e11", "heisenberg"])
def test_chart_oracle_on_horizontal_planes(name):
    g = builtin_group(name)
    _, curvature = derived_tables(g)
    u, v = np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    for L in (1.0, 3.0):
        expected = float(sectional_curvature(curvature, u, v, L))
        assert chart_sectional_curvature(g, [0.4, -0.3, 0.2], u, v, L) == pytest.approx(expected, rel=1e-6, abs=1e-9)
