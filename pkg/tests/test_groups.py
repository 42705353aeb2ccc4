import numpy as np
import pytest

from app.models.errors import DomainViolationError, InvalidGroupError, UnknownGroupError
from app.services.groups import (
    GroupModel,
    builtin_group,
    builtin_names,
    coordinate_to_frame,
    jacobi_defect,
    numeric_brackets,
    omega_of_velocity,
    sample_domain_points,
    validate_group,
)


def test_registry_lists_the_built_in_groups():
    assert builtin_names() == ["affine", "e11", "heisenberg"]
    with pytest.raises(UnknownGroupError):
        builtin_group("sl2")


@pytest.mark.parametrize("name", ["affine", "e11", "heisenberg"])
def test_built_in_groups_validate(name):
    g = builtin_group(name)
    assert jacobi_defect(g) == 0
    points = sample_domain_points(g, 12, seed=3)
    validate_group(g, points)
    expected = g.structure_array()
    brackets = numeric_brackets(g, points)
    np.testing.assert_allclose(brackets, np.broadcast_to(expected[..., None], brackets.shape), atol=1e-10)


def test_structure_constants_are_antisymmetric(affine):
    assert affine.structure_constant(2, 0, 1) == 1
    assert affine.structure_constant(2, 1, 0) == -1
    assert affine.structure_constant(2, 0, 2) == 1
    assert affine.bracket_table()["23"] == ["0", "0", "0"]


def test_affine_domain_predicate(affine):
    assert affine.domain_description() == "x1 > 0"
    with pytest.raises(DomainViolationError):
        affine.frame_matrix([-1.0, 0.0, 0.0])


def test_coordinate_to_frame_round_trip(e11):
    points = sample_domain_points(e11, 5)
    A = e11.frame_matrix(points)
    B = e11.coframe_matrix(points)
    np.testing.assert_allclose(np.einsum("kj...,ij...->ik...", B, A), np.broadcast_to(np.eye(3)[..., None], (3, 3, 5)), atol=1e-12)


def test_vertical_velocity_of_the_affine_line(affine):
    a = coordinate_to_frame(affine, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(a, [0.0, 0.0, 1.0])
    assert float(omega_of_velocity(affine, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])) == pytest.approx(1.0)
    # omega annihilates X1 and X2
    A = affine.frame_matrix([1.7, 0.2, -0.4])
    for i in range(2):
        assert float(omega_of_velocity(affine, [1.7, 0.2, -0.4], A[i])) == pytest.approx(0.0, abs=1e-14)


def test_wrong_brackets_are_rejected():
    g = GroupModel(
        "bad-heisenberg",
        [["1", "0", "-x2/2"], ["0", "1", "x1/2"], ["0", "0", "1"]],
        [["1", "0", "0"], ["0", "1", "0"], ["x2/2", "-x1/2", "1"]],
        {(1, 2): (0, 0, 2)},
    )
    with pytest.raises(InvalidGroupError):
        validate_group(g, sample_domain_points(g, 4))


def test_jacobi_violation_is_rejected():
    g = GroupModel(
        "not-a-lie-algebra",
        [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        [["1", "0", "0"], ["0", "1", "0"], ["0", "0", "1"]],
        {(1, 2): (1, 0, 0), (1, 3): (1, 0, 0), (2, 3): (0, 1, 0)},
    )
    assert jacobi_defect(g) != 0
    with pytest.raises(InvalidGroupError):
        validate_group(g, sample_domain_points(g, 4))


@pytest.mark.parametrize("name", ["affine", "e11", "heisenberg"])
def test_brackets_hold_at_random_points(name):
    g = builtin_group(name)
    rng = np.random.default_rng(31)
    points = rng.uniform(-2.0, 2.0, size=(3, 20))
    if name == "affine":
        points[0] = rng.uniform(0.2, 3.0, size=20)
    brackets = numeric_brackets(g, points)
    expected = g.structure_array()
    np.testing.assert_allclose(brackets, np.broadcast_to(expected[..., None], brackets.shape), atol=1e-10)
    # [X_i, X_j] = -[X_j, X_i]
    np.testing.assert_allclose(brackets, -np.swapaxes(brackets, 0, 1), atol=1e-12)
