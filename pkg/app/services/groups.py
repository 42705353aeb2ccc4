from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.models.errors import DomainViolationError, InvalidGroupError, UnknownGroupError
from app.utils.expr_parser import Expr, evaluate, evaluate_jet, parse
from app.utils.jets import Jet
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

COORDINATES = ("x1", "x2", "x3")
DEFAULT_DOMAIN_MARGIN = 1e-8

Matrix = Sequence[Sequence[str]]


class GroupModel:
    """
    A three-dimensional Lie group chart with a left-invariant frame X1, X2, X3.

    Frame rows give X_i = sum_j a_i^j d/dx_j; coframe rows give the frame
    components (omega_1, omega_2, omega) of a coordinate velocity. Frame
    vectors are stored on X3 and the metric g_L = diag(1, 1, L) carries the L.
    """

    def __init__(
        self,
        name: str,
        frame: Matrix,
        coframe: Matrix,
        brackets: Mapping[Tuple[int, int], Sequence],
        domain_coordinate: Optional[int] = None,
        domain_lower: float = 0.0,
        domain_margin: float = DEFAULT_DOMAIN_MARGIN,
    ):
        self.name = name
        self.frame_sources: Tuple[Tuple[str, ...], ...] = tuple(tuple(row) for row in frame)
        self.coframe_sources: Tuple[Tuple[str, ...], ...] = tuple(tuple(row) for row in coframe)
        self.frame_exprs: Tuple[Tuple[Expr, ...], ...] = tuple(
            tuple(parse(s, COORDINATES) for s in row) for row in self.frame_sources
        )
        self.coframe_exprs: Tuple[Tuple[Expr, ...], ...] = tuple(
            tuple(parse(s, COORDINATES) for s in row) for row in self.coframe_sources
        )
        self.domain_coordinate = domain_coordinate
        self.domain_lower = domain_lower
        self.domain_margin = domain_margin

        # c[k][i][j] with [X_i, X_j] = sum_k c^k_ij X_k, 0-based
        constants = [[[Fraction(0)] * 3 for _ in range(3)] for _ in range(3)]
        for (i, j), values in brackets.items():
            for k, value in enumerate(values):
                constants[k][i - 1][j - 1] = Fraction(value)
                constants[k][j - 1][i - 1] = -Fraction(value)
        self._constants = tuple(tuple(tuple(row) for row in plane) for plane in constants)

    # 📌 **Structure**
    def structure_constant(self, k: int, i: int, j: int) -> Fraction:
        """c^k_ij with 0-based indices."""
        return self._constants[k][i][j]

    def structure_array(self) -> np.ndarray:
        return np.array([[[float(self._constants[k][i][j]) for k in range(3)] for j in range(3)] for i in range(3)])

    def bracket_table(self) -> Dict[str, List[str]]:
        return {
            f"{i + 1}{j + 1}": [str(self._constants[k][i][j]) for k in range(3)]
            for i in range(3)
            for j in range(i + 1, 3)
        }

    @staticmethod
    def metric_diagonal(L: float) -> np.ndarray:
        return np.array([1.0, 1.0, float(L)])

    @staticmethod
    def inner(u: np.ndarray, v: np.ndarray, L: float) -> np.ndarray:
        """<u, v>_L for frame component arrays of shape (3, *batch)."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return u[0] * v[0] + u[1] * v[1] + L * u[2] * v[2]

    # 📌 **Domain**
    def check_domain(self, point) -> None:
        if self.domain_coordinate is None:
            return
        coordinate = np.asarray(point[self.domain_coordinate], dtype=float)
        bound = self.domain_lower + self.domain_margin
        if np.any(coordinate < bound):
            raise DomainViolationError(
                f"{self.name}: points must satisfy x{self.domain_coordinate + 1} >= {bound:g} "
                f"(got min {float(np.min(coordinate)):g})"
            )

    def domain_description(self) -> str:
        if self.domain_coordinate is None:
            return "R^3"
        return f"x{self.domain_coordinate + 1} > {self.domain_lower:g}"

    # 📌 **Evaluation**
    def _env(self, point) -> Dict:
        return {name: point[i] for i, name in enumerate(COORDINATES)}

    def frame_matrix(self, point) -> np.ndarray:
        """A[i, j, ...] = a_i^j at the given points."""
        self.check_domain(point)
        env = self._env([np.asarray(x, dtype=float) for x in point])
        shape = np.shape(np.asarray(point[0], dtype=float) + point[1] + point[2])
        return np.array([[np.broadcast_to(evaluate(e, env), shape) for e in row] for row in self.frame_exprs])

    def coframe_matrix(self, point) -> np.ndarray:
        """B[k, j, ...]: frame component k of d/dx_j."""
        self.check_domain(point)
        env = self._env([np.asarray(x, dtype=float) for x in point])
        shape = np.shape(np.asarray(point[0], dtype=float) + point[1] + point[2])
        return np.array([[np.broadcast_to(evaluate(e, env), shape) for e in row] for row in self.coframe_exprs])

    def frame_jets(self, point_jets: Sequence[Jet]) -> List[List[Jet]]:
        self.check_domain([j.value for j in point_jets])
        env = self._env(point_jets)
        nvars, order = point_jets[0].nvars, point_jets[0].order
        return [[evaluate_jet(e, env, nvars, order) for e in row] for row in self.frame_exprs]

    def coframe_jets(self, point_jets: Sequence[Jet]) -> List[List[Jet]]:
        self.check_domain([j.value for j in point_jets])
        env = self._env(point_jets)
        nvars, order = point_jets[0].nvars, point_jets[0].order
        return [[evaluate_jet(e, env, nvars, order) for e in row] for row in self.coframe_exprs]

    @staticmethod
    def frame_derivative(frame: List[List[Jet]], f: Jet, i: int) -> Jet:
        """X_i f = sum_j a_i^j df/dx_j, with f a jet in the coordinates."""
        return sum((frame[i][j] * f.diff(j) for j in range(3)), Jet.constant(0.0, f.nvars, f.order - 1))

    def __repr__(self) -> str:
        return f"GroupModel(name={self.name!r})"


# 📌 **Built-in registry**
_BUILTIN_DEFINITIONS: Dict[str, Dict] = {
    "affine": {
        "frame": [["x1", "0", "0"], ["0", "x1", "1"], ["0", "x1", "0"]],
        "coframe": [["1/x1", "0", "0"], ["0", "0", "1"], ["0", "1/x1", "-1"]],
        "brackets": {(1, 2): (0, 0, 1), (1, 3): (0, 0, 1)},
        "domain_coordinate": 0,
    },
    "e11": {
        "frame": [
            ["0", "0", "1"],
            ["-exp(x3)/sqrt(2)", "exp(-x3)/sqrt(2)", "0"],
            ["-exp(x3)/sqrt(2)", "-exp(-x3)/sqrt(2)", "0"],
        ],
        "coframe": [
            ["0", "0", "1"],
            ["-exp(-x3)/sqrt(2)", "exp(x3)/sqrt(2)", "0"],
            ["-exp(-x3)/sqrt(2)", "-exp(x3)/sqrt(2)", "0"],
        ],
        "brackets": {(1, 2): (0, 0, 1), (1, 3): (0, 1, 0)},
        "domain_coordinate": None,
    },
    "heisenberg": {
        "frame": [["1", "0", "-x2/2"], ["0", "1", "x1/2"], ["0", "0", "1"]],
        "coframe": [["1", "0", "0"], ["0", "1", "0"], ["x2/2", "-x1/2", "1"]],
        "brackets": {(1, 2): (0, 0, 1)},
        "domain_coordinate": None,
    },
}

_BUILTIN_CACHE: Dict[str, GroupModel] = {}


def builtin_names() -> List[str]:
    return sorted(_BUILTIN_DEFINITIONS)


def builtin_group(name: str) -> GroupModel:
    """
    Returns a fully populated built-in group model.
    :param name: One of affine, e11, heisenberg.
    :return: GroupModel.
    """
    if name not in _BUILTIN_DEFINITIONS:
        raise UnknownGroupError(f"Unknown group '{name}'; expected one of {builtin_names()}")
    if name not in _BUILTIN_CACHE:
        spec = _BUILTIN_DEFINITIONS[name]
        _BUILTIN_CACHE[name] = GroupModel(
            name,
            spec["frame"],
            spec["coframe"],
            spec["brackets"],
            domain_coordinate=spec["domain_coordinate"],
        )
    return _BUILTIN_CACHE[name]


def coordinate_to_frame(g: GroupModel, p, v) -> np.ndarray:
    """Frame components (omega_1(v), omega_2(v), omega(v)) of a coordinate velocity at p."""
    B = g.coframe_matrix(p)
    v = np.asarray(v, dtype=float)
    return np.einsum("kj...,j...->k...", B, v)


def omega_of_velocity(g: GroupModel, p, v) -> np.ndarray:
    """omega(v), evaluated directly from the third coframe row."""
    g.check_domain(p)
    env = {name: np.asarray(p[i], dtype=float) for i, name in enumerate(COORDINATES)}
    v = np.asarray(v, dtype=float)
    return sum(evaluate(g.coframe_exprs[2][j], env) * v[j] for j in range(3))


# 📌 **Validation**
def jacobi_defect(g: GroupModel) -> Fraction:
    """Largest |cyclic sum| of the Jacobi identity on the structure constants."""
    worst = Fraction(0)
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for l in range(3):
                    total = sum(
                        g.structure_constant(m, i, j) * g.structure_constant(l, m, k)
                        + g.structure_constant(m, j, k) * g.structure_constant(l, m, i)
                        + g.structure_constant(m, k, i) * g.structure_constant(l, m, j)
                        for m in range(3)
                    )
                    worst = max(worst, abs(total))
    return worst


def numeric_brackets(g: GroupModel, point) -> np.ndarray:
    """
    Frame components of [X_i, X_j] computed from the frame coefficient
    functions at the given points; result[i, j, k, ...].
    """
    point = [np.asarray(x, dtype=float) for x in point]
    jets = [Jet.variable(point[n], n, 3, 1) for n in range(3)]
    frame = g.frame_jets(jets)
    B = g.coframe_matrix(point)
    shape = np.shape(point[0] + point[1] + point[2])
    out = np.zeros((3, 3, 3) + shape)
    for i in range(3):
        for j in range(3):
            coordinate = [
                sum(
                    frame[i][n].value * frame[j][m].first(n) - frame[j][n].value * frame[i][m].first(n)
                    for n in range(3)
                )
                for m in range(3)
            ]
            for k in range(3):
                out[i, j, k] = sum(B[k, m] * coordinate[m] for m in range(3))
    return out


def validate_group(g: GroupModel, sample_points: np.ndarray, tolerance: float = 1e-10) -> None:
    """
    Checks Jacobi on the constants, frame/coframe duality and that the frame
    coefficient functions reproduce the declared brackets at sample points.
    """
    try:
        if jacobi_defect(g) != 0:
            raise InvalidGroupError(f"{g.name}: structure constants violate the Jacobi identity")
        A = g.frame_matrix(sample_points)
        B = g.coframe_matrix(sample_points)
        duality = np.einsum("kj...,ij...->ik...", B, A) - np.eye(3).reshape((3, 3) + (1,) * (A.ndim - 2))
        if np.max(np.abs(duality)) > tolerance:
            raise InvalidGroupError(f"{g.name}: coframe is not dual to the frame (defect {np.max(np.abs(duality)):.3e})")
        expected = g.structure_array().reshape((3, 3, 3) + (1,) * (A.ndim - 2))
        defect = np.max(np.abs(numeric_brackets(g, sample_points) - expected))
        if defect > tolerance:
            raise InvalidGroupError(f"{g.name}: frame brackets disagree with declared constants (defect {defect:.3e})")
        logger.info(f"Group '{g.name}' validated at {np.size(sample_points[0])} points.")
    except InvalidGroupError as e:
        logger.error(f"Group validation failed: {str(e)}", exc_info=True)
        raise


def sample_domain_points(g: GroupModel, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic random points inside the chart domain, shape (3, count)."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(-1.0, 1.0, size=(3, count))
    if g.domain_coordinate is not None:
        points[g.domain_coordinate] = g.domain_lower + rng.uniform(0.5, 2.0, size=count)
    return points
