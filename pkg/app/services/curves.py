from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.models.errors import CurveRegularityError, UnsupportedGroupError
from app.services.connection_curvature import ConnectionTable, koszul_connection
from app.services.groups import GroupModel
from app.utils.expr_parser import evaluate_jet, parse
from app.utils.extrapolation import DEFAULT_CURVE_GRID, extrapolate
from app.utils.jets import Jet, finite_difference_jets
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

HORIZONTAL_TOLERANCE = 1e-9
WARNING_BAND = 1e3
CLOSED_FORM_GROUPS = ("affine", "e11")


class CurveClass(str, Enum):
    NON_HORIZONTAL = "NonHorizontal"
    HORIZONTAL_FLAT = "HorizontalFlat"
    HORIZONTAL_TRANSITION = "HorizontalTransition"


class Curve:
    """
    A parametrized curve gamma(t) in chart coordinates, given by three
    expressions in t or, as a fallback, by a sampler t -> (3, *t.shape).
    """

    def __init__(
        self,
        components: Optional[Sequence[str]] = None,
        interval: Tuple[float, float] = (0.0, 1.0),
        closed: bool = False,
        name: str = "curve",
        sampler: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        scale: float = 1.0,
    ):
        if components is None and sampler is None:
            raise ValueError("A curve needs component expressions or a sampler")
        self.name = name
        self.components = tuple(components) if components is not None else None
        self.exprs = tuple(parse(s, frozenset({"t"})) for s in self.components) if self.components else None
        self.interval = (float(interval[0]), float(interval[1]))
        self.closed = closed
        self.sampler = sampler
        self.scale = scale

    def jets(self, t, order: int = 2) -> List[Jet]:
        """Univariate jets of gamma_1, gamma_2, gamma_3 at t (expression route is authoritative)."""
        if self.exprs is not None:
            t = np.asarray(t, dtype=float)
            tj = Jet.variable(t, 0, 1, order)
            zero = Jet.constant(np.zeros(t.shape), 1, order)
            return [evaluate_jet(e, {"t": tj}, 1, order) + zero for e in self.exprs]
        return [j.truncate(order) for j in finite_difference_jets(self.sampler, t, self.scale)]

    def point(self, t) -> np.ndarray:
        return np.array([j.value for j in self.jets(t, order=0)])

    def __repr__(self) -> str:
        return f"Curve(name={self.name!r}, components={self.components!r})"


@dataclass
class CurveKinematics:
    """Point, coordinate velocity, frame components a = (omega_1, omega_2, omega)(gamma') and a'."""
    point: np.ndarray
    velocity: np.ndarray
    a: np.ndarray
    a_dot: np.ndarray


@dataclass
class CurveCurvatureLimit:
    classification: CurveClass
    value: float
    omega: float
    omega_dot: float
    rescaled: bool = False
    near_threshold: bool = False


@dataclass
class CurvatureExtrapolation:
    classification: CurveClass
    predicted: float
    fitted: float
    observed_order: float
    grid: List[float] = field(default_factory=list)
    values: List[float] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return not self.observed_order > 0


# 📌 **Kinematics**
def frame_kinematics(g: GroupModel, c: Curve, t) -> CurveKinematics:
    """
    Frame components of gamma' and their t-derivatives via jets of the
    composite B(gamma(t)) gamma'(t).
    """
    gamma = c.jets(t, order=2)
    velocity = [j.diff(0) for j in gamma]
    point = np.array([j.value for j in gamma])
    speed = np.sqrt(sum(v.value ** 2 for v in velocity))
    scale = np.maximum(1.0, np.max(np.abs(point), axis=0))
    if np.any(speed <= 1e-14 * scale):
        raise CurveRegularityError(f"{c.name}: velocity vanishes (curve not regular)")
    B = g.coframe_jets(gamma)
    a = [sum((B[k][j] * velocity[j] for j in range(3)), Jet.constant(0.0, 1, 1)) for k in range(3)]
    return CurveKinematics(
        point=point,
        velocity=np.array([v.value for v in velocity]),
        a=np.array([ak.value for ak in a]),
        a_dot=np.array([ak.first(0) for ak in a]),
    )


def covariant_acceleration(gamma_L: np.ndarray, a: np.ndarray, a_dot: np.ndarray) -> np.ndarray:
    """Frame components of nabla_{gamma'} gamma' = a' + sum_ij a_i a_j Gamma^k_ij."""
    return a_dot + np.einsum("i...,j...,ijk->k...", a, a, gamma_L)


def _curvature_from(nabla: np.ndarray, a: np.ndarray, L: float) -> np.ndarray:
    nn = GroupModel.inner(nabla, nabla, L)
    vv = GroupModel.inner(a, a, L)
    nv = GroupModel.inner(nabla, a, L)
    squared = nn / vv ** 2 - nv ** 2 / vv ** 3
    return np.sqrt(np.maximum(squared, 0.0))


# 📌 **Curvature at finite L**
def curve_curvature(
    g: GroupModel, c: Curve, t, L: float, connection: Optional[ConnectionTable] = None
) -> np.ndarray:
    """
    Curvature k^L of a curve in (G, g_L) from the derived connection table.
    :param g: Group model.
    :param c: Regular curve.
    :param t: Parameter value (or array of values).
    :param L: Metric parameter, L > 0.
    :return: k^L at t.
    """
    connection = connection or koszul_connection(g)
    kin = frame_kinematics(g, c, t)
    nabla = covariant_acceleration(connection.evaluate(L), kin.a, kin.a_dot)
    return _curvature_from(nabla, kin.a, L)


# 📌 **Sub-Riemannian limit**
def leading_connection(connection: ConnectionTable) -> Tuple[np.ndarray, np.ndarray]:
    """
    (Gamma1, Gamma0): L^1 and L^0 coefficient arrays. The limit formulas
    require every other exponent to be negative and the L^1 part to vanish
    on horizontal pairs and in the X3 direction.
    """
    for i in range(3):
        for j in range(3):
            for k in range(3):
                for exponent, _ in connection[i, j, k].items():
                    if exponent > 0 and exponent != 2:
                        raise UnsupportedGroupError(
                            f"{connection.group_name}: connection entry carries s^{exponent}; limit formulas need L^1 at most"
                        )
    gamma1 = connection.coefficient_array(2)
    if np.any(gamma1[:, :, 2] != 0) or np.any(gamma1[:2, :2, :] != 0):
        raise UnsupportedGroupError(f"{connection.group_name}: L^1 connection terms outside the admissible pattern")
    return gamma1, connection.coefficient_array(0)


def classify(a3: float, a3_dot: float, scale: float) -> Tuple[CurveClass, bool]:
    """Trichotomy on omega(gamma') and its derivative; second item flags the warning band."""
    eps = HORIZONTAL_TOLERANCE * scale
    if abs(a3) > eps:
        return CurveClass.NON_HORIZONTAL, abs(a3) <= WARNING_BAND * eps
    if abs(a3_dot) <= eps:
        return CurveClass.HORIZONTAL_FLAT, False
    return CurveClass.HORIZONTAL_TRANSITION, abs(a3_dot) <= WARNING_BAND * eps


def horizontal_scale(a: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(a))))


def curve_curvature_limit(
    g: GroupModel, c: Curve, t: float, connection: Optional[ConnectionTable] = None
) -> CurveCurvatureLimit:
    """
    Limit of k^L as L -> infinity with the horizontality classification.
    The transition branch reports the limit of k^L / sqrt(L).
    """
    connection = connection or koszul_connection(g)
    gamma1, gamma0 = leading_connection(connection)
    kin = frame_kinematics(g, c, float(t))
    a, a_dot = kin.a, kin.a_dot
    classification, near = classify(a[2], a_dot[2], horizontal_scale(a))
    if near:
        logger.warning(f"{c.name} at t={t}: horizontality decision inside the warning band")
    h = a[0] ** 2 + a[1] ** 2

    if classification is CurveClass.NON_HORIZONTAL:
        W = np.einsum("i,j,ijk->k", a, a, gamma1)
        value = float(np.hypot(W[0], W[1]) / a[2] ** 2)
    elif classification is CurveClass.HORIZONTAL_FLAT:
        if h == 0:
            raise CurveRegularityError(f"{c.name}: horizontal speed vanishes at a horizontal point")
        nabla_h = a_dot[:2] + np.einsum("i,j,ijk->k", a[:2], a[:2], gamma0[:2, :2, :2])
        squared = (nabla_h @ nabla_h) / h ** 2 - (nabla_h @ a[:2]) ** 2 / h ** 3
        value = float(np.sqrt(max(squared, 0.0)))
    else:
        if h == 0:
            raise CurveRegularityError(f"{c.name}: horizontal speed vanishes at a transition point")
        vertical = a_dot[2] + np.einsum("i,j,ij->", a[:2], a[:2], gamma0[:2, :2, 2])
        value = float(abs(vertical) / h)

    return CurveCurvatureLimit(
        classification=classification,
        value=value,
        omega=float(a[2]),
        omega_dot=float(a_dot[2]),
        rescaled=classification is CurveClass.HORIZONTAL_TRANSITION,
        near_threshold=near,
    )


def extrapolate_curvature(
    g: GroupModel, c: Curve, t: float, grid: Sequence[float] = tuple(DEFAULT_CURVE_GRID)
) -> CurvatureExtrapolation:
    """
    Richardson extrapolation of k^L (or k^L / sqrt(L) at transition points)
    on a geometric grid, against the classification's predicted limit.
    """
    connection = koszul_connection(g)
    limit = curve_curvature_limit(g, c, t, connection)
    kin = frame_kinematics(g, c, float(t))
    values = []
    for L in grid:
        nabla = covariant_acceleration(connection.evaluate(L), kin.a, kin.a_dot)
        k = float(_curvature_from(nabla, kin.a, L))
        values.append(k / np.sqrt(L) if limit.rescaled else k)
    result = extrapolate(grid, values)
    if not result.converged:
        logger.warning(f"{c.name} at t={t}: curvature sequence not convergent (order {result.observed_order:.3g})")
    return CurvatureExtrapolation(
        classification=limit.classification,
        predicted=limit.value,
        fitted=float(result.limit),
        observed_order=result.observed_order,
        grid=[float(L) for L in grid],
        values=values,
    )


# 📌 **Closed forms**
@dataclass
class CoordinateDerivatives:
    """gamma, gamma' and gamma'' in chart coordinates."""
    point: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray


def coordinate_derivatives(c: Curve, t) -> CoordinateDerivatives:
    gamma = c.jets(t, order=2)
    return CoordinateDerivatives(
        point=np.array([j.value for j in gamma]),
        velocity=np.array([j.first(0) for j in gamma]),
        acceleration=np.array([j.derivative((2,)) for j in gamma]),
    )


def _require_closed_form(g: GroupModel) -> None:
    if g.name not in CLOSED_FORM_GROUPS:
        raise UnsupportedGroupError(f"No closed-form curve formulas for group '{g.name}'")


def _e11_horizontal_parts(d: CoordinateDerivatives) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """b = -e^-x3 x1' + e^x3 x2', its t-derivative P and omega'."""
    (_, _, x3), (v1, v2, v3), (w1, w2, _) = d.point, d.velocity, d.acceleration
    up, down = np.exp(x3), np.exp(-x3)
    b = -down * v1 + up * v2
    P = w2 * up + v2 * v3 * up - w1 * down + v1 * v3 * down
    omega_dot = -(-v3 * down * v1 + down * w1 + v3 * up * v2 + up * w2) / np.sqrt(2.0)
    return b, P, omega_dot


def closed_form_kinematics(g: GroupModel, c: Curve, t) -> CurveKinematics:
    """Frame components of gamma' and their derivatives written out in coordinates."""
    _require_closed_form(g)
    d = coordinate_derivatives(c, t)
    (x1, _, _), (v1, v2, v3), (w1, w2, w3) = d.point, d.velocity, d.acceleration
    if g.name == "affine":
        a = np.array([v1 / x1, v3, v2 / x1 - v3])
        a_dot = np.array([(w1 * x1 - v1 ** 2) / x1 ** 2, w3, (w2 * x1 - v2 * v1) / x1 ** 2 - w3])
    else:
        b, P, omega_dot = _e11_horizontal_parts(d)
        omega = -(np.exp(-d.point[2]) * v1 + np.exp(d.point[2]) * v2) / np.sqrt(2.0)
        a = np.array([v3, b / np.sqrt(2.0), omega])
        a_dot = np.array([w3, P / np.sqrt(2.0), omega_dot])
    return CurveKinematics(point=d.point, velocity=d.velocity, a=a, a_dot=a_dot)


def covariant_acceleration_closed(g: GroupModel, c: Curve, t, L: float) -> np.ndarray:
    """Frame components of nabla_{gamma'} gamma' from the expanded group formulas."""
    kin = closed_form_kinematics(g, c, t)
    (a1, a2, omega), (a1_dot, a2_dot, omega_dot) = kin.a, kin.a_dot
    if g.name == "affine":
        x1, (v1, v2, _) = kin.point[0], kin.velocity
        return np.array(
            [
                a1_dot + L * omega * v2 / x1,
                a2_dot - L * omega * v1 / x1,
                omega_dot - omega * v1 / x1,
            ]
        )
    return np.array(
        [
            a1_dot + (L + 1) * a2 * omega,
            a2_dot - L * omega * a1,
            omega_dot - a2 * a1 / L,
        ]
    )


def curve_curvature_closed(g: GroupModel, c: Curve, t, L: float) -> np.ndarray:
    """
    k^L from the expanded covariant acceleration with g_L = diag(1, 1, L)
    written out; an independent route to curve_curvature.
    """
    kin = closed_form_kinematics(g, c, t)
    n1, n2, n3 = covariant_acceleration_closed(g, c, t, L)
    a1, a2, omega = kin.a
    speed = a1 ** 2 + a2 ** 2 + L * omega ** 2
    squared = (n1 ** 2 + n2 ** 2 + L * n3 ** 2) / speed ** 2 - (a1 * n1 + a2 * n2 + L * omega * n3) ** 2 / speed ** 3
    return np.sqrt(np.maximum(squared, 0.0))


def horizontal_curvature_closed(g: GroupModel, c: Curve, t, L: float) -> float:
    """k^L of an affine curve at a horizontal point, where omega(gamma') = 0."""
    if g.name != "affine":
        raise UnsupportedGroupError(f"No horizontal-point curvature formula for group '{g.name}'")
    d = coordinate_derivatives(c, float(t))
    (x1, _, _), (v1, v2, v3), (w1, w2, w3) = d.point, d.velocity, d.acceleration
    omega = v2 / x1 - v3
    if abs(omega) > HORIZONTAL_TOLERANCE * horizontal_scale(np.array([v1 / x1, v3, omega])):
        raise CurveRegularityError(f"{c.name} at t={t}: not a horizontal point (omega = {float(omega):.3e})")
    omega_dot = (w2 * x1 - v2 * v1) / x1 ** 2 - w3
    horizontal = (v1 / x1) ** 2 + v3 ** 2
    first = ((w1 * x1 - v1 ** 2) / x1 ** 2) ** 2 + w3 ** 2 + L * omega_dot ** 2
    second = (w1 * v1 * x1 - v1 ** 3) / x1 ** 3 + v3 * w3
    return float(np.sqrt(max(first / horizontal ** 2 - second ** 2 / horizontal ** 3, 0.0)))


def curve_curvature_limit_closed(g: GroupModel, c: Curve, t: float) -> CurveCurvatureLimit:
    """Branch formulas of the curvature limit written out in coordinates."""
    _require_closed_form(g)
    kin = closed_form_kinematics(g, c, float(t))
    d = coordinate_derivatives(c, float(t))
    (x1, _, _), (v1, v2, v3), (w1, _, w3) = d.point, d.velocity, d.acceleration
    omega, omega_dot = float(kin.a[2]), float(kin.a_dot[2])
    classification, near = classify(omega, omega_dot, horizontal_scale(kin.a))

    b, P, _ = _e11_horizontal_parts(d)
    horizontal = (v1 / x1) ** 2 + v3 ** 2 if g.name == "affine" else 0.5 * b ** 2 + v3 ** 2
    if classification is not CurveClass.NON_HORIZONTAL and horizontal == 0:
        raise CurveRegularityError(f"{c.name}: horizontal speed vanishes at a horizontal point")

    if g.name == "affine":
        if classification is CurveClass.NON_HORIZONTAL:
            value = np.sqrt(v1 ** 2 + v2 ** 2) / (abs(x1) * abs(omega))
        elif classification is CurveClass.HORIZONTAL_FLAT:
            first = ((w1 * x1 - v1 ** 2) / x1 ** 2) ** 2 + w3 ** 2
            second = (w1 * v1 * x1 - v1 ** 3) / x1 ** 3 + v3 * w3
            value = np.sqrt(max(first / horizontal ** 2 - second ** 2 / horizontal ** 3, 0.0))
        else:
            value = abs(omega_dot) / horizontal
    else:
        if classification is CurveClass.NON_HORIZONTAL:
            value = np.sqrt(horizontal) / abs(omega)
        elif classification is CurveClass.HORIZONTAL_FLAT:
            first = w3 ** 2 + 0.5 * P ** 2
            second = v3 * w3 + 0.5 * b * P
            value = np.sqrt(max(first / horizontal ** 2 - second ** 2 / horizontal ** 3, 0.0))
        else:
            value = abs(omega_dot) / horizontal

    return CurveCurvatureLimit(
        classification=classification,
        value=float(value),
        omega=omega,
        omega_dot=omega_dot,
        rescaled=classification is CurveClass.HORIZONTAL_TRANSITION,
        near_threshold=near,
    )
