from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.errors import (
    CharacteristicPointError,
    CurveOffSurfaceError,
    CurveRegularityError,
    DegenerateImmersionError,
    DomainViolationError,
    EngineError,
    NonPositiveParameterError,
    UnsupportedGroupError,
)
from app.services.connection_curvature import (
    REFERENCE_FOR_GROUP,
    ConnectionTable,
    CurvatureTable,
    curvature_tensor,
    koszul_connection,
    reference_curvature,
    sectional_curvature,
)
from app.services.curves import (
    CLOSED_FORM_GROUPS,
    Curve,
    CurveClass,
    CurveKinematics,
    CurvatureExtrapolation,
    classify,
    covariant_acceleration,
    frame_kinematics,
    horizontal_scale,
    leading_connection,
)
from app.services.groups import COORDINATES, GroupModel
from app.utils.expr_parser import evaluate, evaluate_jet, parse
from app.utils.extrapolation import (
    DEFAULT_CURVE_GRID,
    DEFAULT_FIT_EXPONENTS,
    DEFAULT_FIT_GRID,
    MonomialFit,
    extrapolate,
    fit_monomials,
)
from app.utils.jets import Jet
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

ON_SURFACE_TOLERANCE = 1e-9
CURVE_ON_SURFACE_TOLERANCE = 1e-8
CHARACTERISTIC_TOLERANCE = 1e-8
PATCH_VARIABLES = ("u1", "u2")
MEAN_CURVATURE_EXPONENTS = (0.0, -0.5, -1.0)
MODES = ("reference", "published")


# 📌 **Surfaces**
class LevelSurface:
    """Sigma = {u = 0}; the orientation sign multiplies u and fixes the normal v_L."""

    def __init__(self, u: str, orientation: int = 1, name: str = "surface"):
        if orientation not in (1, -1):
            raise ValueError("Orientation must be +1 or -1")
        self.u = u
        self.expr = parse(u, COORDINATES)
        self.orientation = orientation
        self.name = name

    def flipped(self) -> "LevelSurface":
        return LevelSurface(self.u, -self.orientation, self.name)

    def value(self, point) -> np.ndarray:
        point = [np.asarray(x, dtype=float) for x in point]
        env = dict(zip(COORDINATES, point))
        shape = np.broadcast_shapes(*(x.shape for x in point))
        return self.orientation * np.broadcast_to(evaluate(self.expr, env), shape)

    def jet(self, coordinate_jets: Sequence[Jet]) -> Jet:
        env = dict(zip(COORDINATES, coordinate_jets))
        nvars, order = coordinate_jets[0].nvars, coordinate_jets[0].order
        zero = Jet.constant(np.zeros(coordinate_jets[0].value.shape), nvars, order)
        return (evaluate_jet(self.expr, env, nvars, order) + zero) * float(self.orientation)

    def __repr__(self) -> str:
        return f"LevelSurface(u={self.u!r}, orientation={self.orientation})"


class ParamPatch:
    """
    f(u1, u2) over the rectangle domain; `periodic` marks parameters that wrap
    (polar angles), which the quadrature integrates with the periodic rule.
    """

    def __init__(
        self,
        f: Sequence[str],
        domain: Tuple[Tuple[float, float], Tuple[float, float]],
        name: str = "patch",
        periodic: Tuple[bool, bool] = (False, False),
    ):
        self.f = tuple(f)
        self.exprs = tuple(parse(s, frozenset(PATCH_VARIABLES)) for s in self.f)
        self.domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        self.name = name
        self.periodic = tuple(periodic)

    def jets(self, at, order: int) -> List[Jet]:
        at = [np.asarray(x, dtype=float) for x in at]
        shape = np.broadcast_shapes(*(x.shape for x in at))
        env = {name: Jet.variable(np.broadcast_to(at[i], shape), i, 2, order) for i, name in enumerate(PATCH_VARIABLES)}
        zero = Jet.constant(np.zeros(shape), 2, order)
        return [evaluate_jet(e, env, 2, order) + zero for e in self.exprs]

    def point(self, at) -> np.ndarray:
        return np.array([j.value for j in self.jets(at, 0)])

    def __repr__(self) -> str:
        return f"ParamPatch(name={self.name!r}, f={self.f!r})"


@dataclass
class SurfaceFrameData:
    """Adapted orthonormal frame of Sigma in (G, g_L); vectors are frame components on X1, X2, X3."""
    L: float
    p: np.ndarray
    q: np.ndarray
    r: np.ndarray
    l: np.ndarray
    l_L: np.ndarray
    p_bar: np.ndarray
    q_bar: np.ndarray
    p_bar_L: np.ndarray
    q_bar_L: np.ndarray
    r_bar_L: np.ndarray
    v_L: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    is_characteristic: np.ndarray
    orientation: int = 1


@dataclass
class SecondFundamentalForm:
    matrix: np.ndarray
    L: float

    @property
    def trace(self) -> np.ndarray:
        return self.matrix[0, 0] + self.matrix[1, 1]

    @property
    def det(self) -> np.ndarray:
        return self.matrix[0, 0] * self.matrix[1, 1] - self.matrix[0, 1] * self.matrix[1, 0]

    @property
    def symmetry_defect(self) -> np.ndarray:
        return np.abs(self.matrix[0, 1] - self.matrix[1, 0])


@dataclass
class LimitCurvatureBreakdown:
    mode: str
    limit: float
    divergence: float
    mean_curvature_limit: float
    a_value: Optional[float] = None
    e11_value: Optional[float] = None
    limit_error: Optional[float] = None
    divergence_error: Optional[float] = None
    condition_number: Optional[float] = None


@dataclass
class GeodesicCurvature:
    unsigned: np.ndarray
    signed: np.ndarray
    tangency_residual: np.ndarray
    projection_residual: np.ndarray


@dataclass
class GeodesicCurvatureLimit:
    classification: CurveClass
    signed: float
    unsigned: float
    omega: float
    rescaled: bool = False
    near_threshold: bool = False


# 📌 **Gradient jets and frames**
@dataclass
class GradientJets:
    frame: List[List[Jet]]
    p: Jet
    q: Jet
    x3u: Jet
    scale: np.ndarray


@dataclass
class NormalJets:
    p_bar: Jet
    q_bar: Jet
    p_bar_L: Jet
    q_bar_L: Jet
    r_bar_L: Jet
    rho: Jet
    r_over_l: Jet


def _point_jets(point, order: int) -> List[Jet]:
    point = [np.asarray(x, dtype=float) for x in point]
    shape = np.broadcast_shapes(*(x.shape for x in point))
    return [Jet.variable(np.broadcast_to(x, shape), n, 3, order) for n, x in enumerate(point)]


def require_positive_L(L: float) -> float:
    if not L > 0:
        raise NonPositiveParameterError(f"L must be positive, got {L}")
    return float(L)


def gradient_jets(
    g: GroupModel, s: LevelSurface, point, order: int, tolerance: Optional[float] = ON_SURFACE_TOLERANCE
) -> GradientJets:
    """p = X1 u, q = X2 u and X3 u as jets one order below `order`."""
    coords = _point_jets(point, order)
    u = s.jet(coords)
    if tolerance is not None:
        scale = np.maximum(1.0, np.max(np.abs([c.value for c in coords]), axis=0))
        worst = float(np.max(np.abs(u.value) / scale))
        if worst > tolerance:
            raise DomainViolationError(f"{s.name}: point is not on the surface (|u| = {worst:.3e})")
    frame = g.frame_jets(coords)
    p, q, x3u = (GroupModel.frame_derivative(frame, u, i) for i in range(3))
    gradient_scale = np.maximum(1.0, np.max(np.abs([u.first(j) for j in range(3)]), axis=0))
    return GradientJets(frame=frame, p=p, q=q, x3u=x3u, scale=gradient_scale)


def _frame_data(grad: GradientJets, L: float, s: LevelSurface, strict: bool = True) -> SurfaceFrameData:
    L = require_positive_L(L)
    sqrt_L = np.sqrt(L)
    p, q, x3u = grad.p.value, grad.q.value, grad.x3u.value
    l = np.hypot(p, q)
    characteristic = l < CHARACTERISTIC_TOLERANCE * grad.scale
    if strict and np.any(characteristic):
        raise CharacteristicPointError(f"{s.name}: horizontal gradient vanishes (characteristic point)")
    r = x3u / sqrt_L
    l_L = np.sqrt(l ** 2 + r ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_l = np.where(characteristic, np.nan, l)
        safe_l_L = np.where(characteristic, np.nan, l_L)
        p_bar, q_bar = p / safe_l, q / safe_l
        p_bar_L, q_bar_L, r_bar_L = p / safe_l_L, q / safe_l_L, r / safe_l_L
        ratio = safe_l / safe_l_L
    zeros = np.zeros_like(p_bar)
    return SurfaceFrameData(
        L=L,
        p=p,
        q=q,
        r=r,
        l=l,
        l_L=l_L,
        p_bar=p_bar,
        q_bar=q_bar,
        p_bar_L=p_bar_L,
        q_bar_L=q_bar_L,
        r_bar_L=r_bar_L,
        v_L=np.array([p_bar_L, q_bar_L, r_bar_L / sqrt_L]),
        e1=np.array([q_bar, -p_bar, zeros]),
        e2=np.array([r_bar_L * p_bar, r_bar_L * q_bar, -ratio / sqrt_L]),
        is_characteristic=characteristic,
        orientation=s.orientation,
    )


def normal_jets(grad: GradientJets, L: float) -> NormalJets:
    inv_sqrt_L = 1.0 / np.sqrt(L)
    l = (grad.p * grad.p + grad.q * grad.q).sqrt()
    r = grad.x3u * inv_sqrt_L
    l_L = (l * l + r * r).sqrt()
    return NormalJets(
        p_bar=grad.p / l,
        q_bar=grad.q / l,
        p_bar_L=grad.p / l_L,
        q_bar_L=grad.q / l_L,
        r_bar_L=r / l_L,
        rho=grad.x3u / l,
        r_over_l=r / l,
    )


def _along(frame: List[List[Jet]], f: Jet, i: int) -> np.ndarray:
    return GroupModel.frame_derivative(frame, f, i).value


def surface_frames(g: GroupModel, s: LevelSurface, point, L: float, strict: bool = True) -> SurfaceFrameData:
    """
    Adapted frame (v_L, e1, e2) at points of Sigma.
    :param point: Coordinates, shape (3,) or (3, *batch).
    :param strict: Refuse characteristic points; otherwise flag them and leave NaN frames.
    """
    return _frame_data(gradient_jets(g, s, point, order=1), L, s, strict)


def complex_structure(frames: SurfaceFrameData, w: np.ndarray) -> np.ndarray:
    """J_L on the tangent plane: J(e1) = e2, J(e2) = -e1."""
    alpha = GroupModel.inner(w, frames.e1, frames.L)
    beta = GroupModel.inner(w, frames.e2, frames.L)
    return alpha * frames.e2 - beta * frames.e1


# 📌 **Second fundamental form**
def second_fundamental_form_def(
    g: GroupModel, s: LevelSurface, point, L: float, connection: Optional[ConnectionTable] = None
) -> SecondFundamentalForm:
    """h_ij = <nabla_{e_i} v_L, e_j>_L by differentiating v_L along e_i and contracting the connection."""
    try:
        grad = gradient_jets(g, s, point, order=2)
        frames = _frame_data(grad, L, s)
        normal = normal_jets(grad, L)
        v = [normal.p_bar_L, normal.q_bar_L, normal.r_bar_L * (1.0 / np.sqrt(L))]
        Xv = np.array([[_along(grad.frame, v[k], m) for k in range(3)] for m in range(3)])
        gamma = (connection or koszul_connection(g)).evaluate(L)
        rows = []
        for e in (frames.e1, frames.e2):
            nabla = np.einsum("m...,mk...->k...", e, Xv) + np.einsum("m...,n...,mnk->k...", e, frames.v_L, gamma)
            rows.append([GroupModel.inner(nabla, f, L) for f in (frames.e1, frames.e2)])
        return SecondFundamentalForm(np.array(rows), L)
    except EngineError as e:
        logger.error(f"Second fundamental form failed on {s.name}: {str(e)}", exc_info=True)
        raise


def second_fundamental_form_closed(g: GroupModel, s: LevelSurface, point, L: float) -> SecondFundamentalForm:
    """Closed-form entries for the affine group and E(1,1), in terms of p, q, X3 u and their frame derivatives."""
    if g.name not in CLOSED_FORM_GROUPS:
        raise UnsupportedGroupError(f"No closed-form second fundamental form for group '{g.name}'")
    grad = gradient_jets(g, s, point, order=2)
    f = _frame_data(grad, L, s)
    normal = normal_jets(grad, L)
    sqrt_L = np.sqrt(L)

    def X(jet: Jet, i: int) -> np.ndarray:
        return _along(grad.frame, jet, i)

    horizontal_divergence = X(normal.p_bar, 0) + X(normal.q_bar, 1)
    e1_r = f.q_bar * X(normal.r_bar_L, 0) - f.p_bar * X(normal.r_bar_L, 1)
    h11 = (f.l / f.l_L) * horizontal_divergence
    h12 = -(f.l_L / f.l) * e1_r - sqrt_L / 2
    h22 = (
        -((f.l / f.l_L) ** 2) * f.r_bar_L * (f.p_bar * X(normal.r_over_l, 0) + f.q_bar * X(normal.r_over_l, 1))
        + X(normal.r_bar_L, 2) / sqrt_L
    )
    if g.name == "affine":
        h22 = h22 - f.p_bar_L
    else:
        h11 = h11 - f.p_bar * f.q_bar * f.r_bar_L / sqrt_L
        h12 = (
            h12
            + (f.q_bar_L ** 2 - f.p_bar_L ** 2) / (2 * sqrt_L)
            + f.r_bar_L ** 2 * (f.q_bar ** 2 - f.p_bar ** 2) / (2 * sqrt_L)
        )
        h22 = h22 + f.p_bar_L * f.q_bar_L * f.r_bar_L / sqrt_L + f.p_bar * f.q_bar * f.r_bar_L ** 3 / sqrt_L
    return SecondFundamentalForm(np.array([[h11, h12], [h12, h22]]), L)


# 📌 **Mean curvature**
def mean_curvature(g: GroupModel, s: LevelSurface, point, L: float) -> np.ndarray:
    return second_fundamental_form_def(g, s, point, L).trace


def _horizontal_divergence(g: GroupModel, s: LevelSurface, point) -> Tuple[np.ndarray, GradientJets, NormalJets, SurfaceFrameData]:
    grad = gradient_jets(g, s, point, order=2)
    frames = _frame_data(grad, 1.0, s)
    normal = normal_jets(grad, 1.0)
    divergence = _along(grad.frame, normal.p_bar, 0) + _along(grad.frame, normal.q_bar, 1)
    return divergence, grad, normal, frames


def mean_curvature_limit(g: GroupModel, s: LevelSurface, point) -> np.ndarray:
    """X1(p_bar) + X2(q_bar), minus p_bar in the affine group."""
    if g.name not in CLOSED_FORM_GROUPS:
        raise UnsupportedGroupError(f"No mean-curvature limit formula for group '{g.name}'")
    divergence, _, _, frames = _horizontal_divergence(g, s, point)
    if g.name == "affine":
        return divergence - frames.p_bar
    return divergence


def mean_curvature_numeric(
    g: GroupModel, s: LevelSurface, point, grid: Sequence[float] = tuple(DEFAULT_FIT_GRID)
) -> MonomialFit:
    """Fit of H_L over the grid in {1, L^-1/2, L^-1}; the constant is the limit."""
    values = [float(mean_curvature(g, s, point, L)) for L in grid]
    noise = 64 * np.finfo(float).eps * np.sqrt(np.asarray(grid)) * max(1.0, max(abs(v) for v in values))
    return fit_monomials(grid, values, MEAN_CURVATURE_EXPONENTS, noise)


# 📌 **Gaussian curvature**
def ambient_curvature(g: GroupModel, mode: str = "reference") -> CurvatureTable:
    """Derived curvature table (reference mode) or the published one (published mode)."""
    if mode == "reference":
        return curvature_tensor(koszul_connection(g), g)
    if mode == "published":
        if g.name not in REFERENCE_FOR_GROUP:
            raise UnsupportedGroupError(f"No published curvature table for group '{g.name}'")
        return reference_curvature(REFERENCE_FOR_GROUP[g.name][1])
    raise ValueError(f"Unknown mode '{mode}', expected one of {MODES}")


def gaussian_curvature_extrinsic(
    g: GroupModel, s: LevelSurface, point, L: float, mode: str = "reference"
) -> np.ndarray:
    """Gauss equation: K(e1, e2) + det II^L."""
    table = ambient_curvature(g, mode)
    frames = surface_frames(g, s, point, L)
    if mode == "published":
        form = second_fundamental_form_closed(g, s, point, L)
    else:
        form = second_fundamental_form_def(g, s, point, L)
    return sectional_curvature(table, frames.e1, frames.e2, L) + form.det


def _jet_inner(a: Sequence[Jet], b: Sequence[Jet], L: float) -> Jet:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2] * float(L)


def patch_tangents(g: GroupModel, patch: ParamPatch, at, order: int = 2) -> Tuple[List[Jet], List[Jet]]:
    """Frame components of f_u1 and f_u2 as jets of the given order in (u1, u2)."""
    f = patch.jets(at, order + 1)
    B = g.coframe_jets(f)
    zero = Jet.constant(0.0, 2, order)
    a = [sum((B[k][j] * f[j].diff(0) for j in range(3)), zero) for k in range(3)]
    b = [sum((B[k][j] * f[j].diff(1) for j in range(3)), zero) for k in range(3)]
    return a, b


def _det3(rows) -> np.ndarray:
    shape = np.broadcast_shapes(*(np.shape(x) for row in rows for x in row))
    M = np.array([[np.broadcast_to(np.asarray(x, dtype=float), shape) for x in row] for row in rows])
    return np.linalg.det(np.moveaxis(M, (0, 1), (-2, -1)))


def gaussian_curvature_intrinsic(g: GroupModel, patch: ParamPatch, at, L: float) -> np.ndarray:
    """Brioschi formula on E, F, G of the metric induced by g_L through the patch."""
    L = require_positive_L(L)
    a, b = patch_tangents(g, patch, at, order=2)
    E, F, G = _jet_inner(a, a, L), _jet_inner(a, b, L), _jet_inner(b, b, L)
    e, f_, g_ = E.value, F.value, G.value
    W = e * g_ - f_ ** 2
    if np.any(W <= 1e-12 * e * g_):
        raise DegenerateImmersionError(f"{patch.name}: tangent vectors are linearly dependent")
    E_u, E_v, F_u, F_v, G_u, G_v = E.first(0), E.first(1), F.first(0), F.first(1), G.first(0), G.first(1)
    E_vv, F_uv, G_uu = E.derivative((0, 2)), F.derivative((1, 1)), G.derivative((2, 0))
    det1 = _det3(
        [
            [-0.5 * E_vv + F_uv - 0.5 * G_uu, 0.5 * E_u, F_u - 0.5 * E_v],
            [F_v - 0.5 * G_u, e, f_],
            [0.5 * G_v, f_, g_],
        ]
    )
    det2 = _det3([[0.0 * e, 0.5 * E_v, 0.5 * G_u], [0.5 * E_v, e, f_], [0.5 * G_u, f_, g_]])
    return (det1 - det2) / W ** 2


# 📌 **Gaussian-curvature limits**
def gaussian_limit_published(g: GroupModel, s: LevelSurface, point) -> LimitCurvatureBreakdown:
    """
    Published asymptotics: affine K ~ -q_bar^2 L + A with
    A = -e1(rho) - p_bar H0 - p_bar^2 rho^2 + 2 q_bar rho, rho = X3u / l;
    E(1,1) K -> -e1(rho) - rho^2.
    """
    if g.name not in CLOSED_FORM_GROUPS:
        raise UnsupportedGroupError(f"No published curvature limit for group '{g.name}'")
    divergence_h, grad, normal, f = _horizontal_divergence(g, s, point)
    rho = normal.rho.value
    e1_rho = f.q_bar * _along(grad.frame, normal.rho, 0) - f.p_bar * _along(grad.frame, normal.rho, 1)
    if g.name == "affine":
        a_value = -e1_rho - f.p_bar * divergence_h - f.p_bar ** 2 * rho ** 2 + 2 * f.q_bar * rho
        return LimitCurvatureBreakdown(
            mode="published",
            limit=a_value,
            divergence=-(f.q_bar ** 2),
            mean_curvature_limit=divergence_h - f.p_bar,
            a_value=a_value,
        )
    value = -e1_rho - rho ** 2
    return LimitCurvatureBreakdown(
        mode="published",
        limit=value,
        divergence=np.zeros_like(value),
        mean_curvature_limit=divergence_h,
        e11_value=value,
    )


def gaussian_limit_numeric(
    g: GroupModel, s: LevelSurface, point, grid: Sequence[float] = tuple(DEFAULT_FIT_GRID)
) -> LimitCurvatureBreakdown:
    """Fits reference-mode K^{Sigma,L} on the grid; c1 is the divergence coefficient and c0 the limit."""
    try:
        values = [float(gaussian_curvature_extrinsic(g, s, point, L)) for L in grid]
        noise = 64 * np.finfo(float).eps * np.asarray(grid) * max(1.0, max(abs(v) for v in values))
        fit = fit_monomials(grid, values, DEFAULT_FIT_EXPONENTS, noise)
        if g.name in CLOSED_FORM_GROUPS:
            mean_limit = float(mean_curvature_limit(g, s, point))
        else:
            mean_limit = mean_curvature_numeric(g, s, point, grid).coefficient(0.0)
        breakdown = LimitCurvatureBreakdown(
            mode="numeric",
            limit=fit.coefficient(0.0),
            divergence=fit.coefficient(1.0),
            mean_curvature_limit=mean_limit,
            limit_error=fit.error(0.0),
            divergence_error=fit.error(1.0),
            condition_number=fit.condition_number,
        )
        if g.name in CLOSED_FORM_GROUPS:
            published = gaussian_limit_published(g, s, point)
            breakdown.a_value, breakdown.e11_value = published.a_value, published.e11_value
        return breakdown
    except EngineError as e:
        logger.error(f"Gaussian-curvature fit failed on {s.name}: {str(e)}", exc_info=True)
        raise


# 📌 **Curves on surfaces**
def _curve_on_surface(
    g: GroupModel, s: LevelSurface, c: Curve, t, L: float
) -> Tuple[CurveKinematics, SurfaceFrameData, np.ndarray]:
    kin = frame_kinematics(g, c, t)
    scale = np.maximum(1.0, np.max(np.abs(kin.point), axis=0))
    off = float(np.max(np.abs(s.value(kin.point)) / scale))
    if off > CURVE_ON_SURFACE_TOLERANCE:
        raise CurveOffSurfaceError(f"{c.name} leaves {s.name} (|u| = {off:.3e})")
    frames = _frame_data(gradient_jets(g, s, kin.point, order=1, tolerance=None), L, s)
    speed = np.sqrt(GroupModel.inner(kin.a, kin.a, L))
    tangency = np.abs(GroupModel.inner(kin.a, frames.v_L, L))
    if np.any(tangency > CURVE_ON_SURFACE_TOLERANCE * speed):
        raise CurveOffSurfaceError(f"{c.name} is not tangent to {s.name} (residual {float(np.max(tangency)):.3e})")
    return kin, frames, tangency / speed


def geodesic_curvature(
    g: GroupModel, s: LevelSurface, c: Curve, t, L: float, connection: Optional[ConnectionTable] = None
) -> GeodesicCurvature:
    """
    Geodesic curvature of a curve on Sigma: nabla_{gamma'} gamma' projected on
    (e1, e2) by inner products; the signed variant pairs it with J_L(gamma').
    """
    L = require_positive_L(L)
    kin, frames, tangency = _curve_on_surface(g, s, c, t, L)
    nabla = covariant_acceleration((connection or koszul_connection(g)).evaluate(L), kin.a, kin.a_dot)
    alpha = GroupModel.inner(kin.a, frames.e1, L)
    beta = GroupModel.inner(kin.a, frames.e2, L)
    n1 = GroupModel.inner(nabla, frames.e1, L)
    n2 = GroupModel.inner(nabla, frames.e2, L)
    n3 = GroupModel.inner(nabla, frames.v_L, L)
    speed2 = alpha ** 2 + beta ** 2
    squared = (n1 ** 2 + n2 ** 2) / speed2 ** 2 - (n1 * alpha + n2 * beta) ** 2 / speed2 ** 3
    residual = nabla - n1 * frames.e1 - n2 * frames.e2 - n3 * frames.v_L
    scale = np.maximum(1.0, np.sqrt(GroupModel.inner(nabla, nabla, L)))
    return GeodesicCurvature(
        unsigned=np.sqrt(np.maximum(squared, 0.0)),
        signed=(alpha * n2 - beta * n1) / speed2 ** 1.5,
        tangency_residual=tangency,
        projection_residual=np.sqrt(np.abs(GroupModel.inner(residual, residual, L))) / scale,
    )


def geodesic_curvature_limit(
    g: GroupModel, s: LevelSurface, c: Curve, t: float, connection: Optional[ConnectionTable] = None
) -> GeodesicCurvatureLimit:
    """
    Signed and unsigned limits with the horizontality trichotomy. The
    transition branch reports limits of k^L / sqrt(L).
    """
    connection = connection or koszul_connection(g)
    gamma1, gamma0 = leading_connection(connection)
    kin, frames, _ = _curve_on_surface(g, s, c, float(t), 1.0)
    a, a_dot = kin.a, kin.a_dot
    classification, near = classify(a[2], a_dot[2], horizontal_scale(a))
    if near:
        logger.warning(f"{c.name} on {s.name} at t={t}: horizontality decision inside the warning band")
    e1 = np.array([frames.q_bar, -frames.p_bar])

    if classification is CurveClass.NON_HORIZONTAL:
        W = np.einsum("i,j,ijk->k", a, a, gamma1)
        projected = float(W[:2] @ e1)
        signed = projected / (a[2] * abs(a[2]))
        unsigned = abs(projected) / a[2] ** 2
    elif classification is CurveClass.HORIZONTAL_FLAT:
        signed, unsigned = 0.0, 0.0
    else:
        alpha = float(e1 @ a[:2])
        if alpha == 0:
            raise CurveRegularityError(f"{c.name}: tangent component along e1 vanishes at a transition point")
        vertical = a_dot[2] + np.einsum("i,j,ij->", a[:2], a[:2], gamma0[:2, :2, 2])
        signed = float(-alpha * vertical / abs(alpha) ** 3)
        unsigned = float(abs(vertical) / alpha ** 2)

    return GeodesicCurvatureLimit(
        classification=classification,
        signed=float(signed),
        unsigned=float(unsigned),
        omega=float(a[2]),
        rescaled=classification is CurveClass.HORIZONTAL_TRANSITION,
        near_threshold=near,
    )


def extrapolate_geodesic_curvature(
    g: GroupModel,
    s: LevelSurface,
    c: Curve,
    t: float,
    grid: Sequence[float] = tuple(DEFAULT_CURVE_GRID),
    signed: bool = True,
) -> CurvatureExtrapolation:
    connection = koszul_connection(g)
    limit = geodesic_curvature_limit(g, s, c, t, connection)
    values = []
    for L in grid:
        k = geodesic_curvature(g, s, c, float(t), L, connection)
        value = float(k.signed if signed else k.unsigned)
        values.append(value / np.sqrt(L) if limit.rescaled else value)
    result = extrapolate(grid, values)
    if not result.converged:
        logger.warning(f"{c.name} on {s.name} at t={t}: geodesic curvature sequence not convergent")
    return CurvatureExtrapolation(
        classification=limit.classification,
        predicted=limit.signed if signed else limit.unsigned,
        fitted=float(result.limit),
        observed_order=result.observed_order,
        grid=[float(L) for L in grid],
        values=values,
    )


def limit_line_density(
    g: GroupModel, s: LevelSurface, c: Curve, t, connection: Optional[ConnectionTable] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    k^{inf,s} ds / dt in product form <W / omega, e1>, continuous through
    horizontal points; returns it with omega(gamma') and |horizontal part|^2.
    """
    gamma1, _ = leading_connection(connection or koszul_connection(g))
    kin, frames, _ = _curve_on_surface(g, s, c, t, 1.0)
    a = kin.a
    mixed = gamma1[:2, 2, :] + gamma1[2, :2, :]
    w_over_omega = np.einsum("i...,ik->k...", a[:2], mixed) + np.multiply.outer(gamma1[2, 2, :], a[2])
    density = w_over_omega[0] * frames.q_bar - w_over_omega[1] * frames.p_bar
    return density, a[2], a[0] ** 2 + a[1] ** 2
