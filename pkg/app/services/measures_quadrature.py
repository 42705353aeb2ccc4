from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from app.models.errors import DegenerateImmersionError
from app.services.curves import HORIZONTAL_TOLERANCE, Curve, frame_kinematics
from app.services.groups import GroupModel
from app.services.surfaces import LevelSurface, ParamPatch, patch_tangents, require_positive_L, surface_frames
from app.utils.logger import Logger

# Initialize Logger
logger = Logger(__name__).get_logger()

GAUSS_LEGENDRE_NODES = 16
TRAPEZOID_NODES = 64
REFINEMENT_LIMIT = 8
# Tensor grids grow fourfold per level
PATCH_REFINEMENT_LIMIT = 5
DEFAULT_TOLERANCE = 1e-10

Density = Callable[[np.ndarray], np.ndarray]


@dataclass
class LengthDensity:
    """
    Per-parameter densities of ds_L, ds = |omega| and ds_bar = |horizontal|^2 / (2|omega|).
    At horizontal points ds_bar is NaN and `horizontal_form` = |horizontal| / sqrt(L) applies.
    """
    ds_L: np.ndarray
    ds: np.ndarray
    ds_bar: np.ndarray
    horizontal_form: np.ndarray
    horizontal: np.ndarray


@dataclass
class AreaDensity:
    finite: np.ndarray
    limit: np.ndarray
    printed_limit: Optional[np.ndarray] = None


@dataclass
class QuadratureSpec:
    rule: str = "auto"
    initial_nodes: int = GAUSS_LEGENDRE_NODES
    refinement_limit: int = REFINEMENT_LIMIT
    tolerance: float = DEFAULT_TOLERANCE

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("Quadrature tolerance must be positive")
        if self.refinement_limit < 1 or self.initial_nodes < 1:
            raise ValueError("Quadrature refinement limit and node count must be positive")
        if self.rule not in ("auto", "gauss-legendre", "trapezoid"):
            raise ValueError(f"Unknown quadrature rule '{self.rule}'")


@dataclass
class QuadratureResult:
    value: float
    error: float
    converged: bool
    levels: int
    evaluations: int


# 📌 **Length**
def length_density(g: GroupModel, c: Curve, t, L: float) -> LengthDensity:
    L = require_positive_L(L)
    kin = frame_kinematics(g, c, t)
    a = kin.a
    horizontal_speed2 = a[0] ** 2 + a[1] ** 2
    scale = np.maximum(1.0, np.max(np.abs(a), axis=0))
    horizontal = np.abs(a[2]) <= HORIZONTAL_TOLERANCE * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        ds_bar = np.where(horizontal, np.nan, horizontal_speed2 / (2 * np.abs(a[2])))
    return LengthDensity(
        ds_L=np.sqrt(horizontal_speed2 + L * a[2] ** 2),
        ds=np.abs(a[2]),
        ds_bar=ds_bar,
        horizontal_form=np.sqrt(horizontal_speed2) / np.sqrt(L),
        horizontal=horizontal,
    )


# 📌 **Area**
def _tangent_values(g: GroupModel, patch: ParamPatch, at) -> Tuple[np.ndarray, np.ndarray]:
    a, b = patch_tangents(g, patch, at, order=0)
    return np.array([x.value for x in a]), np.array([x.value for x in b])


def area_density_param(g: GroupModel, patch: ParamPatch, at, L: float) -> AreaDensity:
    """
    sqrt(det g_ij) of the induced metric from the frame components of
    f_u1, f_u2, and the L -> infinity density of its 1/sqrt(L) rescaling.
    """
    L = require_positive_L(L)
    a, b = _tangent_values(g, patch, at)
    vertical_1 = a[1] * b[2] - a[2] * b[1]
    vertical_2 = a[2] * b[0] - a[0] * b[2]
    horizontal = a[0] * b[1] - a[1] * b[0]
    finite = np.sqrt(L * (vertical_1 ** 2 + vertical_2 ** 2) + horizontal ** 2)
    if np.any(finite == 0):
        raise DegenerateImmersionError(f"{patch.name}: tangent vectors are linearly dependent")
    printed = printed_limit_density(patch, at) if g.name == "affine" else None
    return AreaDensity(finite=finite, limit=np.hypot(vertical_1, vertical_2), printed_limit=printed)


def printed_limit_density(patch: ParamPatch, at) -> np.ndarray:
    """
    The affine-group limit area integrand in its published closed form,
    including the -2 (f3)_u1 (f3)_u2 term of the first bracket.
    """
    f = patch.jets(at, 1)
    f1 = f[0].value
    d = [[j.first(k) for k in range(2)] for j in f]
    first = (d[2][0] * d[1][1] - d[2][1] * d[1][0]) / f1 - 2 * d[2][0] * d[2][1]
    second = (d[0][0] * d[1][1] - d[0][1] * d[1][0]) / f1 ** 2 + (d[0][1] * d[2][0] - d[0][0] * d[2][1]) / f1
    return np.sqrt(first ** 2 + second ** 2)


def limit_area_forms(g: GroupModel, s: LevelSurface, patch: ParamPatch, at) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pullback densities through the patch of
    d sigma = (p_bar omega_2 - q_bar omega_1) ^ omega and
    d sigma_bar = rho omega_1 ^ omega_2 - rho^2 / 2 d sigma, rho = X3 u / l.
    """
    frames = surface_frames(g, s, patch.point(at), 1.0)
    rho = frames.r / frames.l
    a, b = _tangent_values(g, patch, at)
    sigma = (frames.p_bar * a[1] - frames.q_bar * a[0]) * b[2] - (frames.p_bar * b[1] - frames.q_bar * b[0]) * a[2]
    sigma_bar = rho * (a[0] * b[1] - a[1] * b[0]) - 0.5 * rho ** 2 * sigma
    return sigma, sigma_bar


def surface_measure_density(g: GroupModel, s: LevelSurface, patch: ParamPatch, at, L: float) -> np.ndarray:
    """
    Signed (1/sqrt(L)) d sigma_{Sigma,L} density from the adapted coframe:
    (l / l_L) d sigma + r_bar_L / sqrt(L) omega_1 ^ omega_2.
    """
    frames = surface_frames(g, s, patch.point(at), L)
    sigma, _ = limit_area_forms(g, s, patch, at)
    a, b = _tangent_values(g, patch, at)
    horizontal = a[0] * b[1] - a[1] * b[0]
    return (frames.l / frames.l_L) * sigma + frames.r_bar_L / np.sqrt(frames.L) * horizontal


# 📌 **Quadrature**
def _gauss_legendre(lo: float, hi: float, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _trapezoid(lo: float, hi: float, count: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes = lo + (hi - lo) * np.arange(count) / count
    return nodes, np.full(count, (hi - lo) / count)


def _axis_rule(lo: float, hi: float, periodic: bool, level: int, spec: QuadratureSpec) -> Tuple[np.ndarray, np.ndarray]:
    use_trapezoid = spec.rule == "trapezoid" or (spec.rule == "auto" and periodic)
    if use_trapezoid:
        return _trapezoid(lo, hi, max(spec.initial_nodes, TRAPEZOID_NODES) * 2 ** level)
    return _gauss_legendre(lo, hi, 2 ** level, spec.initial_nodes)


def _refine(
    estimate: Callable[[int], Tuple[float, int]], spec: QuadratureSpec, label: str, limit: Optional[int] = None
) -> QuadratureResult:
    limit = limit or spec.refinement_limit
    previous, evaluations = estimate(0)
    for level in range(1, limit + 1):
        value, count = estimate(level)
        evaluations += count
        delta = abs(value - previous)
        floor = spec.tolerance * max(1.0, abs(value))
        if delta <= floor:
            return QuadratureResult(value=value, error=max(delta, floor), converged=True, levels=level, evaluations=evaluations)
        previous = value
    logger.warning(f"Quadrature of {label} did not reach tolerance {spec.tolerance:g} (last change {delta:.3e})")
    return QuadratureResult(value=value, error=delta, converged=False, levels=limit, evaluations=evaluations)


def integrate_curve(density: Density, c: Curve, spec: Optional[QuadratureSpec] = None) -> QuadratureResult:
    """
    Integral of density(t) dt over the curve's interval: periodic trapezoid for
    closed curves, Gauss-Legendre panels otherwise, refined until two levels agree.
    """
    spec = spec or QuadratureSpec()
    lo, hi = c.interval

    def estimate(level: int) -> Tuple[float, int]:
        nodes, weights = _axis_rule(lo, hi, c.closed, level, spec)
        values = np.broadcast_to(np.asarray(density(nodes), dtype=float), nodes.shape)
        return float(np.dot(weights, values)), nodes.size

    return _refine(estimate, spec, c.name)


def integrate_patch(density: Density, patch: ParamPatch, spec: Optional[QuadratureSpec] = None) -> QuadratureResult:
    """Tensor-product integral of density(at) du1 du2 over the patch domain; `at` has shape (2, n1, n2)."""
    spec = spec or QuadratureSpec()

    def estimate(level: int) -> Tuple[float, int]:
        rules = [
            _axis_rule(lo, hi, periodic, level, spec) for (lo, hi), periodic in zip(patch.domain, patch.periodic)
        ]
        (x1, w1), (x2, w2) = rules
        at = np.array(np.meshgrid(x1, x2, indexing="ij"))
        values = np.broadcast_to(np.asarray(density(at), dtype=float), at.shape[1:])
        return float(np.einsum("i,ij,j->", w1, values, w2)), values.size

    return _refine(estimate, spec, patch.name, min(spec.refinement_limit, PATCH_REFINEMENT_LIMIT))
