import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.models.errors import FitError

DEFAULT_CURVE_GRID = [4.0 ** k for k in range(1, 11)]
DEFAULT_FIT_GRID = [4.0 ** k for k in range(2, 10)]
# L, 1, L^-1/2 plus the next two correction orders
DEFAULT_FIT_EXPONENTS = (1.0, 0.0, -0.5, -1.0, -1.5)
RICHARDSON_LEVELS = 6


@dataclass
class RichardsonResult:
    limit: float
    observed_order: float
    step_ratio: float
    values: List[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.observed_order > 0


@dataclass
class MonomialFit:
    exponents: List[float]
    coefficients: List[float]
    errors: List[float]
    residual_norm: float
    condition_number: float

    def coefficient(self, exponent: float) -> float:
        return self.coefficients[self.exponents.index(exponent)]

    def error(self, exponent: float) -> float:
        return self.errors[self.exponents.index(exponent)]

    def as_dict(self) -> Dict[str, float]:
        return {f"L^{e:g}": c for e, c in zip(self.exponents, self.coefficients)}


def richardson_limit(step_ratio: float, values: Sequence[float]) -> float:
    """Repeated Richardson elimination for errors in integer powers of the step."""
    n_steps = len(values)

    if n_steps == 1:
        return values[0]

    last_level = list(values)
    this_level = None

    for m in range(1, n_steps):
        this_level = []
        for i in range(n_steps - m):
            mult = step_ratio ** m
            factor = 1.0 / (mult - 1.0)
            low = last_level[i]
            high = last_level[i + 1]
            moreacc = factor * (mult * high - low)
            this_level.append(moreacc)
        last_level = this_level
    return this_level[0]


def observed_order(values: Sequence[float], step_ratio: float) -> float:
    """
    Empirical exponent p in |v_n - v_inf| ~ L^-p from the last three values;
    infinite when the sequence is already constant.
    """
    if len(values) < 3:
        return float("nan")
    d1 = values[-2] - values[-3]
    d2 = values[-1] - values[-2]
    scale = max(1.0, max(abs(v) for v in values[-3:]))
    if abs(d2) <= 1e-14 * scale:
        return math.inf
    if abs(d1) <= 1e-14 * scale:
        return 0.0
    return math.log(abs(d1) / abs(d2)) / math.log(step_ratio)


def grid_ratio(grid: Sequence[float]) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size < 2 or np.any(grid <= 0):
        raise FitError("Extrapolation grid must hold at least two positive values")
    ratios = grid[1:] / grid[:-1]
    if np.max(np.abs(ratios - ratios[0])) > 1e-9 * ratios[0] or ratios[0] <= 1.0:
        raise FitError("Extrapolation grid must be increasing and geometric")
    return float(ratios[0])


def extrapolate(grid: Sequence[float], values: Sequence[float], levels: int = RICHARDSON_LEVELS) -> RichardsonResult:
    """
    Richardson limit L -> infinity of values sampled on a geometric grid.
    :param grid: Increasing geometric L values.
    :param values: Sequence f(L) on the grid.
    :param levels: Number of tail values used in the elimination.
    :return: RichardsonResult with the limit and the empirical order.
    """
    ratio = grid_ratio(grid)
    tail = list(values)[-levels:]
    limit = richardson_limit(ratio, tail)
    return RichardsonResult(limit=limit, observed_order=observed_order(values, ratio), step_ratio=ratio, values=list(values))


def fit_monomials(
    grid: Sequence[float],
    values: Sequence[float],
    exponents: Sequence[float] = DEFAULT_FIT_EXPONENTS,
    noise: Optional[Sequence[float]] = None,
) -> MonomialFit:
    """
    Least-squares fit of values ~ sum_e c_e L^e with scaled columns.

    Coefficient error bars propagate the per-sample noise (absolute) through
    the pseudo-inverse; the residual norm is folded in as a floor.
    """
    L = np.asarray(grid, dtype=float)
    y = np.asarray(values, dtype=float)
    exponents = list(exponents)
    if L.size < len(exponents):
        raise FitError(f"Need at least {len(exponents)} samples, got {L.size}")
    A = np.stack([L ** e for e in exponents], axis=1)
    scale = np.max(np.abs(A), axis=0)
    scaled = A / scale
    condition = float(np.linalg.cond(scaled))
    if not np.isfinite(condition) or condition > 1e12:
        raise FitError("Monomial fit is ill-conditioned", condition)
    solution, _, _, _ = np.linalg.lstsq(scaled, y, rcond=None)
    coefficients = solution / scale
    residual = float(np.linalg.norm(scaled @ solution - y))
    sigma = np.asarray(noise, dtype=float) if noise is not None else np.zeros_like(y)
    sigma = np.maximum(sigma, residual / math.sqrt(max(L.size - len(exponents), 1)))
    pinv = np.linalg.pinv(scaled)
    errors = np.abs(pinv) @ sigma / scale
    return MonomialFit(
        exponents=exponents,
        coefficients=[float(c) for c in coefficients],
        errors=[float(e) for e in errors],
        residual_norm=residual,
        condition_number=condition,
    )


def decay_order(grid: Sequence[float], errors: Sequence[float]) -> float:
    """Slope p of log|error| ~ -p log L over the grid (least squares)."""
    L = np.asarray(grid, dtype=float)
    e = np.abs(np.asarray(errors, dtype=float))
    if np.any(e == 0):
        return math.inf
    slope, _ = np.polyfit(np.log(L), np.log(e), 1)
    return float(-slope)
