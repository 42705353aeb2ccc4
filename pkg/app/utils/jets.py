"""
Truncated multivariate Taylor arithmetic (forward-mode jets).

A jet of order n in d variables stores the Taylor coefficients c_alpha of a
function around a point for every multi-index |alpha| <= n, in graded order,
so truncating to a lower order is a slice. Coefficient arrays have shape
(ncoef, *batch): one jet evaluates many points at once.

Partial derivatives are recovered as c_alpha * alpha!.
"""
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from app.models.errors import ExprDomainError

MAX_ORDER = 3

Number = Union[float, int, np.ndarray]


@dataclass(frozen=True)
class JetBasis:
    nvars: int
    order: int
    monomials: Tuple[Tuple[int, ...], ...]
    index: Dict[Tuple[int, ...], int] = field(repr=False)
    product_left: np.ndarray = field(repr=False)
    product_right: np.ndarray = field(repr=False)
    product_matrix: np.ndarray = field(repr=False)
    factorials: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.monomials)


def _graded_monomials(nvars: int, order: int) -> List[Tuple[int, ...]]:
    monomials = []
    for degree in range(order + 1):
        for combo in combinations_with_replacement(range(nvars), degree):
            alpha = [0] * nvars
            for var in combo:
                alpha[var] += 1
            monomials.append(tuple(alpha))
    return monomials


@lru_cache(maxsize=None)
def jet_basis(nvars: int, order: int) -> JetBasis:
    if order < 0:
        raise ValueError("Jet order must be non-negative")
    monomials = _graded_monomials(nvars, order)
    index = {alpha: i for i, alpha in enumerate(monomials)}
    left, right, target = [], [], []
    for i, a in enumerate(monomials):
        for j, b in enumerate(monomials):
            if sum(a) + sum(b) > order:
                continue
            left.append(i)
            right.append(j)
            target.append(index[tuple(x + y for x, y in zip(a, b))])
    matrix = np.zeros((len(monomials), len(left)))
    matrix[target, np.arange(len(left))] = 1.0
    factorials = np.array([math.prod(math.factorial(k) for k in alpha) for alpha in monomials], dtype=float)
    return JetBasis(
        nvars=nvars,
        order=order,
        monomials=tuple(monomials),
        index=index,
        product_left=np.array(left, dtype=int),
        product_right=np.array(right, dtype=int),
        product_matrix=matrix,
        factorials=factorials,
    )


@lru_cache(maxsize=None)
def _derivative_table(nvars: int, order: int, var: int) -> Tuple[np.ndarray, np.ndarray]:
    """Source indices and factors mapping an order-n jet to its d/dx_var jet of order n-1."""
    full = jet_basis(nvars, order)
    lower = jet_basis(nvars, order - 1)
    sources, factors = [], []
    for alpha in lower.monomials:
        raised = list(alpha)
        raised[var] += 1
        sources.append(full.index[tuple(raised)])
        factors.append(float(raised[var]))
    return np.array(sources, dtype=int), np.array(factors)


def _lift(coeffs: np.ndarray, batch_ndim: int) -> np.ndarray:
    missing = batch_ndim - (coeffs.ndim - 1)
    if missing <= 0:
        return coeffs
    return coeffs.reshape(coeffs.shape[:1] + (1,) * missing + coeffs.shape[1:])


def _as_array(value: Number) -> np.ndarray:
    return np.asarray(value, dtype=float)


class Jet:
    """Truncated Taylor expansion of a scalar field, batched over points."""

    __slots__ = ("basis", "coeffs")
    __array_ufunc__ = None

    def __init__(self, basis: JetBasis, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != basis.size:
            raise ValueError(f"Expected {basis.size} coefficients, got {coeffs.shape[0]}")
        self.basis = basis
        self.coeffs = coeffs

    # 📌 **Construction**
    @classmethod
    def constant(cls, value: Number, nvars: int, order: int) -> "Jet":
        basis = jet_basis(nvars, order)
        value = _as_array(value)
        coeffs = np.zeros((basis.size,) + value.shape)
        coeffs[0] = value
        return cls(basis, coeffs)

    @classmethod
    def variable(cls, value: Number, var: int, nvars: int, order: int) -> "Jet":
        jet = cls.constant(value, nvars, order)
        if order >= 1:
            unit = [0] * nvars
            unit[var] = 1
            jet.coeffs[jet.basis.index[tuple(unit)]] = 1.0
        return jet

    @classmethod
    def from_partials(cls, partials: Dict[Tuple[int, ...], Number], nvars: int, order: int) -> "Jet":
        """Builds a jet from partial-derivative values keyed by multi-index."""
        basis = jet_basis(nvars, order)
        shape = np.broadcast_shapes(*(np.shape(v) for v in partials.values()))
        coeffs = np.zeros((basis.size,) + shape)
        for alpha, value in partials.items():
            i = basis.index[tuple(alpha)]
            coeffs[i] = _as_array(value) / basis.factorials[i]
        return cls(basis, coeffs)

    # 📌 **Inspection**
    @property
    def order(self) -> int:
        return self.basis.order

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[0]

    def derivative(self, alpha: Sequence[int]) -> np.ndarray:
        """Partial derivative d^alpha at the expansion point."""
        i = self.basis.index[tuple(alpha)]
        return self.coeffs[i] * self.basis.factorials[i]

    def first(self, var: int) -> np.ndarray:
        alpha = [0] * self.nvars
        alpha[var] = 1
        return self.derivative(alpha)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        basis = jet_basis(self.nvars, order)
        return Jet(basis, self.coeffs[: basis.size])

    def diff(self, var: int) -> "Jet":
        """Jet of the partial derivative with respect to one variable (order drops by one)."""
        if self.order == 0:
            raise ValueError("Cannot differentiate an order-0 jet")
        sources, factors = _derivative_table(self.nvars, self.order, var)
        coeffs = self.coeffs[sources] * _lift(factors, self.coeffs.ndim - 1)
        return Jet(jet_basis(self.nvars, self.order - 1), coeffs)

    # 📌 **Arithmetic**
    def _align(self, other: "Jet"):
        if other.nvars != self.nvars:
            raise ValueError("Jets over different variable sets cannot be combined")
        order = min(self.order, other.order)
        a = self.truncate(order).coeffs
        b = other.truncate(order).coeffs
        ndim = max(a.ndim, b.ndim) - 1
        return jet_basis(self.nvars, order), _lift(a, ndim), _lift(b, ndim)

    def _with_scalar(self, value: Number):
        value = _as_array(value)
        coeffs = _lift(self.coeffs, value.ndim)
        return coeffs, value

    def __add__(self, other):
        if isinstance(other, Jet):
            basis, a, b = self._align(other)
            return Jet(basis, a + b)
        coeffs, value = self._with_scalar(other)
        shape = np.broadcast_shapes(coeffs.shape[1:], value.shape)
        out = np.array(np.broadcast_to(coeffs, coeffs.shape[:1] + shape))
        out[0] = out[0] + value
        return Jet(self.basis, out)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(self.basis, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            basis, a, b = self._align(other)
            pairs = a[basis.product_left] * b[basis.product_right]
            return Jet(basis, np.tensordot(basis.product_matrix, pairs, axes=1))
        coeffs, value = self._with_scalar(other)
        return Jet(self.basis, coeffs * value)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        value = _as_array(other)
        if np.any(value == 0):
            raise ExprDomainError("Division by zero")
        return self * (1.0 / value)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent: int) -> "Jet":
        if not isinstance(exponent, (int, np.integer)):
            raise TypeError("Jet powers must be integers")
        exponent = int(exponent)
        if exponent < 0:
            return self.reciprocal() ** (-exponent)
        result = Jet.constant(np.ones(self.value.shape), self.nvars, self.order)
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    # 📌 **Elementary functions**
    def _compose(self, derivatives: List[np.ndarray]) -> "Jet":
        """Taylor composition f(self) given f^(n)(value) for n = 0..order."""
        h = Jet(self.basis, self.coeffs.copy())
        h.coeffs[0] = 0.0
        result = Jet(self.basis, np.zeros_like(self.coeffs)) + derivatives[self.order] / math.factorial(self.order)
        for n in range(self.order - 1, -1, -1):
            result = result * h + derivatives[n] / math.factorial(n)
        return result

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self._compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        a = self.value
        if np.any(a <= 0):
            raise ExprDomainError("log of a non-positive value")
        derivs = [np.log(a)] + [(-1) ** (n - 1) * math.factorial(n - 1) / a ** n for n in range(1, self.order + 1)]
        return self._compose(derivs)

    def sin(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [s, c, -s, -c]
        return self._compose([cycle[n % 4] for n in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = np.sin(self.value), np.cos(self.value)
        cycle = [c, -s, -c, s]
        return self._compose([cycle[n % 4] for n in range(self.order + 1)])

    def sqrt(self) -> "Jet":
        a = self.value
        if np.any(a < 0):
            raise ExprDomainError("sqrt of a negative value")
        if self.order > 0 and np.any(a == 0):
            raise ExprDomainError("sqrt is not differentiable at 0")
        derivs = []
        coefficient = 1.0
        for n in range(self.order + 1):
            derivs.append(coefficient * a ** (0.5 - n))
            coefficient *= 0.5 - n
        return self._compose(derivs)

    def reciprocal(self) -> "Jet":
        a = self.value
        if np.any(a == 0):
            raise ExprDomainError("Division by zero")
        derivs = [(-1) ** n * math.factorial(n) / a ** (n + 1) for n in range(self.order + 1)]
        return self._compose(derivs)

    def __repr__(self) -> str:
        return f"Jet(nvars={self.nvars}, order={self.order}, value={self.value!r})"


def finite_difference_jets(
    sampler: Callable[[np.ndarray], np.ndarray],
    t: Number,
    scale: float = 1.0,
) -> List[Jet]:
    """
    Order-2 univariate jets of each component of sampler(t) from central differences.

    Step h = eps^(1/3) * scale. The sampler maps an array of parameters to an
    array of shape (ncomponents, *t.shape).
    """
    t = _as_array(t)
    h = np.finfo(float).eps ** (1.0 / 3.0) * max(scale, 1e-300)
    f0 = np.asarray(sampler(t), dtype=float)
    fp = np.asarray(sampler(t + h), dtype=float)
    fm = np.asarray(sampler(t - h), dtype=float)
    first = (fp - fm) / (2.0 * h)
    second = (fp - 2.0 * f0 + fm) / (h * h)
    return [
        Jet.from_partials({(0,): f0[i], (1,): first[i], (2,): second[i]}, nvars=1, order=2)
        for i in range(f0.shape[0])
    ]
