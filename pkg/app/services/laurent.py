import math
import re
from fractions import Fraction
from typing import Dict, Iterator, Mapping, Tuple, Union
from app.models.errors import LaurentRangeError, NonPositiveParameterError

# Exponents are powers of s = sqrt(L); L^m is exponent 2m.
MIN_EXPONENT = -4
MAX_EXPONENT = 4

Scalar = Union[int, Fraction]

_TERM_PATTERN = re.compile(
    r"^(?P<coef>\d+(?:/\d+)?)?(?:\*?(?P<var>[sL])(?:\^(?P<exp>-?\d+))?)?$"
)


def _check_exponent(k: int) -> None:
    if not MIN_EXPONENT <= k <= MAX_EXPONENT:
        raise LaurentRangeError(
            f"Exponent s^{k} outside [{MIN_EXPONENT}, {MAX_EXPONENT}]"
        )


class SqrtLPoly:
    """
    Laurent polynomial in s = sqrt(L) with rational coefficients.

    Instances are immutable; arithmetic returns new objects and drops zero
    coefficients so equality is structural.
    """
    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[int, Scalar] = None):
        clean: Dict[int, Fraction] = {}
        for k, c in (terms or {}).items():
            c = Fraction(c)
            if c == 0:
                continue
            _check_exponent(int(k))
            clean[int(k)] = c
        self._terms = dict(sorted(clean.items(), reverse=True))

    # 📌 **Constructors**
    @classmethod
    def zero(cls) -> "SqrtLPoly":
        return cls()

    @classmethod
    def constant(cls, value: Scalar) -> "SqrtLPoly":
        return cls({0: value})

    @classmethod
    def monomial(cls, exponent: int, coefficient: Scalar = 1) -> "SqrtLPoly":
        return cls({exponent: coefficient})

    @classmethod
    def parse(cls, text: str) -> "SqrtLPoly":
        """
        Reads the canonical rendering back, e.g. "3/4*L + 1", "-1/2*s", "L^2 - 1/4*L^-1".
        """
        source = text.replace(" ", "")
        if source in ("", "0"):
            return cls.zero()
        if source[0] not in "+-":
            source = "+" + source
        terms: Dict[int, Fraction] = {}
        source = source.replace("^-", "^~")
        for sign, body in re.findall(r"([+-])([^+-]+)", source):
            body = body.replace("~", "-")
            match = _TERM_PATTERN.match(body)
            if not match or (match.group("coef") is None and match.group("var") is None):
                raise ValueError(f"Cannot read Laurent term '{body}' in '{text}'")
            coef = Fraction(match.group("coef") or 1)
            var = match.group("var")
            power = int(match.group("exp") or 1) if var else 0
            exponent = 2 * power if var == "L" else power
            value = coef if sign == "+" else -coef
            terms[exponent] = terms.get(exponent, Fraction(0)) + value
        return cls(terms)

    # 📌 **Accessors**
    @property
    def terms(self) -> Dict[int, Fraction]:
        return dict(self._terms)

    def coefficient(self, exponent: int) -> Fraction:
        return self._terms.get(exponent, Fraction(0))

    def items(self) -> Iterator[Tuple[int, Fraction]]:
        return iter(self._terms.items())

    def is_zero(self) -> bool:
        return not self._terms

    # 📌 **Ring operations**
    @staticmethod
    def _coerce(other) -> "SqrtLPoly":
        if isinstance(other, SqrtLPoly):
            return other
        if isinstance(other, (int, Fraction)):
            return SqrtLPoly.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, Fraction(0)) + c
        return SqrtLPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "SqrtLPoly":
        return SqrtLPoly({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other + (-self)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        out: Dict[int, Fraction] = {}
        for k1, c1 in self._terms.items():
            for k2, c2 in other._terms.items():
                k = k1 + k2
                out[k] = out.get(k, Fraction(0)) + c1 * c2
        return SqrtLPoly(out)

    __rmul__ = __mul__

    def shift(self, exponent: int) -> "SqrtLPoly":
        """Multiplies by the monomial s^exponent (exact division by L is shift(-2))."""
        return SqrtLPoly({k + exponent: c for k, c in self._terms.items()})

    def scale(self, factor: Scalar) -> "SqrtLPoly":
        return SqrtLPoly({k: c * Fraction(factor) for k, c in self._terms.items()})

    def evaluate(self, L: float) -> float:
        if not L > 0:
            raise NonPositiveParameterError(f"L must be positive, got {L}")
        s = math.sqrt(L)
        return math.fsum(float(c) * s ** k for k, c in self._terms.items())

    # 📌 **Comparison and rendering**
    def __eq__(self, other) -> bool:
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        return hash(tuple(self._terms.items()))

    def __repr__(self) -> str:
        return f"SqrtLPoly('{self}')"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for index, (k, c) in enumerate(self._terms.items()):
            sign = "-" if c < 0 else "+"
            magnitude = abs(c)
            monomial = _render_monomial(k)
            if monomial and magnitude == 1:
                body = monomial
            elif monomial:
                body = f"{_render_fraction(magnitude)}*{monomial}"
            else:
                body = _render_fraction(magnitude)
            if index == 0:
                parts.append(body if sign == "+" else f"-{body}")
            else:
                parts.append(f"{sign} {body}")
        return " ".join(parts)


def _render_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _render_monomial(k: int) -> str:
    if k == 0:
        return ""
    if k % 2 == 0:
        power = k // 2
        return "L" if power == 1 else f"L^{power}"
    return "s" if k == 1 else f"s^{k}"


def poly_add(a: SqrtLPoly, b: SqrtLPoly) -> SqrtLPoly:
    return a + b


def poly_mul(a: SqrtLPoly, b: SqrtLPoly) -> SqrtLPoly:
    return a * b


def poly_eval(a: SqrtLPoly, L: float) -> float:
    return a.evaluate(L)


ZERO = SqrtLPoly.zero()
ONE = SqrtLPoly.constant(1)
L_MONOMIAL = SqrtLPoly.monomial(2)
