from fractions import Fraction

import numpy as np
import pytest

from app.models.errors import LaurentRangeError, NonPositiveParameterError
from app.services.laurent import L_MONOMIAL, ONE, ZERO, SqrtLPoly


@pytest.mark.parametrize(
    "poly, text",
    [
        (SqrtLPoly({2: Fraction(3, 4), 0: 1}), "3/4*L + 1"),
        (SqrtLPoly.monomial(1), "s"),
        (SqrtLPoly.monomial(3), "s^3"),
        (SqrtLPoly.monomial(-1), "s^-1"),
        (SqrtLPoly.monomial(-2), "L^-1"),
        (SqrtLPoly.monomial(4, Fraction(1, 4)), "1/4*L^2"),
        (SqrtLPoly.monomial(1, Fraction(-1, 2)), "-1/2*s"),
        (ZERO, "0"),
    ],
)
def test_canonical_rendering(poly, text):
    assert str(poly) == text
    assert SqrtLPoly.parse(text) == poly


def test_ring_operations_are_exact():
    assert (L_MONOMIAL + ONE) * (L_MONOMIAL - ONE) == SqrtLPoly({4: 1, 0: -1})
    assert (L_MONOMIAL * Fraction(1, 2)).shift(-2) == SqrtLPoly.constant(Fraction(1, 2))
    assert (L_MONOMIAL - L_MONOMIAL).is_zero()
    assert 1 - L_MONOMIAL == SqrtLPoly.parse("1 - L")


def test_evaluate_uses_sqrt_of_L():
    assert SqrtLPoly.monomial(1).evaluate(4.0) == pytest.approx(2.0)
    assert SqrtLPoly.parse("1/4*L^2 - L").evaluate(2.0) == pytest.approx(-1.0)


def test_evaluate_rejects_non_positive_L():
    with pytest.raises(NonPositiveParameterError):
        L_MONOMIAL.evaluate(0.0)


def test_exponent_window_is_enforced():
    with pytest.raises(LaurentRangeError):
        SqrtLPoly.monomial(4) * SqrtLPoly.monomial(2)
    with pytest.raises(LaurentRangeError):
        SqrtLPoly.monomial(-5)


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        SqrtLPoly.parse("3*x")


def random_poly(rng, low=-1, high=1):
    terms = {}
    for k in range(low, high + 1):
        if rng.random() < 0.8:
            terms[k] = Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
    return SqrtLPoly(terms)


def test_ring_axioms_on_random_polynomials():
    rng = np.random.default_rng(21)
    for _ in range(50):
        a, b, c = random_poly(rng), random_poly(rng), random_poly(rng)
        assert a + b == b + a
        assert (a + b) + c == a + (b + c)
        assert a * b == b * a
        assert (a * b) * c == a * (b * c)
        assert a * (b + c) == a * b + a * c
        assert a + ZERO == a
        assert a * ONE == a
        assert (a - a).is_zero()
        assert SqrtLPoly.parse(str(a)) == a


def test_evaluation_is_a_ring_homomorphism():
    rng = np.random.default_rng(22)
    for _ in range(20):
        a, b = random_poly(rng, -2, 2), random_poly(rng, -2, 2)
        for L in (0.5, 3.0, 40.0):
            assert (a * b).evaluate(L) == pytest.approx(a.evaluate(L) * b.evaluate(L), rel=1e-12, abs=1e-12)
            assert (a + b).evaluate(L) == pytest.approx(a.evaluate(L) + b.evaluate(L), rel=1e-12, abs=1e-12)
