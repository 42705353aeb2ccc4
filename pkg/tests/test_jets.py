import math

import numpy as np
import pytest

from app.models.errors import ExprDomainError
from app.utils.expr_parser import evaluate, evaluate_jet, parse
from app.utils.jets import Jet, finite_difference_jets


def test_product_rule_in_two_variables():
    x = Jet.variable(2.0, 0, 2, 2)
    y = Jet.variable(3.0, 1, 2, 2)
    f = x * y * y
    assert float(f.value) == pytest.approx(18.0)
    assert float(f.first(0)) == pytest.approx(9.0)
    assert float(f.first(1)) == pytest.approx(12.0)
    assert float(f.derivative((0, 2))) == pytest.approx(4.0)
    assert float(f.derivative((1, 1))) == pytest.approx(6.0)


def test_composition_matches_closed_form():
    t = 0.7
    f = Jet.variable(t, 0, 1, 3).sin().exp()
    e = math.exp(math.sin(t))
    c, s = math.cos(t), math.sin(t)
    assert float(f.first(0)) == pytest.approx(e * c)
    assert float(f.derivative((2,))) == pytest.approx(e * (c * c - s))
    assert float(f.derivative((3,))) == pytest.approx(e * (c ** 3 - 3 * s * c - c))


def test_quotient_and_sqrt():
    x = Jet.variable(4.0, 0, 1, 2)
    f = x.sqrt() / x
    assert float(f.value) == pytest.approx(0.5)
    assert float(f.first(0)) == pytest.approx(-0.5 * 4.0 ** -1.5)
    assert float(f.derivative((2,))) == pytest.approx(0.75 * 4.0 ** -2.5)


def test_diff_and_truncate():
    x = Jet.variable(1.5, 0, 1, 3)
    f = x ** 3
    assert float(f.diff(0).first(0)) == pytest.approx(6 * 1.5)
    assert f.truncate(1).order == 1


def test_batched_evaluation():
    t = np.array([0.0, 1.0, 2.0])
    f = Jet.variable(t, 0, 1, 2).exp()
    np.testing.assert_allclose(f.value, np.exp(t))
    np.testing.assert_allclose(f.derivative((2,)), np.exp(t))


def test_reciprocal_of_zero_is_a_domain_error():
    with pytest.raises(ExprDomainError):
        Jet.variable(0.0, 0, 1, 2).reciprocal()


def test_finite_difference_fallback():
    t = np.array([0.3, 1.1])
    jets = finite_difference_jets(lambda s: np.array([np.sin(s), s ** 2]), t)
    np.testing.assert_allclose(jets[0].first(0), np.cos(t), atol=1e-8)
    np.testing.assert_allclose(jets[0].derivative((2,)), -np.sin(t), atol=1e-4)
    np.testing.assert_allclose(jets[1].first(0), 2 * t, atol=1e-8)


def test_expression_jets_match_central_differences():
    rng = np.random.default_rng(41)
    expr = parse("exp(-x1) * sin(x2) + x3^2 / (1 + x1^2) - sqrt(2 + cos(x3))", ("x1", "x2", "x3"))
    names = ("x1", "x2", "x3")
    h = 1e-5
    for _ in range(50):
        point = rng.uniform(-1.5, 1.5, size=3)
        env = {name: Jet.variable(point[n], n, 3, 1) for n, name in enumerate(names)}
        f = evaluate_jet(expr, env, 3, 1)
        assert float(f.value) == pytest.approx(float(evaluate(expr, dict(zip(names, point)))), rel=1e-12, abs=1e-12)
        for n in range(3):
            step = np.zeros(3)
            step[n] = h
            up = evaluate(expr, dict(zip(names, point + step)))
            down = evaluate(expr, dict(zip(names, point - step)))
            assert float(f.first(n)) == pytest.approx(float((up - down) / (2 * h)), rel=1e-6, abs=1e-7)
