import math

import numpy as np
import pytest

from app.models.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError
from app.utils.expr_parser import eval_jet3, evaluate, parse, to_string, variables_of


def test_evaluate_frame_coefficient():
    assert evaluate(parse("exp(x3)*x1"), {"x1": 2.0, "x3": 0.0}) == pytest.approx(2.0)


@pytest.mark.parametrize("source", ["x1^2", "x1**2", "x1 * x1", "(x1)^+2"])
def test_power_spellings_agree(source):
    assert evaluate(parse(source), {"x1": 3.0}) == pytest.approx(9.0)


def test_constant_pi_and_negative_powers():
    assert evaluate(parse("2*pi"), {}) == pytest.approx(2 * math.pi)
    assert evaluate(parse("x1^-2"), {"x1": 2.0}) == pytest.approx(0.25)


def test_evaluate_broadcasts_over_arrays():
    values = evaluate(parse("sin(t) + 1"), {"t": np.array([0.0, math.pi / 2])})
    np.testing.assert_allclose(values, [1.0, 2.0])


def test_syntax_error_reports_offset_line_and_column():
    with pytest.raises(ExprSyntaxError) as info:
        parse("x1 + * x2")
    assert info.value.offset == 5
    assert info.value.line == 1
    assert info.value.column == 6


@pytest.mark.parametrize("source", ["foo(x1)", "y + 1"])
def test_unknown_identifiers(source):
    with pytest.raises(UnknownIdentifierError):
        parse(source)


def test_variables_are_restricted_per_context():
    with pytest.raises(UnknownIdentifierError):
        parse("x1 + t", frozenset({"t"}))


@pytest.mark.parametrize("source, env", [("log(x1)", {"x1": -1.0}), ("1/x1", {"x1": 0.0}), ("sqrt(x1)", {"x1": -2.0})])
def test_domain_errors(source, env):
    with pytest.raises(ExprDomainError):
        evaluate(parse(source), env)


def test_printing_is_stable():
    expr = parse("-x1*sin(t)^2 + exp(x3)/2")
    assert to_string(parse(to_string(expr))) == to_string(expr)
    assert variables_of(expr) == frozenset({"x1", "t", "x3"})


def test_jet_evaluation_carries_derivatives():
    jet = eval_jet3(parse("x1*x2 + x1^3"), {"x1": 2.0, "x2": 3.0})
    assert float(jet.value) == pytest.approx(14.0)
    assert float(jet.first(0)) == pytest.approx(3.0 + 12.0)
    assert float(jet.first(1)) == pytest.approx(2.0)
    assert float(jet.derivative((2, 0))) == pytest.approx(12.0)
    assert float(jet.derivative((1, 1))) == pytest.approx(1.0)
