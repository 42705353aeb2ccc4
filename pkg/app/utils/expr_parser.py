import math
import re
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError
from app.utils.jets import MAX_ORDER, Jet

DEFAULT_VARIABLES: FrozenSet[str] = frozenset({"x1", "x2", "x3", "t", "u1", "u2"})
FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi}

_TOKEN_PATTERN = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)


# 📌 **Expression tree**
@dataclass(frozen=True)
class Num:
    value: float
    text: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]


def to_string(expr: Expr) -> str:
    """Fully parenthesized rendering; parse(to_string(e)) prints identically."""
    if isinstance(expr, Num):
        return expr.text
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{to_string(expr.operand)})"
    if isinstance(expr, BinOp):
        return f"({to_string(expr.left)} {expr.op} {to_string(expr.right)})"
    if isinstance(expr, Pow):
        return f"({to_string(expr.base)}^{expr.exponent})"
    if isinstance(expr, Call):
        return f"{expr.func}({to_string(expr.arg)})"
    raise TypeError(f"Not an expression node: {expr!r}")


def variables_of(expr: Expr) -> FrozenSet[str]:
    if isinstance(expr, Var):
        return frozenset({expr.name})
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, (Neg,)):
        return variables_of(expr.operand)
    if isinstance(expr, BinOp):
        return variables_of(expr.left) | variables_of(expr.right)
    if isinstance(expr, Pow):
        return variables_of(expr.base)
    return variables_of(expr.arg)


# 📌 **Parsing**
def _tokenize(source: str) -> List[Tuple[str, str, int]]:
    tokens = []
    position = 0
    while position < len(source):
        if source[position:].strip() == "":
            break
        match = _TOKEN_PATTERN.match(source, position)
        if not match or match.end() == position:
            offset = position + (len(source[position:]) - len(source[position:].lstrip()))
            raise ExprSyntaxError(f"Unexpected character {source[offset]!r}", source, offset)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), match.start(kind)))
        position = match.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, allowed: FrozenSet[str]):
        self.source = source
        self.allowed = allowed
        self.tokens = _tokenize(source)
        self.pos = 0

    @property
    def current(self) -> Tuple[str, str, int]:
        return self.tokens[self.pos]

    def _error(self, message: str) -> ExprSyntaxError:
        kind, text, offset = self.current
        if kind == "end":
            return ExprSyntaxError(f"{message}: unexpected end of input", self.source, offset)
        return ExprSyntaxError(f"{message}: unexpected {text!r}", self.source, offset)

    def _accept(self, *ops: str) -> Optional[str]:
        kind, text, _ = self.current
        if kind == "op" and text in ops:
            self.pos += 1
            return text
        return None

    def _expect(self, op: str) -> None:
        if not self._accept(op):
            raise self._error(f"Expected {op!r}")

    def parse(self) -> Expr:
        expr = self.expression()
        if self.current[0] != "end":
            raise self._error("Expected operator")
        return expr

    def expression(self) -> Expr:
        node = self.term()
        while True:
            op = self._accept("+", "-")
            if op is None:
                return node
            node = BinOp(op, node, self.term())

    def term(self) -> Expr:
        node = self.unary()
        while True:
            op = self._accept("*", "/")
            if op is None:
                return node
            node = BinOp(op, node, self.unary())

    def unary(self) -> Expr:
        if self._accept("-"):
            return Neg(self.unary())
        if self._accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self._accept("^", "**"):
            sign = -1 if self._accept("-") else 1
            if sign == 1:
                self._accept("+")
            kind, text, _ = self.current
            if kind != "number" or not text.isdigit():
                raise self._error("Expected an integer exponent")
            self.pos += 1
            return Pow(base, sign * int(text))
        return base

    def atom(self) -> Expr:
        kind, text, offset = self.current
        if kind == "number":
            self.pos += 1
            return Num(float(text), text)
        if kind == "name":
            self.pos += 1
            if self._accept("("):
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, offset)
                arg = self.expression()
                self._expect(")")
                return Call(text, arg)
            if text in FUNCTIONS:
                self.pos -= 1
                raise ExprSyntaxError(f"Function {text!r} requires an argument", self.source, offset)
            if text in CONSTANTS:
                return Num(CONSTANTS[text], text)
            if text not in self.allowed:
                raise UnknownIdentifierError(text, offset)
            return Var(text)
        if self._accept("("):
            node = self.expression()
            self._expect(")")
            return node
        raise self._error("Expected a number, variable or '('")


def parse(source: str, variables: FrozenSet[str] = DEFAULT_VARIABLES) -> Expr:
    """
    Parses an expression string into an immutable tree.
    :param source: Expression text, e.g. "exp(x3)*x1".
    :param variables: Identifiers accepted as variables.
    :return: Expression tree.
    """
    return _Parser(source, frozenset(variables)).parse()


# 📌 **Evaluation**
def _check_positive(value, what: str) -> None:
    if np.any(np.asarray(value) <= 0):
        raise ExprDomainError(f"{what} of a non-positive value")


def _apply(func: str, arg: Any) -> Any:
    if isinstance(arg, Jet):
        return getattr(arg, func)()
    value = np.asarray(arg, dtype=float)
    if func == "log":
        _check_positive(value, "log")
        return np.log(value)
    if func == "sqrt":
        if np.any(value < 0):
            raise ExprDomainError("sqrt of a negative value")
        return np.sqrt(value)
    return getattr(np, func)(value)


def _divide(left: Any, right: Any) -> Any:
    if isinstance(right, Jet):
        return left / right
    right = np.asarray(right, dtype=float)
    if np.any(right == 0):
        raise ExprDomainError("Division by zero")
    return left / right


def _power(base: Any, exponent: int) -> Any:
    if isinstance(base, Jet):
        return base ** exponent
    base = np.asarray(base, dtype=float)
    if exponent < 0 and np.any(base == 0):
        raise ExprDomainError("Division by zero")
    return base ** float(exponent)


def evaluate(expr: Expr, env: Mapping[str, Any]) -> Any:
    """
    Evaluates an expression with variables bound to numbers, arrays or jets.

    Binding variables to jets composes the expression with them, so the
    result carries derivatives through every node.
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in env:
            raise UnknownIdentifierError(expr.name)
        return env[expr.name]
    if isinstance(expr, Neg):
        return -evaluate(expr.operand, env)
    if isinstance(expr, BinOp):
        left = evaluate(expr.left, env)
        right = evaluate(expr.right, env)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        return _divide(left, right)
    if isinstance(expr, Pow):
        return _power(evaluate(expr.base, env), expr.exponent)
    if isinstance(expr, Call):
        return _apply(expr.func, evaluate(expr.arg, env))
    raise TypeError(f"Not an expression node: {expr!r}")


def evaluate_jet(expr: Expr, env: Mapping[str, Any], nvars: int, order: int) -> Jet:
    """Like evaluate, but always returns a jet (constants are promoted)."""
    result = evaluate(expr, env)
    if isinstance(result, Jet):
        return result
    return Jet.constant(result, nvars, order)


def eval_jet3(expr: Expr, at: Mapping[str, float], order: int = MAX_ORDER) -> Jet:
    """
    Jet of an expression at a point, differentiating with respect to every
    variable in `at` (in the given order) up to total order `order`.
    """
    names: Sequence[str] = list(at)
    env: Dict[str, Jet] = {
        name: Jet.variable(at[name], i, len(names), order) for i, name in enumerate(names)
    }
    return evaluate_jet(expr, env, len(names), order)
