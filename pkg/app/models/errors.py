from typing import Optional


class EngineError(ValueError):
    """Base class for every failure raised by the verification engine."""


# 📌 **Exact arithmetic**
class LaurentRangeError(EngineError):
    """A Laurent exponent left the supported window [-4, 4]."""


class NonPositiveParameterError(EngineError):
    """The metric parameter L must be strictly positive."""


# 📌 **Groups**
class UnknownGroupError(EngineError):
    pass


class DomainViolationError(EngineError):
    """A point lies outside the chart domain of its group."""


class InvalidGroupError(EngineError):
    """A user-defined group failed antisymmetry, Jacobi or duality validation."""


class UnsupportedGroupError(EngineError):
    """A closed-form route is only available for specific groups."""


# 📌 **Expressions**
class ExprSyntaxError(EngineError):
    def __init__(self, message: str, source: str, offset: int):
        self.source = source
        self.offset = offset
        prefix = source[:offset]
        self.line = prefix.count("\n") + 1
        self.column = offset - (prefix.rfind("\n") + 1) + 1
        super().__init__(f"{message} at offset {offset} (line {self.line}, column {self.column})")


class UnknownIdentifierError(EngineError):
    def __init__(self, name: str, offset: Optional[int] = None):
        self.name = name
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"Unknown identifier '{name}'{where}")


class ExprDomainError(EngineError):
    """A function was evaluated outside its domain (log of non-positive, sqrt of negative...)."""


# 📌 **Geometry**
class DegenerateSpanError(EngineError):
    pass


class CurveRegularityError(EngineError):
    """The curve velocity (or a limit denominator) vanishes."""


class CharacteristicPointError(EngineError):
    """The horizontal gradient of the defining function vanishes."""


class CurveOffSurfaceError(EngineError):
    pass


class DegenerateImmersionError(EngineError):
    pass


class FitError(EngineError):
    def __init__(self, message: str, condition_number: float = float("nan")):
        self.condition_number = condition_number
        super().__init__(f"{message} (condition number {condition_number:.3e})")


# 📌 **Scenarios and reports**
class ScenarioValidationError(EngineError):
    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class ReportError(EngineError):
    pass
