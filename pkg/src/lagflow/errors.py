"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class LagflowError(Exception):
    """Base class for all package errors."""


# -- expressions -----------------------------------------------------------

class ExprError(LagflowError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnknownFunctionError(ExprSyntaxError):
    pass


class NonIntegerExponentError(ExprSyntaxError):
    pass


class UnboundVariableError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


# -- numerical failures (CLI exit status 4) --------------------------------

class NumericalError(LagflowError):
    pass


class PoleError(NumericalError, ExprError):
    """Evaluation hit a pole or produced a non-finite value."""


class QuadratureError(NumericalError):
    pass


# -- harmonic maps ---------------------------------------------------------

class OrientationError(LagflowError):
    pass


# -- flow specifications (CLI exit status 2) -------------------------------

class FlowSpecError(LagflowError):
    pass


class BetaInitialMismatch(FlowSpecError):
    pass


class LambdaOutOfRange(FlowSpecError):
    pass


class ConstantDilatation(FlowSpecError):
    """Initial data has constant dilatation where linear independence is required."""


class ConstantDilatationInAffineFamily(ConstantDilatation):
    pass


class XiZero(FlowSpecError):
    pass


class NotSensePreserving(FlowSpecError):
    pass


class NotUnivalent(FlowSpecError):
    pass


class DomainError(FlowSpecError):
    pass


class DegenerateBoundary(DomainError):
    pass


# -- relations between equal-Jacobian maps ---------------------------------

class RelationError(LagflowError):
    pass


class JacobianMismatch(RelationError):
    pass


class FitResidualExceeded(RelationError):
    pass


class IllConditionedSample(RelationError):
    pass


class InvalidRelationParams(RelationError):
    pass


class NonconstantModulusIdentity(LagflowError):
    """A modulus identity held with nonconstant factors; tolerances are misconfigured."""


class ConfigError(LagflowError):
    pass
