"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` (bad input, the CLI
exits with status 2) and :class:`NumericalError` (a computation broke down,
the CLI exits with status 3).
"""

from __future__ import annotations


class HoloslowError(Exception):
    pass


class ValidationError(HoloslowError, ValueError):
    pass


class NumericalError(HoloslowError, ArithmeticError):
    pass


# expressions


class ExprSyntaxError(ValidationError):
    def __init__(self, position: int, expected, text: str = ""):
        self.position = position
        self.expected = tuple(expected)
        self.text = text
        exp = ", ".join(self.expected)
        super().__init__(f"syntax error at position {position}: expected {exp}")


class UnknownIdentifier(ValidationError):
    def __init__(self, name: str, position: int):
        self.name = name
        self.position = position
        super().__init__(f"unknown identifier {name!r} at position {position} (allowed: z, w, i)")


class EvalPole(NumericalError):
    def __init__(self, node=None, message: str = "evaluation hit a pole"):
        self.node = node
        super().__init__(message if node is None else f"{message}: {node}")


# series


class VariableMismatch(ValidationError):
    pass


class NonzeroConstantTerm(ValidationError):
    pass


class ZeroConstantTerm(NumericalError):
    pass


class DegenerateLinearPart(NumericalError):
    pass


class TooFewCoefficients(ValidationError):
    pass


# systems


class SchemaError(ValidationError):
    pass


class FamilyInvariantViolated(ValidationError):
    pass


class NewtonDivergence(NumericalError):
    def __init__(self, w, message: str = "Newton iteration did not converge"):
        self.w = w
        super().__init__(f"{message} at w={w}")


class DegenerateRoot(NumericalError):
    def __init__(self, w, derivative=0.0):
        self.w = w
        self.derivative = derivative
        super().__init__(f"degenerate root at w={w}: |df/dz|={abs(derivative):.3g} < 1e-10")


# Briot-Bouquet


class Resonance(NumericalError):
    def __init__(self, k: int, lam: complex):
        self.k = k
        self.lam = lam
        super().__init__(f"Resonance({k}): lambda={lam} is within 1e-9 of {k}")


class DegenerateAlpha(NumericalError):
    pass


# manifolds


class FactorizationMismatch(ValidationError):
    pass


class PrimitiveMismatch(ValidationError):
    pass


class RecurrenceBreakdown(NumericalError):
    pass


class FamilyParamError(ValidationError):
    pass


# dynamics


class StepUnderflow(NumericalError):
    pass


class MaxSteps(NumericalError):
    pass


class UnclassifiableAtTolerance(NumericalError):
    pass


# verify


class DomainExit(NumericalError):
    def __init__(self, index: int, message: str = "sample left the manifold domain"):
        self.index = index
        super().__init__(f"{message} (sample {index})")


class WindowMismatch(ValidationError):
    pass


class AlphaNotPureImaginary(ValidationError):
    pass


class RegionExit(NumericalError):
    pass


class UnsupportedFamily(ValidationError):
    pass


class SeriesOverflowWarning(RuntimeWarning):
    """A coefficient recursion exceeded 1e300 and the series was truncated."""
