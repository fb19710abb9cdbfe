"""Exception hierarchy shared by every module.

Each error carries a stable ``name`` used in the CLI's machine-readable
error output.
"""
from __future__ import annotations


class AtlasError(Exception):
    """Base class for all domain errors raised by the package."""

    module = "core"

    @property
    def name(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict:
        return {"error": self.name, "module": self.module, "message": str(self)}


# numerics
class NumericsError(AtlasError):
    module = "numerics"


class NoBracket(NumericsError):
    pass


class NoConvergence(NumericsError):
    pass


class SingularJacobian(NumericsError):
    pass


class DegenerateSpectrum(NumericsError):
    pass


class NonInvertibleTransform(NumericsError):
    pass


class EvaluationFailure(AtlasError):
    module = "numerics"


class DegenerateDenominator(AtlasError):
    module = "numerics"


# filippov_core
class FilippovError(AtlasError):
    module = "filippov_core"


class NotOnSurface(FilippovError):
    pass


class NonregularSurface(FilippovError):
    pass


class StepFailure(FilippovError):
    pass


class Divergence(FilippovError):
    pass


class ZenoGuard(FilippovError):
    pass


class RepellingSliding(FilippovError):
    pass


# boundary_hopf
class BoundaryHopfError(AtlasError):
    module = "boundary_hopf"


class DependentVectors(BoundaryHopfError):
    pass


class NotCodimTwo(BoundaryHopfError):
    pass


class NearZeroCoefficient(BoundaryHopfError):
    pass


# grazing
class GrazingError(AtlasError):
    module = "grazing"


class NotVisibleFold(GrazingError):
    pass


class WrongSide(GrazingError):
    pass


class DegenerateLie(GrazingError):
    pass


class NoBackwardIntersection(GrazingError):
    pass


class SlidingExitBeforeOmega(GrazingError):
    pass


class SectionNotTransverse(GrazingError):
    pass


# continuation
class ContinuationError(AtlasError):
    module = "continuation"


class LostEquilibrium(ContinuationError):
    pass


class EigenvalueTrackingLost(ContinuationError):
    pass


# bcnf
class Undecided(AtlasError):
    module = "bcnf"


# model_io
class ModelIOError(AtlasError):
    module = "model_io"


class ExprSyntaxError(ModelIOError):
    """Parse failure with the offending position and the expected token set."""

    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = tuple(expected)
        exp = f"; expected one of {', '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{message} at position {position}{exp}")

    @property
    def name(self) -> str:
        return "SyntaxError"


class UnknownIdentifier(ModelIOError):
    pass


class UnknownModel(ModelIOError):
    pass


class UnknownParameter(ModelIOError):
    pass


class SchemaError(ModelIOError):
    pass
