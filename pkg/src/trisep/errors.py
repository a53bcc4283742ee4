"""Exception types shared across the package."""


class TrisepError(Exception):
    """Base class for all package errors."""


class DimensionError(TrisepError):
    """Operand shapes are inconsistent with the declared subsystem dimensions."""


class HermiticityError(TrisepError):
    """A matrix claimed Hermitian deviates beyond the residual tolerance."""


class CommutatorError(TrisepError):
    """Normality/commutation (or a canonical-form block identity) fails."""


class FormatError(TrisepError):
    """A state or evidence file violates the JSON schema or its invariants."""


class NotPPT(TrisepError):
    """A required partial transpose is not positive semidefinite."""


class RankMismatch(TrisepError):
    """A rank precondition does not hold."""


class BasisSearchExhausted(TrisepError):
    """No sampled local basis produced a full-rank corner block."""


class RangeMembershipError(TrisepError):
    """A vector required to lie in a range has kernel overlap above tolerance."""


class SubtractionError(TrisepError):
    """Projector subtraction lost positivity, rank reduction, or required PPT."""


class ThresholdNotMet(TrisepError):
    """Total kernel dimension <= N: no minor constraints, use the subtraction route."""


class DegenerateSystem(TrisepError):
    """A determinant system is identically zero (solution continuum).

    Carries a sampled representative in ``representative`` when one exists.
    """

    def __init__(self, message, representative=None):
        super().__init__(message)
        self.representative = representative


class ContinuumFamily(TrisepError):
    """A resultant vanished identically: non-isolated product-vector family.

    ``representatives`` holds sampled members of the family.
    """

    def __init__(self, message, representatives=()):
        super().__init__(message)
        self.representatives = list(representatives)


class NumericalBreakdown(TrisepError):
    """Newton refinement diverged for every candidate of a root cluster."""


class FactorNotProduct(TrisepError):
    """A vector that should be a tensor product fails the Schmidt test."""


class NotEdge(TrisepError):
    """Witness construction requires an edge state but V[rho] is nonempty."""
