"""Exception types shared across the package."""


class TorusGCError(Exception):
    """Base class for all package errors."""


class MeanNotZero(TorusGCError):
    """Poisson right-hand side has a mean above tolerance in strict mode."""


class ChartTooLarge(TorusGCError):
    """A rescaled chart would leave the fundamental domain."""


class NotNonpositive(TorusGCError):
    """Curvature datum has a positive maximum beyond tolerance."""


class DegenerateMaximum(TorusGCError):
    """A maximum of the curvature datum has a near-singular Hessian."""


class VerificationFailed(TorusGCError):
    """A sampled numerical check of a derived constant did not hold."""


class RootNotBracketed(TorusGCError):
    """The constraint retraction could not bracket a root."""


class MultiplierNonpositive(TorusGCError):
    """Extracted Lagrange multiplier is not positive."""


class DivisionDegenerate(TorusGCError):
    """A multiplier denominator is numerically zero."""


class UnresolvedCore(TorusGCError):
    """Comparison-function plateau is below grid resolution."""


class NoSignChange(TorusGCError):
    """Root finding for alpha found no sign change."""


class PeakTooWeak(TorusGCError):
    """Candidate blow-up peak is below the detection threshold."""


class NonpositiveEpsilon(UserWarning):
    """eps* violated its positivity bound; reported, never fatal."""
