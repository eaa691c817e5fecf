"""Exception hierarchy shared by the numerical modules."""


class VStateError(Exception):
    """Base class for all package errors."""


class AliasingError(VStateError, ValueError):
    """Grid too coarse for the requested Fourier modes."""


class EvaluationFailure(VStateError):
    """A residual or field evaluation could not be carried out."""


class SingularSecant(EvaluationFailure):
    """Two boundary nodes coincide at grid resolution (self-intersection)."""


class DegenerateDerivative(EvaluationFailure):
    """phi' vanishes (to tolerance) somewhere on the grid."""


class ZeroModulus(EvaluationFailure):
    """phi passes through (or too close to) the origin."""


class ZeroOnContour(EvaluationFailure):
    """A function whose winding number is requested vanishes on the circle."""


class UnresolvedWinding(EvaluationFailure):
    """Argument jumps between neighbouring nodes are too large to unwrap."""


class WindingNonzero(EvaluationFailure):
    """The Riemann-Hilbert coefficient does not have winding number zero."""


class NonConvergence(VStateError):
    """Newton iteration exhausted its budget without reaching tolerance."""

    def __init__(self, message, coeffs=None, report=None):
        super().__init__(message)
        self.coeffs = coeffs
        self.report = report


class TooCloseToBoundary(EvaluationFailure):
    """Point lies in the exclusion band around the patch boundary."""


class QuadratureStall(EvaluationFailure):
    """Adaptive Gauss-Legendre doubling failed to settle."""


class NoBracket(EvaluationFailure):
    """Psi_r does not change sign on the searched radial interval."""


class NewtonDiverged(EvaluationFailure):
    """Critical-point Newton iteration failed."""


class MisclassifiedDegenerate(EvaluationFailure):
    """Hessian determinant too small to classify a critical point."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points or []


class InsufficientData(VStateError):
    """An audit did not receive enough records to run."""


class ConfigError(VStateError, ValueError):
    """Invalid run configuration."""


class SchemaError(VStateError, ValueError):
    """Serialized document has an unexpected schema version or layout."""
