"""Exceptions and warning categories shared by every spinphase module."""


class SpinPhaseError(Exception):
    """Base class for all spinphase failures."""


class HalfIntegerError(SpinPhaseError, ValueError):
    """A spin quantum number is not an exact half-integer (or is inconsistent)."""


class DimensionMismatchError(SpinPhaseError, ValueError):
    """Operands live on different spin-J spaces."""


class InvalidStateError(SpinPhaseError):
    """A matrix fails the density-matrix checks (Hermitian, unit trace, PSD)."""


class QuadratureDegreeError(SpinPhaseError):
    """A quadrature is too coarse for the exactness contract of an operation."""


class UndefinedRatioError(SpinPhaseError):
    """The decay-rate ratio statistic is undefined for the given series."""


class ConfigError(SpinPhaseError):
    """A run configuration is invalid."""


class SpinPhaseWarning(UserWarning):
    """Base class for spinphase warnings."""


class NonHermitianWarning(SpinPhaseWarning):
    """Moments violate the Hermiticity image rule."""


class ResolutionWarning(SpinPhaseWarning):
    """A grid or quadrature is too coarse for a reliable answer."""


class TimeStepWarning(SpinPhaseWarning):
    """A time step is large enough to bias the result."""


class RatioVarianceWarning(SpinPhaseWarning):
    """The ratio statistic varies across sample times beyond tolerance."""


class NegativeStateWarning(SpinPhaseWarning):
    """A channel output has an eigenvalue below the positivity floor."""
