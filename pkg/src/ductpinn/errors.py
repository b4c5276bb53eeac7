"""Exception hierarchy shared by every module."""


class DuctPinnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DuctPinnError, ValueError):
    """Invalid architecture, geometry, sampling or run configuration."""


class NumericalFailure(DuctPinnError, ArithmeticError):
    """A non-finite value appeared during evaluation or training.

    ``index`` points at the offending flattened parameter when it can be
    identified, otherwise it is ``None``.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class DomainError(DuctPinnError, ValueError):
    """A physical quantity left its admissible range (e.g. S(x) <= 0)."""


class BesselRangeError(DuctPinnError, ValueError):
    """Argument outside the radius where the ascending series is trusted."""


class SingularityError(DuctPinnError, ArithmeticError):
    """Denominator of a Bessel ratio vanished."""


class ResonanceError(DuctPinnError, ArithmeticError):
    """The two-point boundary problem is singular at this frequency."""

    def __init__(self, message, nearest_frequency=None):
        super().__init__(message)
        self.nearest_frequency = nearest_frequency


class ParamFileError(DuctPinnError, ValueError):
    """A saved parameter file could not be read back.

    ``field`` names the header entry or section that failed.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class IncompatibleVersionError(ParamFileError):
    """Parameter file written by an unsupported format version."""
