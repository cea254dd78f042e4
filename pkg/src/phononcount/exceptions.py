"""Exception types raised by phononcount."""


class PhononCountError(Exception):
    """Base class for all package errors."""


class ParameterError(PhononCountError, ValueError):
    """A parameter set violates its invariants."""


class InstabilityError(PhononCountError):
    """Blue-detuned anti-damping exceeds the bath damping."""


class DegenerateBathError(PhononCountError, ZeroDivisionError):
    """The effective bath input vanishes."""


class TruncationError(PhononCountError):
    """Fock-space truncation leaves too much probability in the top level."""


class ValidityError(PhononCountError):
    """A first-order expansion is pushed outside its range of validity."""


class InsufficientCountsError(PhononCountError):
    """Too few counts for a meaningful calibration."""


class SaturationError(PhononCountError):
    """Simulated count rate approaches detector saturation."""


class FitError(PhononCountError):
    """A fit could not be performed on the supplied data."""


class SchemaError(PhononCountError, ValueError):
    """An input file does not match its expected layout."""
