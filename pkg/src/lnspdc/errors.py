"""Exception hierarchy shared by all modules.

The CLI maps ``ConfigError`` and ``NumericalError`` to distinct exit codes.
"""


class LnspdcError(Exception):
    """Base class for package errors."""


class ConfigError(LnspdcError, ValueError):
    """Malformed or unknown configuration input."""


class NumericalError(LnspdcError):
    """A computation could not produce a trustworthy answer."""


class WavelengthRangeError(NumericalError, ValueError):
    """Wavelength outside the validity range of a model or curve."""


class ConvergenceError(NumericalError):
    """Eigensolver or root finder failed to converge."""


class QpmError(NumericalError, ValueError):
    """Quasi-phase-matching condition has no positive-period solution."""


class StreamError(LnspdcError, ValueError):
    """Malformed time-tag stream or tag file."""
