"""Exception hierarchy.

The CLI maps :class:`ConfigError` (and the value/range errors below) to exit
status 1 and :class:`NumericalError` subclasses to exit status 2.
"""

from __future__ import annotations


class TTDLError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TTDLError):
    """A configuration file failed validation.

    ``errors`` holds every violation found, not just the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class WavelengthRangeError(TTDLError, ValueError):
    pass


class CoreIndexError(TTDLError, IndexError):
    pass


class ModelConsistencyError(TTDLError, ValueError):
    pass


class DomainError(TTDLError, ValueError):
    pass


class ShapeError(TTDLError, ValueError):
    pass


class DegeneratePairError(TTDLError, ValueError):
    """Two adjacent cores share the same effective index (infinite R_pk)."""


class NoVisibleLobeError(TTDLError, ValueError):
    pass


class NumericalError(TTDLError):
    pass


class CutoffError(NumericalError):
    """The profile supports no guided LP01 mode at the requested wavelength."""


class SolverError(NumericalError):
    pass


class InfeasibleDesignError(NumericalError):
    """A design target lies outside what the parameter bounds can reach."""
