"""
errors.py

Exception hierarchy for the nehari package.

Every domain failure derives from NehariError and also from the builtin the
caller would naturally catch (ValueError for bad input, RuntimeError for
solver failures).
"""


class NehariError(Exception):
    """Base class for all nehari failures."""


class ZeroState(NehariError, ValueError):
    """The state is (numerically) zero where a nonzero state is required."""


class CaseMismatch(NehariError, ValueError):
    """Signs of F/G or the energy c do not match the active sign case."""


class NotOnNehari(NehariError, ValueError):
    """The state does not satisfy the scaled Nehari constraint for c."""


class GridMismatch(NehariError, ValueError):
    """A state vector does not live on the problem's grid."""


class InsufficientTail(NehariError, ValueError):
    """Too few (or degenerate) curve points for an asymptotic fit."""


class ConfigError(NehariError, ValueError):
    """Invalid run configuration."""


class NoConvergence(NehariError, RuntimeError):
    """An iterative solver missed its tolerance.

    The best result obtained so far is kept in ``report`` (may be None).
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
