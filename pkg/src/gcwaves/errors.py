"""Shared exception types.

Every guard in the library raises one of these named errors instead of
truncating silently; the CLI maps them onto distinct exit codes.
"""


class GcwavesError(Exception):
    """Base class for all library errors."""


class ConfigError(GcwavesError):
    """Invalid parameters or configuration."""


class ResourceBudgetError(GcwavesError):
    """A scan would exceed the configured work/memory budget."""


class NumericAbortError(GcwavesError):
    """NaN/overflow detected during time integration.

    Carries the last healthy solver state in ``last_state`` when available.
    """

    def __init__(self, message, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class SingularMultiplierError(GcwavesError):
    """Singular Fourier multiplier applied to a field with nonzero mean."""


class PositivityError(GcwavesError):
    """Pointwise positivity (1+|grad h|^2 or g+ell) failed on the grid."""


class SmallDivisorError(GcwavesError):
    """A division-weighted sum met a modulation below the guard threshold."""


class CadenceError(GcwavesError):
    """Trajectory snapshots too coarse for the requested audit."""
