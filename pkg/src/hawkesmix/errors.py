"""Exception hierarchy shared by the whole package."""


class HawkesError(Exception):
    """Base class for all package errors."""


class TypeIndexError(HawkesError, IndexError):
    """An event-type index falls outside ``0..C-1``."""


class DomainError(HawkesError, ValueError):
    """A time or parameter value lies outside its admissible domain."""


class SingularLikelihoodError(HawkesError, ArithmeticError):
    """An observed event has zero intensity (raised only in strict mode)."""


class UndefinedEasinessError(HawkesError, ValueError):
    """Easiness was requested for a sequence without events."""


class TruncationError(HawkesError):
    """Simulation hit the ``max_events`` cap.

    The partially simulated sequence is available as ``partial`` and, when
    raised from a dataset simulation, the offending index as ``index``.
    """

    def __init__(self, message, partial=None, index=None):
        super().__init__(message)
        self.partial = partial
        self.index = index


class FitError(HawkesError, RuntimeError):
    """Fitting failed (empty effective data set or non-finite objective)."""


class DataFormatError(HawkesError, ValueError):
    """A dataset or model file could not be parsed."""
