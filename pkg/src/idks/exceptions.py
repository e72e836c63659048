"""Exception hierarchy shared by the detector, data, and evaluation code."""


class IDKSError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(IDKSError, ValueError):
    """An argument violates a documented precondition (psi, t, window size, ...)."""


class StateError(IDKSError, RuntimeError):
    """An update does not line up with the model's window bookkeeping."""


class IngestionError(IDKSError, ValueError):
    """A dataset file could not be parsed into a labeled dataset."""


class MetricError(IDKSError, ValueError):
    """A metric is undefined for the given input (e.g. single-class labels)."""
