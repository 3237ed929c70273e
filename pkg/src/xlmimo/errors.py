"""Exception types shared across the package."""


class XLMIMOError(Exception):
    """Base class for package errors."""


class ConfigInvalid(XLMIMOError):
    """A configuration value is out of range or malformed."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class RankDeficient(XLMIMOError):
    """Channel-matrix columns are (numerically) linearly dependent."""


class Infeasible(XLMIMOError):
    """The rate floors cannot all be met within the power budget."""


class ZeroVector(XLMIMOError):
    """An operation received an all-zero channel vector."""


class EmptyEnsemble(XLMIMOError):
    """An ensemble estimator was asked for statistics over zero scheduled users."""
