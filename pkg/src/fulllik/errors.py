"""Exception types raised across the toolkit."""


class DomainError(ValueError):
    """A value lies outside the domain of a function or transform."""


class UnsupportedAtInference(RuntimeError):
    """Data-conditioned parameters queried without training indices."""


class InvalidStateError(RuntimeError):
    """A cached forward pass no longer matches the model weights."""


class UndefinedMetricError(ValueError):
    """A metric is undefined for the given labels (e.g. a single class)."""


class ParseError(ValueError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(ValueError):
    """A required column or field is missing."""


class DivergedError(FloatingPointError):
    """Optimization produced a non-finite loss or gradient.

    ``last_step`` is the last step whose loss was finite (-1 if none).
    """

    def __init__(self, message, last_step=-1, last_loss=float("nan")):
        super().__init__(message)
        self.last_step = last_step
        self.last_loss = last_loss
