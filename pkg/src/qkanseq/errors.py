class ShapeError(ValueError):
    """Array dimensions do not match what an operation expects."""


class TapeError(RuntimeError):
    """Misuse of a gradient tape (foreign operand, non-scalar loss, reuse)."""


class ConfigError(ValueError):
    """Invalid model, training or experiment configuration."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


class UnsupportedRegimeError(ValueError):
    pass


class UndefinedMetricError(ValueError):
    pass


class EmptyResultError(RuntimeError):
    pass


class DivergenceError(RuntimeError):
    pass


class CheckpointError(RuntimeError):
    pass
