"""Exception types shared across the package."""


class BlimpLabError(Exception):
    pass


class ParameterError(BlimpLabError, ValueError):
    pass


class SimulationDiverged(BlimpLabError, FloatingPointError):
    """Raised when the integrator produces a non-finite or out-of-range state.

    ``state`` is the last finite state before the failing step and
    ``context`` carries whatever the caller knew (episode time, step index).
    """

    def __init__(self, message, state=None, context=None):
        super().__init__(message)
        self.state = state
        self.context = dict(context or {})


class NumericalError(BlimpLabError, FloatingPointError):
    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class CheckpointFormatError(BlimpLabError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class UnsupportedVersionError(CheckpointFormatError):
    pass


class CsvFormatError(BlimpLabError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class ConfigError(BlimpLabError, ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
