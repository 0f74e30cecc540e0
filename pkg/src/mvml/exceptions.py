"""Exception hierarchy shared by every module of the toolkit."""


class MVMLError(Exception):
    """Base class for all errors raised by mvml."""


class InputError(MVMLError, ValueError):
    """Malformed or inconsistent input (shapes, indices, empty data)."""


class ConfigError(MVMLError, ValueError):
    """Invalid configuration, e.g. a step size that breaks positivity."""


class NumericalError(MVMLError, ArithmeticError):
    """A linear-algebra step failed or produced unusable values."""


class DivergenceError(NumericalError):
    """The solver objective became non-finite."""

    def __init__(self, iteration, value):
        self.iteration = iteration
        self.value = value
        super().__init__(f"objective became non-finite ({value!r}) at iteration {iteration}")


class MetricError(MVMLError, ValueError):
    """An evaluation metric is undefined for the given inputs."""


class IngestionError(MVMLError, ValueError):
    """A dataset file could not be read; carries the path and line number."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class DeserializationError(MVMLError, ValueError):
    """A model container is truncated, corrupted or of an unknown version."""

    def __init__(self, message, field=None):
        self.field = field
        prefix = f"field {field!r}: " if field else ""
        super().__init__(prefix + message)
