"""Exception hierarchy shared by all naseg modules."""


class NasegError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(NasegError):
    """Operands have incompatible or invalid dimensions."""


class ParameterError(NasegError):
    """A numeric hyperparameter is outside its legal range."""


class ConfigError(NasegError):
    """A configuration object is inconsistent or incomplete."""


class FormatError(NasegError):
    """A file does not parse as the expected format."""


class CorruptionError(NasegError):
    """A file parses but its payload is internally inconsistent."""


class ValidationError(NasegError):
    """A weight archive does not satisfy the model manifest."""


class NotFittedError(NasegError):
    """Estimator used before fit()."""
