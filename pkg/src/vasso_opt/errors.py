"""Exception types shared across the package."""


class VassoOptError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(VassoOptError):
    """Vector/matrix operands with incompatible shapes."""


class InvalidParameterError(VassoOptError):
    """A scalar argument is outside its documented range."""


class ConfigError(VassoOptError):
    """Experiment config is malformed.

    ``path`` points at the offending field, dotted (e.g. ``optimizer.rho``).
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class NonFiniteError(VassoOptError):
    """A loss or gradient came back NaN/Inf.

    Carries the iteration index when the failure happened inside a step.
    """

    def __init__(self, message: str, t: int | None = None):
        self.t = t
        if t is not None:
            message = f"{message} (iteration t={t})"
        super().__init__(message)
