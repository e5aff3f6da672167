"""Exception hierarchy shared by every subsystem."""


class EcgBoError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(EcgBoError, ValueError):
    pass


class ConfigError(EcgBoError, ValueError):
    pass


class DataError(EcgBoError, ValueError):
    pass


class StateError(EcgBoError, RuntimeError):
    pass


class NumericalError(EcgBoError, ArithmeticError):
    pass


class TrainingDiverged(EcgBoError, ArithmeticError):
    """Loss or gradient became non-finite; ``epoch`` is 1-based."""

    def __init__(self, epoch: int, message: str = "non-finite loss"):
        super().__init__(f"training diverged at epoch {epoch}: {message}")
        self.epoch = epoch
