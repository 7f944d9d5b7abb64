from typing import Optional


class FaultsInError(Exception):
    pass


class ValidationError(FaultsInError, ValueError):
    pass


class InvalidConfigError(ValidationError):
    pass


class ShapeError(ValidationError):
    pass


class CoverageError(ValidationError):
    def __init__(self, message: str, missing: Optional[list] = None):
        super().__init__(message)
        self.missing = list(missing or [])


class ProtocolError(ValidationError):
    pass


class NumericalError(FaultsInError, ArithmeticError):
    pass


class TrainingDivergedError(NumericalError):
    """Raised when a training loss or gradient stops being finite.

    `last_good` holds the parameters from the last finite step, and
    `checkpoint` the path they were written to (if a checkpoint directory
    was configured).
    """

    def __init__(self, message: str, epoch: int, last_good=None, checkpoint=None):
        super().__init__(message)
        self.epoch = epoch
        self.last_good = last_good
        self.checkpoint = checkpoint
