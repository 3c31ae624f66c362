"""
Error hierarchy shared by the library and the CLI
"""


class MomentumError(Exception):
    """Base error; carries the CLI exit code"""

    exit_code = 1

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.message = str(message)
        self.stage = stage

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "stage": self.stage,
            "message": self.message,
            "exit_code": self.exit_code,
        }


class ConfigError(MomentumError):
    """Invalid configuration or parameter block"""

    exit_code = 2


class DataError(MomentumError):
    """Malformed, missing or degenerate input data"""

    exit_code = 3


class ZeroVarianceError(DataError):
    pass


class NumericError(MomentumError):
    """Numerical failure (overflow, infeasibility, non-convergence)"""

    exit_code = 4


class InfeasibleError(NumericError):
    def __init__(self, message, minimum=None, stage=None):
        super().__init__(message, stage=stage)
        self.minimum = minimum


class ConvergenceError(NumericError):
    def __init__(self, message, best=None, stage=None):
        super().__init__(message, stage=stage)
        self.best = best


class StageError(MomentumError):
    """A pipeline stage failed; keeps the exit code of the cause"""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}", stage=stage)
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)

    def to_dict(self):
        payload = super().to_dict()
        payload["error"] = type(self.cause).__name__
        payload["message"] = str(self.cause)
        return payload
