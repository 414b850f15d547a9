"""Error hierarchy shared by the library and the command line.

Each error carries a human readable ``detail`` and the ``exit_code`` the CLI
returns when it escapes a command: 2 for argument problems, 3 for data
problems and 4 for numerical failures.
"""

ARGUMENT_ERROR = 2
DATA_ERROR = 3
NUMERICAL_ERROR = 4


class RecofactorError(Exception):
    exit_code: int = DATA_ERROR

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# --- argument errors ---
class ConfigError(RecofactorError, ValueError):
    exit_code = ARGUMENT_ERROR


class ArgumentError(RecofactorError, ValueError):
    exit_code = ARGUMENT_ERROR


# --- data errors ---
class ShapeError(RecofactorError, ValueError):
    pass


class InputError(RecofactorError, ValueError):
    pass


class RangeError(RecofactorError, ValueError):
    pass


class UndefinedSimilarityError(RecofactorError, ValueError):
    pass


class DegenerateSpectrumError(RecofactorError, ValueError):
    pass


class ParseError(RecofactorError, ValueError):
    def __init__(self, detail: str, line: int):
        super().__init__(f"line {line}: {detail}")
        self.line = line


class RatingValidationError(RecofactorError, ValueError):
    def __init__(self, detail: str, line: int | None = None):
        super().__init__(f"line {line}: {detail}" if line is not None else detail)
        self.line = line


class DuplicateRatingError(RecofactorError, ValueError):
    def __init__(self, detail: str, line: int | None = None):
        super().__init__(f"line {line}: {detail}" if line is not None else detail)
        self.line = line


class EmptyDatasetError(RecofactorError, ValueError):
    pass


class NoDataError(RecofactorError, ValueError):
    pass


class CapacityError(RecofactorError, ValueError):
    pass


class ContractViolationError(RecofactorError, ValueError):
    pass


class EncodingError(RecofactorError, ValueError):
    pass


class UnknownIdError(RecofactorError, KeyError):
    def __str__(self) -> str:
        return self.detail


class ModelFormatError(RecofactorError, ValueError):
    pass


class MemberError(RecofactorError):
    def __init__(self, detail: str, member: int):
        super().__init__(f"member {member}: {detail}")
        self.member = member


class ConditioningError(RecofactorError, ArithmeticError):
    pass


# --- numerical failures ---
class DivergenceError(RecofactorError, ArithmeticError):
    exit_code = NUMERICAL_ERROR

    def __init__(self, epoch: int, detail: str | None = None):
        super().__init__(
            detail
            or f"training diverged at epoch {epoch}; try a smaller learning rate (alpha)"
        )
        self.epoch = epoch


class ConvergenceError(RecofactorError, ArithmeticError):
    exit_code = NUMERICAL_ERROR

    def __init__(self, off_norm: float, sweeps: int):
        super().__init__(
            f"SVD did not converge after {sweeps} sweeps "
            f"(off-diagonal norm {off_norm:.3e})"
        )
        self.off_norm = off_norm
        self.sweeps = sweeps


class GradientError(RecofactorError, ArithmeticError):
    exit_code = NUMERICAL_ERROR

    def __init__(self, tensor: str):
        super().__init__(f"non-finite gradient for tensor '{tensor}'")
        self.tensor = tensor
