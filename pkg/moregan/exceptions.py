from enum import IntEnum
from typing import List, Optional, Tuple


class ErrorCode(IntEnum):
    SUCCESS = 0
    UNEXPECTED_ERROR = -1
    INVALID_ARGUMENT = 1
    CONFIG_ERROR = 2
    IO_ERROR = 3
    NUMERIC_ABORT = 4


class MoreGANException(Exception):
    def __init__(self, code: int = ErrorCode.UNEXPECTED_ERROR, message: str = "") -> None:
        super().__init__()
        self._code = code
        self._message = message

    @property
    def code(self):
        return self._code

    @property
    def message(self):
        return self._message

    def __str__(self) -> str:
        return f"<{type(self).__name__}: (code={self.code}, message={self.message})>"


class ParamError(MoreGANException):
    """Raise when params are incorrect"""
    def __init__(self, message: str = "", code: int = ErrorCode.INVALID_ARGUMENT) -> None:
        super().__init__(code=code, message=message)


class DegenerateInputError(ParamError):
    """Raise when an analytic inversion has a vanishing denominator"""
    def __init__(self, pixels: List[Tuple[int, int]], floor: float) -> None:
        self.pixels = pixels
        shown = ', '.join('({}, {})'.format(r, c) for r, c in pixels[:5])
        more = '' if len(pixels) <= 5 else ' and {} more'.format(len(pixels) - 5)
        super().__init__(message='1-S-A below {} at pixel(s) {}{}'.format(floor, shown, more))


class ConfigError(MoreGANException):
    """Raise when a configuration, dataset or checkpoint is unusable"""
    def __init__(self, message: str = "") -> None:
        super().__init__(code=ErrorCode.CONFIG_ERROR, message=message)


class DatasetIOError(MoreGANException):
    """Raise when an image or manifest file can not be read or written"""
    def __init__(self, path: str, message: str = "") -> None:
        self.path = path
        super().__init__(code=ErrorCode.IO_ERROR, message='{}: {}'.format(path, message))


class NumericAbortError(MoreGANException):
    """Raise when training produced a non-finite loss"""
    def __init__(self, step: int, last_checkpoint: Optional[str] = None) -> None:
        self.step = step
        self.last_checkpoint = last_checkpoint
        super().__init__(code=ErrorCode.NUMERIC_ABORT,
                         message='non-finite loss at step {}, last good checkpoint: {}'.format(
                             step, last_checkpoint))


EXIT_CODES = {
    ParamError: 2,
    ConfigError: 2,
    DatasetIOError: 3,
    NumericAbortError: 4,
}


def exit_code(e: MoreGANException) -> int:
    for cls, code in EXIT_CODES.items():
        if isinstance(e, cls):
            return code
    return 1
