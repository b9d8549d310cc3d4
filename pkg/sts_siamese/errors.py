"""
Exception types shared across the package.

The CLI maps them to exit codes: UsageError -> 1, DataFormatError -> 2,
NumericError -> 3.
"""
from typing import Optional


class StsError(Exception):
    """Base class for every error raised by this package."""


class UsageError(StsError):
    """Invalid combination of options or arguments."""


class DataFormatError(StsError, ValueError):
    """A file or record does not follow its format contract."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        super().__init__(f"{location}{message}")


class CheckpointError(DataFormatError):
    """A model checkpoint is malformed, truncated or of an unknown version."""


class ShapeMismatchError(StsError, ValueError):
    """Array shapes disagree for a kernel operation."""


class NumericError(StsError, ArithmeticError):
    """A computation produced a non-finite or undefined value."""
