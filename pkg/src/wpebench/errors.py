"""Exception hierarchy shared by every module."""


class WorkbenchError(Exception):
    """Base class for all errors raised by wpebench."""


class ConfigError(WorkbenchError, ValueError):
    """Invalid configuration or mismatched shapes."""


class FormatError(WorkbenchError, ValueError):
    """Unsupported or malformed file content."""


class DegenerateInputError(WorkbenchError, ValueError):
    """Input has no energy (or no trials) where some is required."""


class AlignmentError(WorkbenchError, ValueError):
    """Signals that should be aligned have different lengths."""


class NumericalError(WorkbenchError, ArithmeticError):
    """A linear solve failed even after regularization."""

    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index
