"""Exception hierarchy shared across the package."""


class KanflowError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(KanflowError):
    """Operand shapes are incompatible with the requested operation."""


class DomainError(KanflowError):
    """A value lies outside the mathematical domain of an operation."""


class ParameterError(KanflowError):
    """A configuration or call parameter violates its contract."""


class NumericError(KanflowError):
    """A computation produced a non-finite or otherwise invalid number."""


class IngestionError(KanflowError):
    """A tabular input file failed validation.

    Carries the 1-based data-row number when the failure is row-local.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(KanflowError):
    """A run-configuration document failed schema validation."""


class TrainingError(KanflowError):
    """Training aborted, e.g. because the loss became non-finite."""
