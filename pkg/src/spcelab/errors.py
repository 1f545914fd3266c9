"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes, so analysis code should raise the most
specific type that applies rather than a bare ValueError.
"""


class SpceLabError(Exception):
    """Base class for all package errors."""


class DomainError(SpceLabError):
    """A mathematical precondition is violated (non-normalized state,
    invalid distribution, zero-probability conditioning, ...)."""


class ParameterError(SpceLabError):
    """An argument is outside its admissible range."""


class ContractError(SpceLabError):
    """An operation was invoked outside its stated contract, e.g. a
    non-factorizing response passed to the product-form estimator."""


class DataError(SpceLabError):
    """Input data cannot be analyzed (empty detected subset, ...)."""


class ConfigError(SpceLabError):
    """Invalid experiment configuration; carries the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"config field '{field}': {message}")
        self.field = field


class SeriesParseError(DataError):
    """Malformed time-series file; names the offending row and column."""

    def __init__(self, path, row: int, column: str, message: str):
        super().__init__(f"{path}: row {row}, column '{column}': {message}")
        self.path = str(path)
        self.row = row
        self.column = column
