"""
Exception types shared across fairpol.

The CLI maps these onto exit codes (see `fairpol.cli`): configuration and
contract problems are usage errors (2), generation and training failures are
runtime errors (1).
"""


class FairpolError(Exception):
    """Base class for all fairpol errors."""


class ContractError(FairpolError, ValueError):
    """A precondition of an operation was violated (arity, range, shape)."""


class DatasetParseError(FairpolError):
    """
    A dataset CSV could not be parsed.

    Args:
        message (str): Human readable description.
        line (int): 1-based line number in the file (the header is line 1).
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GenerationError(FairpolError):
    """A semi-synthetic generator could not produce a dataset."""


class TrainingError(FairpolError):
    """
    Training diverged or could not proceed.

    Args:
        message (str): Human readable description.
        loss_trace (list): Loss values recorded up to the failure.
    """

    def __init__(self, message, loss_trace=None):
        self.loss_trace = list(loss_trace or [])
        super().__init__(message)


class ConfigError(FairpolError):
    """
    A run configuration is invalid.

    Args:
        message (str): Human readable description.
        key (str): The offending dotted key, if any.
    """

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(message)


class SchemaError(FairpolError):
    """A CSV file does not match the schema its reader expects."""
