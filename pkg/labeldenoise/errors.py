import logging
from enum import Enum

logger = logging.getLogger(__name__)


class LabelDenoiseError(Exception):
    pass


class InputError(LabelDenoiseError):
    """Bad arguments: shape mismatch, invalid configuration, missing file."""
    pass


class FormatError(LabelDenoiseError):
    """A file does not follow its format: bad magic, truncation, malformed line."""
    pass


class NumericError(LabelDenoiseError):
    def __init__(self, node, detail='non-finite value'):
        super().__init__(f"{detail} at node {node!r}")
        self.node = node


class ExitCode(Enum):
    """Process exit codes of the command line, one per error family."""

    OK = 0
    """The command finished and wrote its artifacts."""

    NUMERIC = 1
    """An internal numeric failure, e.g. a NaN produced while training."""

    INPUT = 2
    """Usage or input error: unknown flag, missing or unreadable file, invalid configuration."""

    FORMAT = 3
    """An input file could not be parsed."""

    @classmethod
    def for_exception(cls, exc):
        """Map an exception to the exit code the command line reports for it.

        :param exc: The exception that stopped the command.
        :return: :class:`~labeldenoise.errors.ExitCode`
        """
        if isinstance(exc, FormatError):
            return cls.FORMAT
        elif isinstance(exc, (InputError, OSError)):
            return cls.INPUT
        elif isinstance(exc, NumericError):
            return cls.NUMERIC

        logger.debug(f"Unmapped exception {type(exc).__name__}, reporting as numeric failure.")
        return cls.NUMERIC
