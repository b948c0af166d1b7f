"""Exception hierarchy shared by every termbridge module.

The command line maps the three families onto stable exit codes:
``ConfigurationError`` -> 1, ``DataError`` -> 2, ``NumericalError`` -> 3.
"""
from __future__ import annotations


class TermbridgeError(RuntimeError):
    """Base class for every error raised by the toolkit."""


class ConfigurationError(TermbridgeError, ValueError):
    """Raised when options are missing, malformed or out of range."""


class DataError(TermbridgeError):
    """Raised when input files or in-memory data cannot be used."""


class NumericalError(TermbridgeError):
    """Raised when a computation diverges or meets a degenerate value."""


class CorpusError(DataError):
    """Raised for unreadable or inconsistent note collections."""


class VocabularyError(DataError):
    """Raised when a corpus is too small for the requested vocabulary."""


class VectorFormatError(DataError):
    """Raised when a vector file does not follow the documented format."""


class AlignmentError(DataError):
    """Raised when an alignment cannot be computed from the given anchors."""


class GoldFormatError(DataError):
    """Raised for malformed gold dictionary files."""


class EvaluationError(DataError):
    """Raised when an evaluation request cannot be satisfied."""


class TrainingDivergedError(NumericalError):
    """Raised when a training loss stops being finite."""


class DegenerateVectorError(NumericalError):
    """Raised when a similarity is requested for a zero vector."""


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def exit_code_for(exc: BaseException) -> int:
    """Return the documented process exit code for ``exc``."""

    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, DataError):
        return EXIT_DATA
    return EXIT_USAGE
