# app/errors.py
"""
Exception hierarchy for the selective-context pipeline.

Library code raises these; only app.cli turns them into exit codes.
"""

from typing import Optional, Tuple


class SelectiveContextError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(SelectiveContextError, ValueError):
    pass


class ConfigError(SelectiveContextError):
    pass


class ModelFormatError(SelectiveContextError):
    """SCNG model file is truncated, has a bad magic or an unsupported version."""


class IngestError(SelectiveContextError):
    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class ScoringError(SelectiveContextError):
    """
    Scoring failed for part of a document.

    `span` holds the (start, end) character offsets of the failing text
    in the normalized document, when known.
    """

    def __init__(self, message: str, span: Optional[Tuple[int, int]] = None):
        self.span = span
        suffix = f" (span {span[0]}-{span[1]})" if span else ""
        super().__init__(f"{message}{suffix}")


class RemoteScoringError(ScoringError):
    def __init__(self, message: str, span: Optional[Tuple[int, int]] = None, retriable: bool = True,
                 status_code: Optional[int] = None):
        self.retriable = retriable
        self.status_code = status_code
        super().__init__(message, span=span)


class AlignmentError(ScoringError):
    """Backend sub-tokens could not be mapped onto caller tokens without losing mass."""
