"""Exception types shared across the toolkit.

Every failure mode callers are expected to handle has its own class so that
CLI and library users can catch precisely; all inherit from JitMinerError.
"""

from __future__ import annotations


class JitMinerError(Exception):
    """Base class for all toolkit errors."""


class IoError(JitMinerError):
    """Filesystem or subprocess I/O failure."""


class NotARepository(JitMinerError):
    """Path exists but does not contain a git repository."""


class UnknownCommit(JitMinerError):
    """Commit hash does not resolve in the repository."""


class LineOutOfRange(JitMinerError):
    """Requested line number exceeds the file length."""


class FileAbsent(JitMinerError):
    """File does not exist at the requested commit."""


class MalformedDiff(JitMinerError):
    """Unified diff text violates the format.

    line_no is the 1-based line of the first violation.
    """

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class MalformedExport(JitMinerError):
    """Ticket export stream has an unusable header or encoding."""


class SchemaMismatch(JitMinerError):
    """Dataset CSV header deviates from the fixed schema.

    column carries the first offending header name.
    """

    def __init__(self, message: str, column: str | None = None):
        super().__init__(message)
        self.column = column


class MalformedRow(JitMinerError):
    """Dataset CSV row failed to parse.

    row is the 1-based data-row index (header excluded).
    """

    def __init__(self, message: str, row: int):
        super().__init__(f"row {row}: {message}")
        self.row = row


class EmptyDataset(JitMinerError):
    """Operation requires at least one row."""


class TooFewRows(JitMinerError):
    """Dataset too small (or too single-sided) to split."""


class SingleClass(JitMinerError):
    """Both classes are required but only one is present."""


class BadShape(JitMinerError):
    """Array or layer shapes do not chain."""


class InvalidConfig(JitMinerError):
    """Configuration value outside its documented domain."""


class UnknownPair(JitMinerError):
    """Requested inducing/fix pair is not in the audit file."""
