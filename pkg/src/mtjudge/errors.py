class MtJudgeError(Exception):
    """Base class for package errors."""


class DataError(MtJudgeError):
    """Malformed or inconsistent input data (files, tables, judgments)."""


class NumericError(MtJudgeError):
    """Non-finite values where finite numbers are required."""
