"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class GffError(Exception):
    """Base class for all errors raised by gffdetect."""


class DataError(GffError):
    """Input data failed validation (CLI exit code 2)."""


class MissingHeader(DataError):
    def __init__(self, detail: str = "first line must be a header object"):
        super().__init__(f"missing header: {detail}")


class MalformedLine(DataError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        msg = f"line {line_no}: malformed JSON object"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class InvariantViolation(DataError):
    def __init__(self, field: str, line_no: int | None = None, detail: str = ""):
        self.field = field
        self.line_no = line_no
        where = f"line {line_no}: " if line_no is not None else ""
        msg = f"{where}invalid {field!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DimensionMismatch(DataError):
    pass


class EmptyHistory(DataError):
    pass


class BoxNotInFrameList(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class EmptyGroupList(DataError):
    pass


class EmptyDataset(DataError):
    pass


class SpecInvalid(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class IoFailure(GffError):
    pass
