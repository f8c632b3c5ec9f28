"""Named failure kinds.

Three categories, mapped to CLI exit codes by `egofront.cli`:
- UsageError     -> 2
- DataError      -> 3 (bad or inconsistent inputs; subclasses ValueError)
- RuntimeFailure -> 4 (a run that started but could not finish)
"""

from __future__ import annotations

from typing import Any


class UsageError(Exception):
    exit_code = 2


class DataError(ValueError):
    exit_code = 3


class RuntimeFailure(RuntimeError):
    exit_code = 4


# Data errors

class PointOutsideFov(DataError):
    pass


class LengthTooShort(DataError):
    pass


class NoTransientFound(DataError):
    pass


class MaskMissing(DataError):
    pass


class SplitTooShort(DataError):
    pass


class CropOutOfBounds(DataError):
    pass


class IndexOutOfRange(DataError, IndexError):
    pass


class EmptyPoseSet(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class DatasetTooSmall(DataError):
    pass


class SequenceTooShort(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ConfigMismatch(DataError):
    pass


class UnknownMode(DataError):
    pass


# Runtime failures

class NonFiniteLoss(RuntimeFailure):
    """Training produced a NaN/inf loss; `diagnostics` holds the terms at the failing step."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
        return f"{base} ({details})"
