from __future__ import annotations

from collections.abc import Sequence


class SoccerDetectionError(Exception):
    """Base class for every error raised by the detection library."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ShapeMismatchError(SoccerDetectionError):
    """Raised when a tensor op receives an input of the wrong rank or shape."""

    def __init__(self, op: str, expected: Sequence[int] | str, actual: Sequence[int]):
        expected_txt = expected if isinstance(expected, str) else tuple(expected)
        super().__init__(f"{op}: expected shape {expected_txt}, got {tuple(actual)}")
        self.op = op
        self.expected = expected
        self.actual = tuple(actual)


class NonFiniteGradientError(SoccerDetectionError):
    """Raised when an optimizer step sees NaN or Inf in a gradient."""


class ConfigValidationError(SoccerDetectionError):
    """Raised when a configuration record violates its invariants or has unknown keys."""


class LabelError(SoccerDetectionError):
    """Raised for out-of-range class indices or unknown class names."""


class DatasetError(SoccerDetectionError):
    """Raised for missing/corrupt dataset files or unusable datasets."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path


class CheckpointError(SoccerDetectionError):
    """Raised when a checkpoint cannot be read or does not match the model."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path


class FrameOrderError(SoccerDetectionError):
    """Raised when frames reach the detector out of strictly increasing index order."""

    def __init__(self, frame_index: int, previous_index: int):
        super().__init__(
            f"frame {frame_index} arrived after frame {previous_index}; "
            "frame indices must be strictly increasing"
        )
        self.frame_index = frame_index
        self.previous_index = previous_index


class MetricUndefinedError(SoccerDetectionError):
    """Raised when a metric has no meaningful value and absence is not an option."""
