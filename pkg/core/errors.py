"""Exception hierarchy shared by every pipeline stage.

Each error carries the exit code the CLI reports for it and also derives from
the closest builtin exception, so code catching ``ValueError`` or
``FileNotFoundError`` keeps working.
"""
from __future__ import annotations

from typing import Optional


class NeuroFlowError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2


class ConfigError(NeuroFlowError, ValueError):
    """Invalid configuration or parameter values."""

    exit_code = 1


class DataError(NeuroFlowError, ValueError):
    """Input data that cannot be read or does not fit together."""

    exit_code = 2


class FrameNotFoundError(DataError, FileNotFoundError):
    """A frame or flow file does not exist."""


class UnsupportedFormatError(DataError):
    """The file is not a binary P5 PGM."""


class UnsupportedMaxvalError(DataError):
    """The PGM maxval is not 255."""


class TruncatedPayloadError(DataError):
    """The payload is shorter than the header promises."""


class BadMagicError(DataError):
    """A ``.flo`` file does not start with the Middlebury magic number."""


class FlowSizeError(DataError):
    """The ``.flo`` payload size disagrees with its header."""


class InvalidFlowError(DataError):
    """A flow field contains non-finite values or inconsistent layers."""


class FrameWriteError(DataError, OSError):
    """An output file could not be written."""


class DimensionMismatchError(DataError):
    """Frames, grids or fields have incompatible dimensions."""


class EmptySequenceError(DataError):
    """A frame directory contains no matching frames."""


class ImageTooSmallError(DataError):
    """An image is smaller than the stencil applied to it."""


class InvalidDriveError(DataError):
    """A memristor drive voltage is not a finite number."""


class SceneBoundsError(DataError):
    """A sprite trajectory leaves the scene."""


class UndefinedIoUError(DataError):
    """IoU requested for two empty regions."""


class BackendError(NeuroFlowError, RuntimeError):
    """A flow backend failed to produce a field."""

    exit_code = 3


class ExternalBackendError(BackendError):
    """The external flow program failed or produced an unusable file."""

    def __init__(self, message: str, *, returncode: Optional[int] = None, stderr: str = "") -> None:
        super().__init__(message)
        self.returncode = returncode
        self.stderr = stderr


class RoiFlowError(BackendError):
    """A backend failure while processing one ROI of a gated run."""

    def __init__(self, roi_index: int, cause: Exception) -> None:
        super().__init__(f"Flow backend failed on ROI #{roi_index}: {cause}")
        self.roi_index = roi_index
        self.cause = cause


class FrameFlowError(BackendError):
    """A backend failure attributed to one frame pair of a pipeline run."""

    def __init__(self, frame_index: int, cause: Exception) -> None:
        super().__init__(f"Flow backend failed on frame {frame_index}: {cause}")
        self.frame_index = frame_index
        self.cause = cause


__all__ = [
    "NeuroFlowError",
    "ConfigError",
    "DataError",
    "FrameNotFoundError",
    "UnsupportedFormatError",
    "UnsupportedMaxvalError",
    "TruncatedPayloadError",
    "BadMagicError",
    "FlowSizeError",
    "InvalidFlowError",
    "FrameWriteError",
    "DimensionMismatchError",
    "EmptySequenceError",
    "ImageTooSmallError",
    "InvalidDriveError",
    "SceneBoundsError",
    "UndefinedIoUError",
    "BackendError",
    "ExternalBackendError",
    "RoiFlowError",
    "FrameFlowError",
]
