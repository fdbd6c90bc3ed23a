"""Domain value types passed between pipeline stages."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.errors import DataError, DimensionMismatchError, InvalidFlowError


@dataclass(frozen=True)
class LumaFrame:
    """Single-channel 8-bit intensity image, stored row-major as ``(height, width)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"LumaFrame needs a non-empty 2D array, got shape {data.shape}")
        if data.dtype != np.uint8:
            if np.issubdtype(data.dtype, np.floating) and not np.all(np.isfinite(data)):
                raise DataError("LumaFrame values must be finite")
            if data.size and (data.min() < 0 or data.max() > 255):
                raise DataError("LumaFrame values must lie in [0, 255]")
            if np.issubdtype(data.dtype, np.floating):
                data = np.rint(data)
            data = data.astype(np.uint8)
        object.__setattr__(self, "data", data)

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def crop(self, rect: "RoiRect") -> "LumaFrame":
        return LumaFrame(self.data[rect.y : rect.y + rect.h, rect.x : rect.x + rect.w])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LumaFrame):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement ``(u, v)`` in px/frame; both layers ``(height, width)``."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float32)
        v = np.asarray(self.v, dtype=np.float32)
        if u.ndim != 2 or u.shape != v.shape:
            raise InvalidFlowError(f"u and v must be 2D layers of equal shape, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InvalidFlowError("Flow field contains non-finite values")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def zeros(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width), np.float32), np.zeros((height, width), np.float32))

    @property
    def width(self) -> int:
        return int(self.u.shape[1])

    @property
    def height(self) -> int:
        return int(self.u.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u.astype(np.float64), self.v.astype(np.float64))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowField):
            return NotImplemented
        return (
            self.shape == other.shape
            and bool(np.array_equal(self.u, other.u))
            and bool(np.array_equal(self.v, other.v))
        )


@dataclass(frozen=True, order=True)
class RoiRect:
    """Axis-aligned rectangle; ``(x, y)`` is the top-left corner, ``w``/``h`` exclusive extents."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise DataError(f"RoiRect needs positive extents, got w={self.w} h={self.h}")

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    def intersection_area(self, other: "RoiRect") -> int:
        iw = min(self.x2, other.x2) - max(self.x, other.x)
        ih = min(self.y2, other.y2) - max(self.y, other.y)
        return max(0, iw) * max(0, ih)

    def iou(self, other: "RoiRect") -> float:
        inter = self.intersection_area(other)
        return inter / float(self.area + other.area - inter)

    def union(self, other: "RoiRect") -> "RoiRect":
        x, y = min(self.x, other.x), min(self.y, other.y)
        return RoiRect(x, y, max(self.x2, other.x2) - x, max(self.y2, other.y2) - y)

    def clamp(self, width: int, height: int) -> "RoiRect":
        x, y = max(0, self.x), max(0, self.y)
        x2, y2 = min(width, self.x2), min(height, self.y2)
        if x2 <= x or y2 <= y:
            raise DataError(f"{self} lies outside a {width}x{height} frame")
        return RoiRect(x, y, x2 - x, y2 - y)

    def scale(self, sx: int, sy: int) -> "RoiRect":
        return RoiRect(self.x * sx, self.y * sy, self.w * sx, self.h * sy)

    def inflate(self, pad: int) -> "RoiRect":
        return RoiRect(self.x - pad, self.y - pad, self.w + 2 * pad, self.h + 2 * pad)

    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y, self.y2), slice(self.x, self.x2)


RoiSet = List[RoiRect]


@dataclass(frozen=True)
class MotionPattern:
    """Binary motion-pattern layer read from the memristor array; 1 marks a moving cell."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DataError(f"MotionPattern needs a 2D array, got shape {bits.shape}")
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise DataError("MotionPattern bits must be 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def rows(self) -> int:
        return int(self.bits.shape[0])

    @property
    def cols(self) -> int:
        return int(self.bits.shape[1])

    def active_count(self) -> int:
        return int(self.bits.sum())


def require_same_shape(first: Tuple[int, ...], second: Tuple[int, ...], what: str) -> None:
    if tuple(first) != tuple(second):
        raise DimensionMismatchError(f"{what}: shape {tuple(first)} does not match {tuple(second)}")


__all__ = [
    "LumaFrame",
    "FlowField",
    "RoiRect",
    "RoiSet",
    "MotionPattern",
    "require_same_shape",
]
