"""Polar and HSV views of a flow field; hue follows the OpenCV ``[0, 180)`` convention."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import cv2
import numpy as np

from core.errors import ConfigError, DataError
from core.types import FlowField


@dataclass(frozen=True)
class PolarFlow:
    """Magnitude in px/frame and direction in degrees within ``[0, 360)``."""

    magnitude: np.ndarray
    angle: np.ndarray


def flow_to_polar(flow: FlowField) -> PolarFlow:
    u = flow.u.astype(np.float64)
    v = flow.v.astype(np.float64)
    angle = np.mod(np.degrees(np.arctan2(v, u)), 360.0)
    # mod of a tiny negative angle rounds up to 360.0
    angle[angle >= 360.0] = 0.0
    return PolarFlow(magnitude=np.hypot(u, v), angle=angle)


def polar_to_flow(polar: PolarFlow) -> Tuple[np.ndarray, np.ndarray]:
    radians = np.radians(polar.angle)
    return polar.magnitude * np.cos(radians), polar.magnitude * np.sin(radians)


def polar_to_hsv(polar: PolarFlow, mag_ref: float = 8.0) -> np.ndarray:
    """``(height, width, 3)`` uint8 image: hue = half the angle, full saturation, value = scaled magnitude."""
    if mag_ref <= 0:
        raise ConfigError(f"mag_ref must be positive, got {mag_ref}")
    hue = np.minimum(np.floor(polar.angle / 2.0), 179.0)
    value = np.minimum(255.0, np.floor(255.0 * polar.magnitude / mag_ref + 0.5))
    hsv = np.empty(polar.angle.shape + (3,), dtype=np.uint8)
    hsv[..., 0] = hue.astype(np.uint8)
    hsv[..., 1] = 255
    hsv[..., 2] = value.astype(np.uint8)
    return hsv


def hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    hsv = np.asarray(hsv)
    if hsv.ndim != 3 or hsv.shape[2] != 3:
        raise DataError(f"HSV image must be (height, width, 3), got {hsv.shape}")
    return cv2.cvtColor(np.ascontiguousarray(hsv, dtype=np.uint8), cv2.COLOR_HSV2RGB)


def flow_to_rgb(flow: FlowField, mag_ref: float = 8.0) -> np.ndarray:
    return hsv_to_rgb(polar_to_hsv(flow_to_polar(flow), mag_ref))


__all__ = ["PolarFlow", "flow_to_polar", "polar_to_flow", "polar_to_hsv", "hsv_to_rgb", "flow_to_rgb"]
