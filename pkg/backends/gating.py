"""ROI gating: run a flow backend only on the regions selected by the pre-filter."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence
import logging

import numpy as np

from backends.base import BaseFlowBackend
from core.errors import DataError, RoiFlowError
from core.types import FlowField, LumaFrame, RoiRect, require_same_shape

LOGGER = logging.getLogger(__name__)


def padded_window(roi: RoiRect, backend: BaseFlowBackend, width: int, height: int) -> RoiRect:
    """ROI grown by the backend context radius, origin snapped to its alignment grid, clamped to the frame."""
    pad = backend.window_radius
    align = max(1, backend.alignment)
    x0 = max(0, roi.x - pad)
    y0 = max(0, roi.y - pad)
    x0 -= x0 % align
    y0 -= y0 % align
    x1 = min(width, roi.x2 + pad)
    y1 = min(height, roi.y2 + pad)
    return RoiRect(x0, y0, x1 - x0, y1 - y0)


def _estimate_window(
    index: int, prev: LumaFrame, curr: LumaFrame, window: RoiRect, backend: BaseFlowBackend
) -> FlowField:
    try:
        return backend.estimate(prev.crop(window), curr.crop(window))
    except Exception as exc:
        raise RoiFlowError(index, exc) from exc


def gated_flow(
    prev: LumaFrame,
    curr: LumaFrame,
    rois: Sequence[RoiRect],
    backend: BaseFlowBackend,
    max_workers: int = 1,
) -> FlowField:
    """Flow inside ``rois`` and exactly zero elsewhere.

    Each ROI is padded before the backend runs so the ROI interior sees the
    same context as a full-frame run; only the ROI itself is written back.
    Overlapping pixels keep the value of the last ROI in list order.
    """
    require_same_shape(prev.shape, curr.shape, "gated flow frames")
    height, width = prev.shape
    u = np.zeros((height, width), dtype=np.float32)
    v = np.zeros((height, width), dtype=np.float32)
    if not rois:
        return FlowField(u, v)

    for roi in rois:
        if roi.x < 0 or roi.y < 0 or roi.x2 > width or roi.y2 > height:
            raise DataError(f"{roi} exceeds the {width}x{height} frame")

    windows = [padded_window(roi, backend, width, height) for roi in rois]
    if max_workers > 1 and len(rois) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [
                pool.submit(_estimate_window, index, prev, curr, window, backend)
                for index, window in enumerate(windows)
            ]
            fields: List[FlowField] = [future.result() for future in futures]
    else:
        fields = [
            _estimate_window(index, prev, curr, window, backend) for index, window in enumerate(windows)
        ]

    for roi, window, field in zip(rois, windows, fields):
        inner = (
            slice(roi.y - window.y, roi.y - window.y + roi.h),
            slice(roi.x - window.x, roi.x - window.x + roi.w),
        )
        u[roi.slices()] = field.u[inner]
        v[roi.slices()] = field.v[inner]
        LOGGER.debug("ROI %s computed on window %s", roi, window)
    return FlowField(u, v)


__all__ = ["gated_flow", "padded_window"]
