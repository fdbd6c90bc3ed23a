"""Evaluation metrics: SSIM for prediction, pixel accuracy for segmentation, IoU for tracking."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union
import json

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import ConfigError, FrameWriteError, UndefinedIoUError
from core.types import LumaFrame, RoiRect, require_same_shape

SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255.0
SSIM_WINDOW = 8

SsimMode = Literal["global", "windowed"]


class MetricParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    ssim_mode: SsimMode = "windowed"
    k1: float = Field(SSIM_K1, gt=0.0)
    k2: float = Field(SSIM_K2, gt=0.0)


def _ssim_stats(x: np.ndarray, y: np.ndarray, axes: Tuple[int, int], c1: float, c2: float) -> np.ndarray:
    mu_x = x.mean(axis=axes, keepdims=True)
    mu_y = y.mean(axis=axes, keepdims=True)
    dx = x - mu_x
    dy = y - mu_y
    mu_x = mu_x.squeeze(axis=axes)
    mu_y = mu_y.squeeze(axis=axes)
    var_x = (dx * dx).mean(axis=axes)
    var_y = (dy * dy).mean(axis=axes)
    cov = (dx * dy).mean(axis=axes)
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return numerator / denominator


def ssim(
    x: Union[LumaFrame, np.ndarray],
    y: Union[LumaFrame, np.ndarray],
    mode: SsimMode = "global",
    k1: float = SSIM_K1,
    k2: float = SSIM_K2,
    dynamic_range: float = SSIM_L,
) -> float:
    """Structural similarity over the whole image or averaged over 8x8 tiles."""
    a = np.asarray(x.data if isinstance(x, LumaFrame) else x, dtype=np.float64)
    b = np.asarray(y.data if isinstance(y, LumaFrame) else y, dtype=np.float64)
    require_same_shape(a.shape, b.shape, "ssim inputs")
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2

    if mode == "global":
        return float(_ssim_stats(a, b, (0, 1), c1, c2))
    if mode != "windowed":
        raise ConfigError(f"Unknown SSIM mode '{mode}'")

    rows, cols = a.shape[0] // SSIM_WINDOW, a.shape[1] // SSIM_WINDOW
    if rows == 0 or cols == 0:
        return float(_ssim_stats(a, b, (0, 1), c1, c2))
    crop = (slice(0, rows * SSIM_WINDOW), slice(0, cols * SSIM_WINDOW))
    tiles_a = a[crop].reshape(rows, SSIM_WINDOW, cols, SSIM_WINDOW)
    tiles_b = b[crop].reshape(rows, SSIM_WINDOW, cols, SSIM_WINDOW)
    return float(_ssim_stats(tiles_a, tiles_b, (1, 3), c1, c2).mean())


def pixel_accuracy(pred: np.ndarray, gt: np.ndarray) -> float:
    """Share of pixels whose binary class matches the ground truth."""
    pred = np.asarray(pred) > 0
    gt = np.asarray(gt) > 0
    require_same_shape(pred.shape, gt.shape, "pixel accuracy inputs")
    correct = np.count_nonzero(pred == gt)
    return correct / float(gt.size)


def iou_pair(a: Union[RoiRect, np.ndarray], b: Union[RoiRect, np.ndarray]) -> float:
    """Intersection over union of two rectangles or two binary masks."""
    if isinstance(a, RoiRect) and isinstance(b, RoiRect):
        return a.iou(b)
    mask_a = np.asarray(a) > 0
    mask_b = np.asarray(b) > 0
    require_same_shape(mask_a.shape, mask_b.shape, "IoU masks")
    union = np.count_nonzero(mask_a | mask_b)
    if union == 0:
        raise UndefinedIoUError("IoU is undefined for two empty masks")
    return np.count_nonzero(mask_a & mask_b) / float(union)


def mean_box_iou(pred_boxes: Sequence[RoiRect], gt_boxes: Sequence[RoiRect]) -> float:
    """Mean IoU of predictions greedily matched to unused ground-truth boxes."""
    if not gt_boxes:
        raise ConfigError("mean_box_iou needs at least one ground-truth box")
    if not pred_boxes:
        return 0.0
    available = list(range(len(gt_boxes)))
    total = 0.0
    for box in pred_boxes:
        if not available:
            continue
        best = max(available, key=lambda index: (box.iou(gt_boxes[index]), -index))
        best_iou = box.iou(gt_boxes[best])
        if best_iou > 0:
            total += best_iou
            available.remove(best)
    return total / len(pred_boxes)


@dataclass
class MetricsReport:
    """Per-frame accuracy values and per-stage wall-clock timings of one run."""

    mode: str = "neuromorphic"
    frame_indices: List[int] = field(default_factory=list)
    ssim: List[Optional[float]] = field(default_factory=list)
    pa: List[Optional[float]] = field(default_factory=list)
    mean_iou: List[Optional[float]] = field(default_factory=list)
    roi_counts: List[int] = field(default_factory=list)
    timings: Dict[str, List[float]] = field(default_factory=dict)

    def add_timing(self, stage: str, seconds: float) -> None:
        self.timings.setdefault(stage, []).append(seconds)

    def total_time(self, stage: str) -> float:
        return float(sum(self.timings.get(stage, [])))

    def median_time(self, stage: str) -> float:
        values = self.timings.get(stage, [])
        return float(median(values)) if values else 0.0

    def mean(self, metric: str) -> Optional[float]:
        values = [value for value in getattr(self, metric) if value is not None]
        return float(np.mean(values)) if values else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "frames": list(self.frame_indices),
            "ssim": list(self.ssim),
            "pa": list(self.pa),
            "mean_iou": list(self.mean_iou),
            "roi_counts": list(self.roi_counts),
            "timings": {stage: list(values) for stage, values in self.timings.items()},
            "summary": {
                "ssim": self.mean("ssim"),
                "pa": self.mean("pa"),
                "mean_iou": self.mean("mean_iou"),
            },
        }

    def write_json(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        except OSError as exc:
            raise FrameWriteError(f"Cannot write {path}: {exc}") from exc


__all__ = [
    "MetricParams",
    "MetricsReport",
    "ssim",
    "pixel_accuracy",
    "iou_pair",
    "mean_box_iou",
]
