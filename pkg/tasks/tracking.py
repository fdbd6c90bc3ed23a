"""Per-pair object tracking: segmentation, contour boxes and non-maximum suppression."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from core.errors import ConfigError
from core.frame_io import write_boxes
from core.metrics import MetricParams, mean_box_iou
from core.types import RoiRect
from tasks.base import BaseTask
from tasks.segmentation import segment_mask
from tasks.tensor import NeuroFlowTensor

LOGGER = logging.getLogger(__name__)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class TrackingParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    v_thresh: int = Field(25, ge=0, le=254)
    kernel: int = Field(3, ge=1)
    mag_ref: float = Field(8.0, gt=0.0)
    min_area: int = Field(16, ge=1)
    nms_iou: float = Field(0.5, gt=0.0, lt=1.0)


@dataclass(frozen=True)
class TrackBox:
    """Detected box scored by the mean flow magnitude inside it (px/frame)."""

    rect: RoiRect
    score: float

    def __post_init__(self) -> None:
        if not self.score >= 0:
            raise ConfigError(f"TrackBox score must be non-negative, got {self.score}")

    @property
    def area(self) -> int:
        return self.rect.area


def detect_boxes(mask: np.ndarray, min_area: int = 16, magnitude: Optional[np.ndarray] = None) -> List[TrackBox]:
    """Bounding rectangles of 8-connected components with ``w * h >= min_area``, in label order."""
    if min_area < 1:
        raise ConfigError(f"min_area must be at least 1, got {min_area}")
    labels, count = ndimage.label(np.asarray(mask) > 0, structure=_EIGHT_CONNECTED)
    boxes = []
    for found in ndimage.find_objects(labels):
        if found is None:
            continue
        rows, cols = found
        rect = RoiRect(cols.start, rows.start, cols.stop - cols.start, rows.stop - rows.start)
        if rect.area < min_area:
            continue
        score = float(magnitude[found].mean()) if magnitude is not None else 0.0
        boxes.append(TrackBox(rect, score))
    return boxes


def nms_boxes(boxes: Sequence[TrackBox], iou_thresh: float = 0.5) -> List[TrackBox]:
    """Greedy suppression by descending score; ties go to the larger box, then smaller ``(x, y)``."""
    if not 0.0 < iou_thresh < 1.0:
        raise ConfigError(f"NMS IoU threshold must lie in (0, 1), got {iou_thresh}")
    ordered = sorted(boxes, key=lambda box: (-box.score, -box.area, box.rect.x, box.rect.y))
    kept: List[TrackBox] = []
    for box in ordered:
        if all(box.rect.iou(other.rect) < iou_thresh for other in kept):
            kept.append(box)
    return kept


def track_boxes(tensor: NeuroFlowTensor, rois: Sequence[RoiRect], params: TrackingParams) -> List[TrackBox]:
    mask = segment_mask(tensor, rois, v_thresh=params.v_thresh, kernel=params.kernel, mag_ref=params.mag_ref)
    candidates = detect_boxes(mask, params.min_area, tensor.flow.magnitude())
    kept = nms_boxes(candidates, params.nms_iou)
    LOGGER.debug("Tracking: %d candidates, %d kept", len(candidates), len(kept))
    return kept


class TrackingTask(BaseTask):
    params_model = TrackingParams
    metric_name = "mean_iou"

    def run(self, context: Dict[str, Any]) -> List[TrackBox]:
        return track_boxes(context["tensor"], context["rois"], self.params)

    def score(self, artifact: List[TrackBox], reference: Optional[Sequence[RoiRect]], metric_params: MetricParams) -> Optional[float]:
        if not reference:
            return None
        return mean_box_iou([box.rect for box in artifact], list(reference))

    def write(self, artifact: List[TrackBox], out_dir: Path, frame_index: int) -> Path:
        path = Path(out_dir) / "boxes" / f"b{frame_index:04d}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_boxes(artifact, path)
        return path


__all__ = ["TrackingParams", "TrackingTask", "TrackBox", "detect_boxes", "nms_boxes", "track_boxes"]
