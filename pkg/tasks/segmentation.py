"""Motion segmentation from the HSV rendering of the flow."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.frame_io import write_mask
from core.metrics import MetricParams, pixel_accuracy
from core.types import RoiRect
from tasks.base import BaseTask
from tasks.morphology import morph
from tasks.polar import flow_to_polar, polar_to_hsv
from tasks.tensor import NeuroFlowTensor


class SegmentationParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    v_thresh: int = Field(25, ge=0, le=254, description="Keep pixels whose HSV value exceeds this.")
    kernel: int = Field(3, ge=1)
    mag_ref: float = Field(8.0, gt=0.0, description="Magnitude in px/frame mapped to value 255.")


def roi_union_mask(rois: Sequence[RoiRect], shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for roi in rois:
        mask[roi.slices()] = True
    return mask


def segment_mask(
    tensor: NeuroFlowTensor,
    rois: Sequence[RoiRect],
    v_thresh: int = 25,
    kernel: int = 3,
    mag_ref: float = 8.0,
) -> np.ndarray:
    """Binary mask of moving pixels inside the ROI union, cleaned by an opening."""
    hsv = polar_to_hsv(flow_to_polar(tensor.flow), mag_ref)
    moving = (hsv[..., 2] > v_thresh) & roi_union_mask(rois, hsv.shape[:2])
    return morph(moving, "open", kernel)


class SegmentationTask(BaseTask):
    params_model = SegmentationParams
    metric_name = "pa"

    def run(self, context: Dict[str, Any]) -> np.ndarray:
        return segment_mask(
            context["tensor"],
            context["rois"],
            v_thresh=self.params.v_thresh,
            kernel=self.params.kernel,
            mag_ref=self.params.mag_ref,
        )

    def score(self, artifact: np.ndarray, reference: Optional[np.ndarray], metric_params: MetricParams) -> Optional[float]:
        if reference is None:
            return None
        return pixel_accuracy(artifact, reference)

    def write(self, artifact: np.ndarray, out_dir: Path, frame_index: int) -> Path:
        path = Path(out_dir) / "masks" / f"m{frame_index:04d}.pgm"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_mask(artifact, path)
        return path


__all__ = ["SegmentationParams", "SegmentationTask", "segment_mask", "roi_union_mask"]
