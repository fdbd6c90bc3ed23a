"""Motion prediction: remap the frame one step ahead with a Lanczos kernel."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from core.errors import ConfigError
from core.frame_io import write_pgm
from core.metrics import MetricParams, ssim
from core.types import LumaFrame, require_same_shape
from tasks.base import BaseTask
from tasks.tensor import NeuroFlowTensor

LOGGER = logging.getLogger(__name__)

_CHUNK = 1 << 16


class PredictionParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    lanczos_n: int = Field(3, ge=1, description="Kernel half-width in pixels.")


def lanczos_kernel(x, n: int):
    """``sinc(x) * sinc(x / n)`` inside ``|x| < n``, zero outside; ``np.sinc`` is the normalized sinc."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.where(np.abs(x) < n, np.sinc(x) * np.sinc(x / n), 0.0)
    if weights.ndim == 0:
        return float(weights)
    return weights


def lanczos_taps(positions: np.ndarray, n: int, size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Clamped tap indices and renormalized weights, each ``(len(positions), 2n)``."""
    base = np.floor(positions)
    offsets = np.arange(-n + 1, n + 1, dtype=np.float64)
    taps = base[:, None] + offsets[None, :]
    weights = lanczos_kernel(positions[:, None] - taps, n)
    weights = weights / weights.sum(axis=1, keepdims=True)
    indices = np.clip(taps, 0, size - 1).astype(np.int64)
    return indices, weights


def warp_predict(frame: LumaFrame, tensor: NeuroFlowTensor, n: int = 3) -> LumaFrame:
    """Backward-warp ``frame`` by the tensor flow wherever the pattern layer is set."""
    if n < 1:
        raise ConfigError(f"Lanczos half-width must be at least 1, got {n}")
    require_same_shape(frame.shape, tensor.flow.shape, "prediction frame and flow")

    source = frame.data.astype(np.float64)
    out = frame.data.copy()
    rows, cols = np.nonzero(tensor.pattern)
    height, width = frame.shape

    for start in range(0, len(rows), _CHUNK):
        r = rows[start : start + _CHUNK]
        c = cols[start : start + _CHUNK]
        sample_x = c - tensor.u[r, c].astype(np.float64)
        sample_y = r - tensor.v[r, c].astype(np.float64)
        ix, wx = lanczos_taps(sample_x, n, width)
        iy, wy = lanczos_taps(sample_y, n, height)
        patch = source[iy[:, :, None], ix[:, None, :]]
        values = np.einsum("pi,pj,pij->p", wy, wx, patch)
        out[r, c] = np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
    return LumaFrame(out)


class PredictionTask(BaseTask):
    """Next-moment frame under constant velocity."""

    params_model = PredictionParams
    metric_name = "ssim"

    def run(self, context: Dict[str, Any]) -> LumaFrame:
        return warp_predict(context["curr_frame"], context["tensor"], self.params.lanczos_n)

    def score(self, artifact: LumaFrame, reference: Optional[LumaFrame], metric_params: MetricParams) -> Optional[float]:
        if reference is None:
            return None
        return ssim(artifact, reference, mode=metric_params.ssim_mode, k1=metric_params.k1, k2=metric_params.k2)

    def write(self, artifact: LumaFrame, out_dir: Path, frame_index: int) -> Path:
        path = Path(out_dir) / "predicted" / f"p{frame_index:04d}.pgm"
        path.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(artifact, path)
        return path


__all__ = ["PredictionParams", "PredictionTask", "lanczos_kernel", "lanczos_taps", "warp_predict"]
