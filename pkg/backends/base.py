"""Base class shared by flow backend implementations."""
from __future__ import annotations

from core.types import FlowField, LumaFrame, require_same_shape


class BaseFlowBackend:
    """Dense displacement estimator working on a pair of equally sized frames.

    ``window_radius`` is how far, in pixels, input outside a region can
    influence the flow inside it; gated runs pad each ROI by that much.
    ``alignment`` is the grid the padded crops snap to so that multi-scale
    backends see the same sampling lattice as a dense run.
    """

    name = "base"

    @property
    def window_radius(self) -> int:
        return 0

    @property
    def alignment(self) -> int:
        return 1

    def estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        require_same_shape(prev.shape, curr.shape, f"{self.name} backend frames")
        return self._estimate(prev, curr)

    def _estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        raise NotImplementedError
