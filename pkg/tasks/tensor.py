"""The three-layer output of a frame pair: motion pattern plus the two velocity layers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from core.errors import DimensionMismatchError
from core.sensor import BinConfig, upsample_grid
from core.types import FlowField, MotionPattern


@dataclass(frozen=True)
class NeuroFlowTensor:
    pattern: np.ndarray
    flow: FlowField

    def __post_init__(self) -> None:
        pattern = np.asarray(self.pattern, dtype=np.uint8)
        if pattern.shape != self.flow.shape:
            raise DimensionMismatchError(
                f"Pattern layer {pattern.shape} and flow layers {self.flow.shape} differ"
            )
        object.__setattr__(self, "pattern", pattern)

    @property
    def u(self) -> np.ndarray:
        return self.flow.u

    @property
    def v(self) -> np.ndarray:
        return self.flow.v

    @property
    def width(self) -> int:
        return self.flow.width

    @property
    def height(self) -> int:
        return self.flow.height

    def stack(self) -> np.ndarray:
        """``(3, height, width)`` float array: pattern, u, v."""
        return np.stack([self.pattern.astype(np.float32), self.u, self.v])


def assemble_tensor(pattern: MotionPattern, bin_cfg: BinConfig, flow: FlowField) -> NeuroFlowTensor:
    if (pattern.rows * bin_cfg.m, pattern.cols * bin_cfg.n) != flow.shape:
        raise DimensionMismatchError(
            f"Pattern {pattern.cols}x{pattern.rows} with {bin_cfg.n}x{bin_cfg.m} units "
            f"does not match flow {flow.width}x{flow.height}"
        )
    return NeuroFlowTensor(upsample_grid(pattern.bits, bin_cfg), flow)


def full_support_tensor(flow: FlowField) -> NeuroFlowTensor:
    """Tensor with every pixel marked as moving; used by the conventional path."""
    return NeuroFlowTensor(np.ones(flow.shape, dtype=np.uint8), flow)


__all__ = ["NeuroFlowTensor", "assemble_tensor", "full_support_tensor"]
