"""Visual sensory and modulation front-end.

Pixels are binned into ``m x n`` sensory units, the temporal intensity change
of each unit becomes a rectified voltage, and the voltage is turned into a
signed modulation pulse for the memristor driving that unit.
"""
from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import DimensionMismatchError
from core.types import LumaFrame, require_same_shape


class BinConfig(BaseModel):
    """Binning of pixels into sensory units and the intensity-to-volt factor."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    m: int = Field(20, ge=1, description="Pixels per unit vertically.")
    n: int = Field(20, ge=1, description="Pixels per unit horizontally.")
    a: float = Field(0.5 / 255.0, gt=0.0, description="Volts per intensity unit.")

    def grid_shape(self, width: int, height: int) -> tuple[int, int]:
        """Return ``(rows, cols)`` of the unit grid for a ``width x height`` frame."""
        if height % self.m or width % self.n:
            raise DimensionMismatchError(
                f"Frame {width}x{height} is not divisible into {self.n}x{self.m} pixel units"
            )
        return height // self.m, width // self.n


class ModulationConfig(BaseModel):
    """Parameters of the piecewise modulation pulse."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    v_up: float = 0.2
    plus1: float = Field(1.0, gt=0.0)
    plus2: float = Field(1.0, gt=0.0)
    bia1: float = 0.0
    bia2: float = 0.4

    @model_validator(mode="after")
    def _check_branch_separation(self) -> "ModulationConfig":
        if not (self.bia1 < self.v_up <= self.bia2):
            raise ValueError(
                f"modulation needs bia1 < v_up <= bia2, got {self.bia1}, {self.v_up}, {self.bia2}"
            )
        return self


def bin_frame(frame: LumaFrame, cfg: BinConfig) -> np.ndarray:
    """Average every ``m x n`` block of ``frame`` into one unit of a ``rows x cols`` grid."""
    rows, cols = cfg.grid_shape(frame.width, frame.height)
    blocks = frame.data.astype(np.float64).reshape(rows, cfg.m, cols, cfg.n)
    return blocks.mean(axis=(1, 3))


def sensory_voltage(prev_grid: np.ndarray, curr_grid: np.ndarray, cfg: BinConfig) -> np.ndarray:
    """Rectified sensory voltage ``a * |curr - prev|`` per unit (one frame interval)."""
    prev_grid = np.asarray(prev_grid, dtype=np.float64)
    curr_grid = np.asarray(curr_grid, dtype=np.float64)
    require_same_shape(prev_grid.shape, curr_grid.shape, "sensory grids")
    voltage = cfg.a * np.abs(curr_grid - prev_grid)
    # The absolute-value stage of the modulation part; already rectified above.
    return np.abs(voltage)


def modulate(vhat: np.ndarray, cfg: ModulationConfig) -> np.ndarray:
    """Signed modulation pulse: upper branch above ``v_up``, lower branch otherwise."""
    vhat = np.asarray(vhat, dtype=np.float64)
    upper = cfg.plus1 * (vhat - cfg.bia1)
    lower = cfg.plus2 * (vhat - cfg.bia2)
    return np.where(vhat > cfg.v_up, upper, lower)


def upsample_grid(grid: np.ndarray, cfg: BinConfig) -> np.ndarray:
    """Tile every unit into an ``m x n`` pixel block."""
    return np.repeat(np.repeat(np.asarray(grid), cfg.m, axis=0), cfg.n, axis=1)


__all__ = [
    "BinConfig",
    "ModulationConfig",
    "bin_frame",
    "sensory_voltage",
    "modulate",
    "upsample_grid",
]
