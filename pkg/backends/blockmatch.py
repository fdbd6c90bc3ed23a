"""Exhaustive integer block matching, used as an independent flow oracle."""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from backends.base import BaseFlowBackend
from core.errors import ConfigError
from core.types import FlowField, LumaFrame, require_same_shape


class BlockMatchParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    block: int = Field(8, ge=3)
    search_radius: int = Field(4, ge=1)


def candidate_order(search_radius: int) -> List[Tuple[int, int]]:
    """All ``(dy, dx)`` in the search window, smallest ``|d|`` first, then lexicographic."""
    span = range(-search_radius, search_radius + 1)
    return sorted(((dy, dx) for dy in span for dx in span), key=lambda d: (d[0] ** 2 + d[1] ** 2, d[0], d[1]))


def block_sad(prev: np.ndarray, curr: np.ndarray, x: int, y: int, size: Tuple[int, int], dx: int, dy: int) -> Optional[int]:
    """SAD between the block of ``prev`` at ``(x, y)`` and ``curr`` displaced by ``(dx, dy)``; None when out of bounds."""
    bh, bw = size
    rows, cols = prev.shape
    if y + dy < 0 or x + dx < 0 or y + dy + bh > rows or x + dx + bw > cols:
        return None
    ref = prev[y : y + bh, x : x + bw].astype(np.int64)
    moved = curr[y + dy : y + dy + bh, x + dx : x + dx + bw].astype(np.int64)
    return int(np.abs(moved - ref).sum())


def block_match_flow(prev: LumaFrame, curr: LumaFrame, block: int = 8, search_radius: int = 4) -> FlowField:
    """Per-block integer displacement with the smallest sum of absolute differences.

    Blocks tile the frame without overlap (the last row/column of blocks may
    be narrower).  Only displacements that keep the whole block inside the
    frame are candidates; the zero displacement always is.
    """
    if block < 3:
        raise ConfigError(f"Block size must be at least 3, got {block}")
    if search_radius < 1:
        raise ConfigError(f"Search radius must be at least 1, got {search_radius}")
    require_same_shape(prev.shape, curr.shape, "block matching frames")

    ref = prev.data.astype(np.int64)
    moved = curr.data.astype(np.int64)
    rows, cols = ref.shape
    row_starts = np.arange(0, rows, block)
    col_starts = np.arange(0, cols, block)
    block_h = np.minimum(block, rows - row_starts)
    block_w = np.minimum(block, cols - col_starts)

    best_sad = np.full((len(row_starts), len(col_starts)), np.iinfo(np.int64).max, dtype=np.int64)
    best_dy = np.zeros(best_sad.shape, dtype=np.int64)
    best_dx = np.zeros(best_sad.shape, dtype=np.int64)

    for dy, dx in candidate_order(search_radius):
        diff = np.zeros((rows, cols), dtype=np.int64)
        ys = slice(max(0, -dy), min(rows, rows - dy))
        xs = slice(max(0, -dx), min(cols, cols - dx))
        if ys.start < ys.stop and xs.start < xs.stop:
            diff[ys, xs] = np.abs(moved[ys.start + dy : ys.stop + dy, xs.start + dx : xs.stop + dx] - ref[ys, xs])
        sad = np.add.reduceat(np.add.reduceat(diff, row_starts, axis=0), col_starts, axis=1)

        valid_rows = (row_starts + dy >= 0) & (row_starts + block_h + dy <= rows)
        valid_cols = (col_starts + dx >= 0) & (col_starts + block_w + dx <= cols)
        better = valid_rows[:, None] & valid_cols[None, :] & (sad < best_sad)
        best_sad = np.where(better, sad, best_sad)
        best_dy = np.where(better, dy, best_dy)
        best_dx = np.where(better, dx, best_dx)

    u = np.repeat(np.repeat(best_dx, block_h, axis=0), block_w, axis=1)
    v = np.repeat(np.repeat(best_dy, block_h, axis=0), block_w, axis=1)
    return FlowField(u.astype(np.float32), v.astype(np.float32))


class BlockMatchBackend(BaseFlowBackend):
    name = "blockmatch"

    def __init__(self, params: Optional[BlockMatchParams] = None) -> None:
        self.params = params or BlockMatchParams()

    @property
    def window_radius(self) -> int:
        return self.params.search_radius + self.params.block

    @property
    def alignment(self) -> int:
        return self.params.block

    def _estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        return block_match_flow(prev, curr, self.params.block, self.params.search_radius)


__all__ = [
    "BlockMatchParams",
    "BlockMatchBackend",
    "block_match_flow",
    "block_sad",
    "candidate_order",
]
