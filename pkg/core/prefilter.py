"""Pre-filter: turn the motion pattern into pixel-space regions of interest.

The pattern is smoothed, differentiated with Sobel, thinned by non-maximum
suppression and binarized; contours of the resulting edge image give bounding
rectangles that are inflated, merged and scaled back to pixels.
"""
from __future__ import annotations

from typing import List, Sequence, Tuple
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from core.errors import ConfigError, DimensionMismatchError, ImageTooSmallError
from core.sensor import BinConfig
from core.types import MotionPattern, RoiRect, RoiSet

LOGGER = logging.getLogger(__name__)

# Largest Sobel magnitude for an image with values in [0, 1].
SOBEL_MAX_MAGNITUDE = 4.0 * math.sqrt(2.0)

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
# Counterclockwise on screen (rows grow downwards): W, SW, S, SE, E, NE, N, NW.
_MOORE_OFFSETS: Tuple[Tuple[int, int], ...] = (
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
)


class PrefilterParams(BaseModel):
    """Tuning of the pattern-to-ROI chain; sizes are in pattern cells."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    blur_sigma: float = Field(0.8, gt=0.0)
    edge_threshold: float = Field(0.1, gt=0.0, lt=1.0, description="Fraction of the largest Sobel magnitude.")
    expand: float = Field(0.25, ge=0.0)
    merge: bool = True
    merge_iou: float = Field(0.3, gt=0.0, le=1.0)
    force_full_frame: bool = False


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sampled Gaussian of radius ``ceil(3 sigma)`` normalized to sum 1."""
    if sigma <= 0:
        raise ConfigError(f"Gaussian sigma must be positive, got {sigma}")
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with clamp-to-border edges."""
    kernel = gaussian_kernel(sigma)
    out = ndimage.correlate1d(np.asarray(img, dtype=np.float64), kernel, axis=0, mode="nearest")
    return ndimage.correlate1d(out, kernel, axis=1, mode="nearest")


def sobel_gradients(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel pair ``(gx, gy)``; ``gx`` grows to the right, ``gy`` downwards."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise ImageTooSmallError(f"Sobel needs at least a 3x3 image, got {img.shape}")
    derivative = np.array([-1.0, 0.0, 1.0])
    smoothing = np.array([1.0, 2.0, 1.0])
    gx = ndimage.correlate1d(ndimage.correlate1d(img, derivative, axis=1, mode="nearest"), smoothing, axis=0, mode="nearest")
    gy = ndimage.correlate1d(ndimage.correlate1d(img, derivative, axis=0, mode="nearest"), smoothing, axis=1, mode="nearest")
    return gx, gy


def edge_thin_binarize(gx: np.ndarray, gy: np.ndarray, thresh: float) -> np.ndarray:
    """Non-maximum suppression along the quantized gradient direction, then threshold."""
    if thresh <= 0:
        raise ConfigError(f"Edge threshold must be positive, got {thresh}")
    magnitude = np.hypot(gx, gy)
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    padded = np.pad(magnitude, 1, mode="constant")
    rows, cols = magnitude.shape

    def neighbour(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + rows, 1 + dx : 1 + dx + cols]

    horizontal = (angle < 22.5) | (angle >= 157.5)
    diagonal = (angle >= 22.5) & (angle < 67.5)
    vertical = (angle >= 67.5) & (angle < 112.5)
    anti_diagonal = (angle >= 112.5) & (angle < 157.5)

    first = np.select(
        [horizontal, diagonal, vertical, anti_diagonal],
        [neighbour(0, 1), neighbour(1, 1), neighbour(1, 0), neighbour(1, -1)],
    )
    second = np.select(
        [horizontal, diagonal, vertical, anti_diagonal],
        [neighbour(0, -1), neighbour(-1, -1), neighbour(-1, 0), neighbour(-1, 1)],
    )
    keep = (magnitude >= first) & (magnitude >= second) & (magnitude > thresh)
    return keep.astype(np.uint8)


def _trace_border(padded: np.ndarray, start: Tuple[int, int]) -> List[Tuple[int, int]]:
    """Moore-neighbour border following from the topmost-leftmost pixel, counterclockwise."""
    contour = [start]
    backtrack = (start[0], start[1] - 1)
    current = start
    second = None
    limit = 4 * int(padded.sum()) + 8
    for _ in range(limit):
        offset = (backtrack[0] - current[0], backtrack[1] - current[1])
        begin = _MOORE_OFFSETS.index(offset)
        previous = backtrack
        found = None
        for step in range(1, 9):
            dy, dx = _MOORE_OFFSETS[(begin + step) % 8]
            candidate = (current[0] + dy, current[1] + dx)
            if padded[candidate]:
                found = candidate
                break
            previous = candidate
        if found is None:
            return contour  # isolated pixel
        if current == start and second is not None and found == second:
            return contour
        if second is None:
            second = found
        backtrack, current = previous, found
        if current != start:
            contour.append(current)
    LOGGER.warning("Border following stopped at the step limit near %s", start)
    return contour


def find_contours(binary: np.ndarray) -> List[np.ndarray]:
    """One outer contour per 8-connected component, as ``(N, 2)`` arrays of ``(x, y)``."""
    binary = np.asarray(binary) > 0
    if not binary.any():
        return []
    labels, count = ndimage.label(binary, structure=_EIGHT_CONNECTED)
    flat = labels.ravel()
    ids, first_index = np.unique(flat, return_index=True)
    padded = np.pad(binary, 1, mode="constant")
    contours = []
    for label_id, index in zip(ids, first_index):
        if label_id == 0:
            continue
        row, col = divmod(int(index), binary.shape[1])
        points = _trace_border(padded, (row + 1, col + 1))
        contours.append(np.array([(c - 1, r - 1) for r, c in points], dtype=np.int64))
    return contours


def bounding_rect(contour: np.ndarray) -> RoiRect:
    xs, ys = contour[:, 0], contour[:, 1]
    x, y = int(xs.min()), int(ys.min())
    return RoiRect(x, y, int(xs.max()) - x + 1, int(ys.max()) - y + 1)


def merge_rois(rois: Sequence[RoiRect], iou_threshold: float) -> RoiSet:
    """Replace overlapping pairs by their union until no pair reaches ``iou_threshold``."""
    merged = list(rois)
    changed = True
    while changed:
        changed = False
        for i in range(len(merged)):
            for j in range(i + 1, len(merged)):
                if merged[i].iou(merged[j]) >= iou_threshold:
                    merged[i] = merged[i].union(merged[j])
                    del merged[j]
                    changed = True
                    break
            if changed:
                break
    return merged


def rois_from_contours(
    contours: Sequence[np.ndarray],
    expand: float,
    bounds: Tuple[int, int],
    merge_iou: float = 0.3,
    merge: bool = True,
) -> RoiSet:
    """Inflated, clamped and merged bounding rectangles; ``bounds`` is ``(width, height)``."""
    if expand < 0:
        raise ConfigError(f"ROI expansion must be non-negative, got {expand}")
    width, height = bounds
    rois = []
    for contour in contours:
        rect = bounding_rect(contour)
        pad = int(math.ceil(expand * max(rect.w, rect.h) - 1e-9))
        rois.append(rect.inflate(pad).clamp(width, height))
    if merge:
        rois = merge_rois(rois, merge_iou)
    return rois


def _uncovered_components(bits: np.ndarray, rois: Sequence[RoiRect]) -> List[np.ndarray]:
    """Corner points of every 8-connected active component some cell of which no ROI covers."""
    covered = np.zeros(bits.shape, dtype=bool)
    for roi in rois:
        covered[roi.slices()] = True
    labels, _ = ndimage.label(bits > 0, structure=_EIGHT_CONNECTED)
    missing = []
    for label_id, window in enumerate(ndimage.find_objects(labels), start=1):
        if window is None:
            continue
        component = labels[window] == label_id
        if covered[window][component].all():
            continue
        rows, cols = window
        missing.append(np.array([[cols.start, rows.start], [cols.stop - 1, rows.stop - 1]], dtype=np.int64))
    return missing


def pattern_to_rois(
    pattern: MotionPattern,
    bin_cfg: BinConfig,
    frame_dims: Tuple[int, int],
    params: PrefilterParams,
) -> RoiSet:
    """Full pre-filter chain; ``frame_dims`` is ``(width, height)`` in pixels.

    The pattern gets a one-cell zero border before the edge chain, so grids
    smaller than the Sobel stencil work and blobs touching the frame edge
    still produce closed contours. Components the edge contours miss are
    added through their own bounding rectangles.
    """
    width, height = frame_dims
    if (pattern.rows * bin_cfg.m, pattern.cols * bin_cfg.n) != (height, width):
        raise DimensionMismatchError(
            f"Pattern {pattern.cols}x{pattern.rows} with {bin_cfg.n}x{bin_cfg.m} units does not cover {width}x{height}"
        )
    if params.force_full_frame:
        return [RoiRect(0, 0, width, height)]
    if not pattern.bits.any():
        return []

    padded = np.pad(pattern.bits.astype(np.float64), 1, mode="constant")
    blurred = gaussian_blur(padded, params.blur_sigma)
    gx, gy = sobel_gradients(blurred)
    edges = edge_thin_binarize(gx, gy, params.edge_threshold * SOBEL_MAX_MAGNITUDE)
    upper = np.array([pattern.cols - 1, pattern.rows - 1])
    contours = [np.clip(contour - 1, 0, upper) for contour in find_contours(edges)]
    bounds = (pattern.cols, pattern.rows)
    grid_rois = rois_from_contours(contours, params.expand, bounds, merge_iou=params.merge_iou, merge=params.merge)
    missing = _uncovered_components(pattern.bits, grid_rois)
    if missing:
        LOGGER.debug("Pre-filter: %d components outside the edge contours", len(missing))
        extra = rois_from_contours(missing, params.expand, bounds, merge=False)
        grid_rois = list(grid_rois) + extra
        if params.merge:
            grid_rois = merge_rois(grid_rois, params.merge_iou)
    rois = [roi.scale(bin_cfg.n, bin_cfg.m) for roi in grid_rois]
    LOGGER.debug("Pre-filter: %d contours -> %d ROIs", len(contours), len(rois))
    return rois


__all__ = [
    "PrefilterParams",
    "SOBEL_MAX_MAGNITUDE",
    "gaussian_kernel",
    "gaussian_blur",
    "sobel_gradients",
    "edge_thin_binarize",
    "find_contours",
    "bounding_rect",
    "merge_rois",
    "rois_from_contours",
    "pattern_to_rois",
]
