"""Farnebäck dense flow: quadratic polynomial expansion with coarse-to-fine refinement.

Every pixel neighbourhood is approximated by ``f(x) ~ x^T A x + b^T x + c``
through a Gaussian-weighted least-squares fit.  A displacement ``d`` turns
``b`` into ``b - 2 A d``, so the flow follows from the change of the linear
coefficients; the per-pixel constraints are averaged over a Gaussian window
and refined over several iterations on every level of a Gaussian pyramid.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional, Tuple, Union
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import ndimage

from backends.base import BaseFlowBackend
from core.errors import ConfigError, ImageTooSmallError
from core.prefilter import gaussian_blur
from core.types import FlowField, LumaFrame, require_same_shape

LOGGER = logging.getLogger(__name__)

REGULARIZATION = 1e-3
_EPSILON = 1e-9


class FarnebackParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    pyramid_levels: int = Field(3, ge=1)
    pyramid_scale: float = Field(0.5, gt=0.0, lt=1.0)
    window_sigma: float = Field(7.5, gt=0.0)
    iterations: int = Field(3, ge=1)
    poly_n: int = Field(7, ge=3)
    poly_sigma: float = Field(1.5, gt=0.0)

    @field_validator("poly_n")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"poly_n must be odd, got {value}")
        return value


@dataclass(frozen=True)
class PolyExpansion:
    """Per-pixel quadratic coefficients; ``A = [[a11, a12], [a12, a22]]``, ``b = (b1, b2)`` in ``(x, y)`` order."""

    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    c: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return np.stack(
            [np.stack([self.a11, self.a12], axis=-1), np.stack([self.a12, self.a22], axis=-1)], axis=-2
        )


@lru_cache(maxsize=16)
def _expansion_kernels(poly_n: int, poly_sigma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """1D kernels ``g``, ``x g``, ``x^2 g`` and the inverse of the weighted basis Gram matrix."""
    radius = poly_n // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * poly_sigma * poly_sigma))
    xs, ys = np.meshgrid(x, x)
    weights = np.outer(g, g)
    basis = np.stack([np.ones_like(xs), xs, ys, xs * xs, ys * ys, xs * ys])
    gram = np.einsum("kij,lij,ij->kl", basis, basis, weights)
    return g, x * g, x * x * g, np.linalg.inv(gram)


def poly_expansion(
    frame: Union[LumaFrame, np.ndarray], poly_n: int = 7, poly_sigma: float = 1.5
) -> PolyExpansion:
    """Weighted least-squares quadratic fit over a ``poly_n x poly_n`` window at every pixel."""
    if poly_n < 3 or poly_n % 2 == 0:
        raise ConfigError(f"poly_n must be odd and at least 3, got {poly_n}")
    img = np.asarray(frame.data if isinstance(frame, LumaFrame) else frame, dtype=np.float64)
    if img.shape[0] < poly_n or img.shape[1] < poly_n:
        raise ImageTooSmallError(f"Image {img.shape} is smaller than the {poly_n}x{poly_n} expansion window")

    g, xg, xxg, gram_inv = _expansion_kernels(poly_n, float(poly_sigma))

    def along_x(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
        return ndimage.correlate1d(data, kernel, axis=1, mode="nearest")

    def along_y(data: np.ndarray, kernel: np.ndarray) -> np.ndarray:
        return ndimage.correlate1d(data, kernel, axis=0, mode="nearest")

    fx0, fx1, fx2 = along_x(img, g), along_x(img, xg), along_x(img, xxg)
    projections = np.stack(
        [
            along_y(fx0, g),
            along_y(fx1, g),
            along_y(fx0, xg),
            along_y(fx2, g),
            along_y(fx0, xxg),
            along_y(fx1, xg),
        ],
        axis=-1,
    )
    coeffs = projections @ gram_inv.T
    c, b1, b2, a11, a22, axy = (coeffs[..., k] for k in range(6))
    return PolyExpansion(a11=a11, a12=0.5 * axy, a22=a22, b1=b1, b2=b2, c=c)


def _level_shape(shape: Tuple[int, int], scale: float) -> Tuple[int, int]:
    return tuple(int(math.floor((size - 1) * scale + 1e-9)) + 1 for size in shape)  # type: ignore[return-value]


def _downsample(img: np.ndarray, scale: float) -> np.ndarray:
    smoothed = gaussian_blur(img, (1.0 / scale - 1.0) * 0.5)
    rows, cols = _level_shape(img.shape, scale)
    step = 1.0 / scale
    if abs(step - round(step)) < 1e-9:
        stride = int(round(step))
        return smoothed[::stride, ::stride][:rows, :cols].copy()
    grid = np.meshgrid(np.arange(rows) * step, np.arange(cols) * step, indexing="ij")
    return ndimage.map_coordinates(smoothed, grid, order=1, mode="nearest")


def _upsample_flow(u: np.ndarray, v: np.ndarray, shape: Tuple[int, int], scale: float) -> Tuple[np.ndarray, np.ndarray]:
    grid = np.meshgrid(np.arange(shape[0]) * scale, np.arange(shape[1]) * scale, indexing="ij")
    up_u = ndimage.map_coordinates(u, grid, order=1, mode="nearest") / scale
    up_v = ndimage.map_coordinates(v, grid, order=1, mode="nearest") / scale
    return up_u, up_v


def _build_pyramid(img: np.ndarray, params: FarnebackParams) -> List[np.ndarray]:
    levels = [img]
    while len(levels) < params.pyramid_levels:
        shape = _level_shape(levels[-1].shape, params.pyramid_scale)
        if min(shape) < params.poly_n:
            break
        levels.append(_downsample(levels[-1], params.pyramid_scale))
    return levels


def _refine(
    first: PolyExpansion,
    second: PolyExpansion,
    u: np.ndarray,
    v: np.ndarray,
    params: FarnebackParams,
) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = u.shape
    ys, xs = np.mgrid[0:rows, 0:cols].astype(np.float64)
    for _ in range(params.iterations):
        coords = [ys + v, xs + u]

        def warp(layer: np.ndarray) -> np.ndarray:
            return ndimage.map_coordinates(layer, coords, order=1, mode="nearest")

        a11 = 0.5 * (first.a11 + warp(second.a11))
        a12 = 0.5 * (first.a12 + warp(second.a12))
        a22 = 0.5 * (first.a22 + warp(second.a22))
        db1 = -0.5 * (warp(second.b1) - first.b1) + a11 * u + a12 * v
        db2 = -0.5 * (warp(second.b2) - first.b2) + a12 * u + a22 * v

        # Normal equations of the windowed least-squares problem A d = db.
        g11 = gaussian_blur(a11 * a11 + a12 * a12, params.window_sigma)
        g12 = gaussian_blur(a12 * (a11 + a22), params.window_sigma)
        g22 = gaussian_blur(a12 * a12 + a22 * a22, params.window_sigma)
        h1 = gaussian_blur(a11 * db1 + a12 * db2, params.window_sigma)
        h2 = gaussian_blur(a12 * db1 + a22 * db2, params.window_sigma)

        lam = REGULARIZATION * (g11 + g22) + _EPSILON
        g11 = g11 + lam
        g22 = g22 + lam
        det = g11 * g22 - g12 * g12
        u = (g22 * h1 - g12 * h2) / det
        v = (g11 * h2 - g12 * h1) / det
    return u, v


def farneback_flow(
    prev: LumaFrame, curr: LumaFrame, params: Optional[FarnebackParams] = None
) -> FlowField:
    """Dense flow from ``prev`` to ``curr``; ``(u, v)`` lives on the pixel grid of ``prev``."""
    params = params or FarnebackParams()
    require_same_shape(prev.shape, curr.shape, "farneback frames")
    if min(prev.shape) < params.poly_n:
        raise ImageTooSmallError(f"Frames {prev.shape} are smaller than the {params.poly_n}px expansion window")

    pyramid_prev = _build_pyramid(prev.data.astype(np.float64), params)
    pyramid_curr = _build_pyramid(curr.data.astype(np.float64), params)

    u = v = None
    for level in range(len(pyramid_prev) - 1, -1, -1):
        img_prev, img_curr = pyramid_prev[level], pyramid_curr[level]
        if u is None:
            u = np.zeros(img_prev.shape)
            v = np.zeros(img_prev.shape)
        else:
            u, v = _upsample_flow(u, v, img_prev.shape, params.pyramid_scale)
        first = poly_expansion(img_prev, params.poly_n, params.poly_sigma)
        second = poly_expansion(img_curr, params.poly_n, params.poly_sigma)
        u, v = _refine(first, second, u, v, params)
        LOGGER.debug("Farneback level %d (%dx%d) done", level, img_prev.shape[1], img_prev.shape[0])

    u = np.nan_to_num(u, nan=0.0, posinf=0.0, neginf=0.0)
    v = np.nan_to_num(v, nan=0.0, posinf=0.0, neginf=0.0)
    return FlowField(u, v)


class FarnebackBackend(BaseFlowBackend):
    """Built-in polynomial-expansion backend."""

    name = "farneback"

    def __init__(self, params: Optional[FarnebackParams] = None) -> None:
        self.params = params or FarnebackParams()

    @property
    def _level_factor(self) -> float:
        return (1.0 / self.params.pyramid_scale) ** (self.params.pyramid_levels - 1)

    @property
    def window_radius(self) -> int:
        base = math.ceil(3.0 * self.params.window_sigma) + self.params.poly_n // 2
        return int(math.ceil(base * self._level_factor))

    @property
    def alignment(self) -> int:
        step = 1.0 / self.params.pyramid_scale
        if abs(step - round(step)) > 1e-9:
            return 1
        return int(round(step)) ** (self.params.pyramid_levels - 1)

    def _estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        return farneback_flow(prev, curr, self.params)


__all__ = [
    "FarnebackParams",
    "FarnebackBackend",
    "PolyExpansion",
    "poly_expansion",
    "farneback_flow",
]
