"""Deterministic synthetic scenes with exact ground truth.

A scene is a value-noise background, optionally drifting, with textured
sprites composited on top.  Sprites translate by a per-frame displacement;
fractional positions are splatted bilinearly.  Ground truth per frame is the
union object mask, one box per sprite and the dense flow towards the next
frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import DataError, FrameWriteError, SceneBoundsError
from core.frame_io import load_sequence, read_flo, read_mask, write_flo, write_mask, write_sequence
from core.types import FlowField, LumaFrame, RoiRect

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]
Vector = Tuple[float, float]

_MASK64 = (1 << 64) - 1
_MIX_X = np.uint64(0x9E3779B97F4A7C15)
_MIX_Y = np.uint64(0xC2B2AE3D27D4EB4F)
_FINAL_1 = np.uint64(0xBF58476D1CE4E5B9)
_FINAL_2 = np.uint64(0x94D049BB133111EB)
_SEED_MIX = 0x165667B19E3779F9


class SpriteSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    shape: Literal["rect", "disk"] = "rect"
    x: float = Field(..., description="Left edge at frame 0, px.")
    y: float = Field(..., description="Top edge at frame 0, px.")
    width: int = Field(..., ge=1)
    height: int = Field(..., ge=1)
    texture_seed: int = 1
    texture_scale: float = Field(6.0, gt=0.0)
    low: float = Field(150.0, ge=0.0, le=255.0)
    high: float = Field(255.0, ge=0.0, le=255.0)
    velocity: Vector = (0.0, 0.0)
    trajectory: Optional[List[Vector]] = Field(
        None, description="Per-frame displacement (dx, dy); overrides velocity."
    )

    def displacement(self, t: int) -> Vector:
        if self.trajectory is not None:
            return tuple(self.trajectory[t])  # type: ignore[return-value]
        return tuple(self.velocity)  # type: ignore[return-value]

    def position(self, t: int) -> Vector:
        x, y = self.x, self.y
        for k in range(t):
            dx, dy = self.displacement(k)
            x += dx
            y += dy
        return x, y


class BackgroundSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    texture_seed: int = 0
    scale: float = Field(8.0, gt=0.0)
    low: float = Field(0.0, ge=0.0, le=255.0)
    high: float = Field(90.0, ge=0.0, le=255.0)
    drift: Vector = (0.0, 0.0)


class SceneSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    width: int = Field(640, ge=8)
    height: int = Field(360, ge=8)
    frames: int = Field(8, ge=1)
    seed: int = Field(0, ge=0)
    background: BackgroundSpec = Field(default_factory=BackgroundSpec)
    sprites: List[SpriteSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_trajectories(self) -> "SceneSpec":
        for index, sprite in enumerate(self.sprites):
            if sprite.trajectory is not None and len(sprite.trajectory) < self.frames - 1:
                raise ValueError(
                    f"sprite #{index} trajectory has {len(sprite.trajectory)} steps, scene needs {self.frames - 1}"
                )
        return self


@dataclass
class Scene:
    """Rendered frames plus ground truth; ``flows[t]`` maps frame ``t`` onto ``t + 1``."""

    spec: Optional[SceneSpec]
    frames: List[LumaFrame]
    masks: List[np.ndarray]
    boxes: List[List[RoiRect]]
    flows: List[FlowField] = field(default_factory=list)


def _mix_seed(*parts: int) -> int:
    value = 0
    for part in parts:
        value = ((value ^ (part & _MASK64)) * _SEED_MIX + 0x9E3779B97F4A7C15) & _MASK64
    return value


def _lattice(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Uniform ``[0, 1)`` value per integer lattice point, independent of evaluation range."""
    z = ix.astype(np.int64).astype(np.uint64) * _MIX_X
    z ^= iy.astype(np.int64).astype(np.uint64) * _MIX_Y
    z ^= np.uint64(seed & _MASK64)
    z = (z ^ (z >> np.uint64(30))) * _FINAL_1
    z = (z ^ (z >> np.uint64(27))) * _FINAL_2
    z ^= z >> np.uint64(31)
    return (z >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def value_noise(
    height: int,
    width: int,
    seed: int,
    scale: float = 8.0,
    low: float = 0.0,
    high: float = 255.0,
    offset: Vector = (0.0, 0.0),
) -> np.ndarray:
    """Smoothstep-interpolated lattice noise sampled at ``((x + ox) / scale, (y + oy) / scale)``."""
    xs = (np.arange(width, dtype=np.float64) + offset[0]) / scale
    ys = (np.arange(height, dtype=np.float64) + offset[1]) / scale
    gx, gy = np.meshgrid(xs, ys)
    x0 = np.floor(gx)
    y0 = np.floor(gy)
    tx = gx - x0
    ty = gy - y0
    sx = tx * tx * (3.0 - 2.0 * tx)
    sy = ty * ty * (3.0 - 2.0 * ty)
    ix = x0.astype(np.int64)
    iy = y0.astype(np.int64)

    v00 = _lattice(ix, iy, seed)
    v10 = _lattice(ix + 1, iy, seed)
    v01 = _lattice(ix, iy + 1, seed)
    v11 = _lattice(ix + 1, iy + 1, seed)
    top = v00 + sx * (v10 - v00)
    bottom = v01 + sx * (v11 - v01)
    return low + (high - low) * (top + sy * (bottom - top))


def _sprite_alpha(sprite: SpriteSpec) -> np.ndarray:
    if sprite.shape == "rect":
        return np.ones((sprite.height, sprite.width), dtype=np.float64)
    rows, cols = np.mgrid[0 : sprite.height, 0 : sprite.width].astype(np.float64)
    cy, cx = (sprite.height - 1) / 2.0, (sprite.width - 1) / 2.0
    radius = min(sprite.width, sprite.height) / 2.0
    return (((rows - cy) ** 2 + (cols - cx) ** 2) <= radius * radius).astype(np.float64)


def _splat(
    coverage: np.ndarray, premultiplied: np.ndarray, alpha: np.ndarray, texture: np.ndarray, x: float, y: float
) -> None:
    """Accumulate a sprite placed at fractional ``(x, y)`` with bilinear weights."""
    height, width = coverage.shape
    ix, iy = math.floor(x), math.floor(y)
    fx, fy = x - ix, y - iy
    h, w = alpha.shape
    for dy, dx, weight in (
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (0, 1, fx * (1.0 - fy)),
        (1, 0, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ):
        if weight <= 0.0:
            continue
        top, left = iy + dy, ix + dx
        r0, r1 = max(0, top), min(height, top + h)
        c0, c1 = max(0, left), min(width, left + w)
        if r0 >= r1 or c0 >= c1:
            continue
        src = (slice(r0 - top, r1 - top), slice(c0 - left, c1 - left))
        coverage[r0:r1, c0:c1] += weight * alpha[src]
        premultiplied[r0:r1, c0:c1] += weight * alpha[src] * texture[src]


def _check_bounds(spec: SceneSpec) -> None:
    for index, sprite in enumerate(spec.sprites):
        for t in range(spec.frames):
            x, y = sprite.position(t)
            left, top = math.floor(x), math.floor(y)
            right = math.ceil(x) + sprite.width
            bottom = math.ceil(y) + sprite.height
            if left < 1 or top < 1 or right > spec.width - 1 or bottom > spec.height - 1:
                raise SceneBoundsError(
                    f"Sprite #{index} at ({x:.2f}, {y:.2f}) in frame {t} is not 1 px inside "
                    f"the {spec.width}x{spec.height} scene"
                )


def _mask_box(mask: np.ndarray) -> Optional[RoiRect]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        return None
    return RoiRect(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def gen_scene(spec: SceneSpec) -> Scene:
    """Render all frames of ``spec`` together with masks, boxes and flow."""
    _check_bounds(spec)
    bg = spec.background
    bg_seed = _mix_seed(spec.seed, bg.texture_seed)
    textures = [
        value_noise(
            sprite.height,
            sprite.width,
            _mix_seed(spec.seed, sprite.texture_seed, index + 1),
            sprite.texture_scale,
            sprite.low,
            sprite.high,
        )
        for index, sprite in enumerate(spec.sprites)
    ]
    alphas = [_sprite_alpha(sprite) for sprite in spec.sprites]

    frames: List[LumaFrame] = []
    masks: List[np.ndarray] = []
    boxes: List[List[RoiRect]] = []
    sprite_masks: List[List[np.ndarray]] = []
    for t in range(spec.frames):
        offset = (-bg.drift[0] * t, -bg.drift[1] * t)
        canvas = value_noise(spec.height, spec.width, bg_seed, bg.scale, bg.low, bg.high, offset)
        union = np.zeros((spec.height, spec.width), dtype=bool)
        frame_boxes: List[RoiRect] = []
        frame_masks: List[np.ndarray] = []
        for sprite, alpha, texture in zip(spec.sprites, alphas, textures):
            coverage = np.zeros_like(canvas)
            premultiplied = np.zeros_like(canvas)
            x, y = sprite.position(t)
            _splat(coverage, premultiplied, alpha, texture, x, y)
            coverage = np.minimum(coverage, 1.0)
            canvas = canvas * (1.0 - coverage) + premultiplied
            sprite_mask = coverage >= 0.5
            frame_masks.append(sprite_mask)
            union |= sprite_mask
            box = _mask_box(sprite_mask)
            if box is not None:
                frame_boxes.append(box)
        frames.append(LumaFrame(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8)))
        masks.append(union.astype(np.uint8))
        boxes.append(frame_boxes)
        sprite_masks.append(frame_masks)

    flows: List[FlowField] = []
    for t in range(spec.frames - 1):
        u = np.full((spec.height, spec.width), bg.drift[0], dtype=np.float32)
        v = np.full((spec.height, spec.width), bg.drift[1], dtype=np.float32)
        for sprite, sprite_mask in zip(spec.sprites, sprite_masks[t]):
            dx, dy = sprite.displacement(t)
            u[sprite_mask] = dx
            v[sprite_mask] = dy
        flows.append(FlowField(u, v))

    LOGGER.info("Generated scene %dx%d with %d frames and %d sprites", spec.width, spec.height, spec.frames, len(spec.sprites))
    return Scene(spec=spec, frames=frames, masks=masks, boxes=boxes, flows=flows)


def enter_leave_spec(
    cell: Tuple[int, int] = (4, 6),
    enter_frame: int = 4,
    leave_frame: int = 10,
    frames: int = 16,
    cell_size: int = 20,
    width: int = 200,
    height: int = 160,
    park_cell: Tuple[int, int] = (1, 1),
    seed: int = 0,
) -> SceneSpec:
    """Bright sprite parked in ``park_cell`` that jumps into ``cell`` (row, col), rests, and leaves.

    The sprite covers exactly one ``cell_size`` square, so the target unit sees
    the full intensity jump on entry and on exit and nothing while it rests.
    """
    if not 0 < enter_frame < leave_frame < frames:
        raise DataError(f"Need 0 < enter_frame < leave_frame < frames, got {enter_frame}, {leave_frame}, {frames}")
    if cell == park_cell:
        raise DataError("The parking cell must differ from the target cell")
    park = (float(park_cell[1] * cell_size), float(park_cell[0] * cell_size))
    target = (float(cell[1] * cell_size), float(cell[0] * cell_size))

    def position(t: int) -> Vector:
        return target if enter_frame <= t < leave_frame else park

    trajectory = []
    for t in range(frames - 1):
        a, b = position(t), position(t + 1)
        trajectory.append((b[0] - a[0], b[1] - a[1]))
    sprite = SpriteSpec(
        x=park[0],
        y=park[1],
        width=cell_size,
        height=cell_size,
        texture_seed=7,
        low=200.0,
        high=255.0,
        trajectory=trajectory,
    )
    return SceneSpec(width=width, height=height, frames=frames, seed=seed, sprites=[sprite])


def write_scene(scene: Scene, out_dir: PathLike) -> Path:
    """Write ``frames/``, ``gt_masks/``, ``gt_flow/`` and ``gt_boxes.txt`` under ``out_dir``."""
    root = Path(out_dir)
    for sub in ("frames", "gt_masks", "gt_flow"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    write_sequence(scene.frames, root / "frames", prefix="f")
    for t, mask in enumerate(scene.masks):
        write_mask(mask, root / "gt_masks" / f"m{t:04d}.pgm")
    for t, flow in enumerate(scene.flows):
        write_flo(flow, root / "gt_flow" / f"g{t:04d}.flo")
    lines = [f"{t} {box.x} {box.y} {box.w} {box.h}\n" for t, frame_boxes in enumerate(scene.boxes) for box in frame_boxes]
    try:
        (root / "gt_boxes.txt").write_text("".join(lines), encoding="ascii")
    except OSError as exc:
        raise FrameWriteError(f"Cannot write {root / 'gt_boxes.txt'}: {exc}") from exc
    LOGGER.info("Scene written to %s", root)
    return root


def is_scene_dir(path: PathLike) -> bool:
    return (Path(path) / "frames").is_dir()


def load_scene(directory: PathLike) -> Scene:
    """Read a directory written by :func:`write_scene`; missing ground truth stays empty."""
    root = Path(directory)
    frames = load_sequence(root / "frames")
    masks = [read_mask(path) for path in sorted((root / "gt_masks").glob("m*.pgm"))] if (root / "gt_masks").is_dir() else []
    flows = [read_flo(path) for path in sorted((root / "gt_flow").glob("g*.flo"))] if (root / "gt_flow").is_dir() else []
    boxes: List[List[RoiRect]] = [[] for _ in frames]
    box_file = root / "gt_boxes.txt"
    if box_file.exists():
        for line_no, line in enumerate(box_file.read_text(encoding="ascii").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 5:
                raise DataError(f"{box_file}:{line_no}: expected 'frame x y w h', got {line!r}")
            t, x, y, w, h = (int(part) for part in parts)
            if 0 <= t < len(boxes):
                boxes[t].append(RoiRect(x, y, w, h))
    return Scene(spec=None, frames=frames, masks=masks, boxes=boxes, flows=flows)


def scene_from_frames(frames: Sequence[LumaFrame]) -> Scene:
    return Scene(spec=None, frames=list(frames), masks=[], boxes=[[] for _ in frames], flows=[])


__all__ = [
    "SceneSpec",
    "SpriteSpec",
    "BackgroundSpec",
    "Scene",
    "value_noise",
    "gen_scene",
    "enter_leave_spec",
    "write_scene",
    "load_scene",
    "is_scene_dir",
    "scene_from_frames",
]
