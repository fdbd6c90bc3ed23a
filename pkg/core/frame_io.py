"""Readers and writers for frames, flow fields and detection outputs.

Frames are binary Netpbm P5 files with maxval 255; flow fields use the
Middlebury ``.flo`` layout (little-endian float32 magic 202021.25, int32 width
and height, then interleaved ``(u, v)`` float32 pairs in row-major order).
ROIs, boxes and masks get small text/PGM encodings for debugging and golden
tests.
"""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union
import logging
import re

import numpy as np

from core.errors import (
    BadMagicError,
    DataError,
    DimensionMismatchError,
    EmptySequenceError,
    FlowSizeError,
    FrameNotFoundError,
    FrameWriteError,
    InvalidFlowError,
    TruncatedPayloadError,
    UnsupportedFormatError,
    UnsupportedMaxvalError,
)
from core.types import FlowField, LumaFrame, RoiRect

LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLO_MAGIC = np.float32(202021.25)
_FLO_HEADER_BYTES = 12
_WHITESPACE = b" \t\r\n\v\f"
_INDEX_PATTERN = re.compile(r"(\d+)(?!.*\d)")


def _read_bytes(path: PathLike) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError as exc:
        raise FrameNotFoundError(f"File not found: {path}") from exc
    except IsADirectoryError as exc:
        raise FrameNotFoundError(f"Expected a file, got a directory: {path}") from exc


def _write_bytes(path: PathLike, payload: bytes) -> None:
    path = Path(path)
    try:
        path.write_bytes(payload)
    except OSError as exc:
        raise FrameWriteError(f"Cannot write {path}: {exc}") from exc


# ----------------------------------------------------------------------
# Netpbm
def _parse_netpbm_header(raw: bytes, magic: bytes, path: PathLike) -> Tuple[int, int, int]:
    """Return ``(width, height, payload_offset)`` of a binary Netpbm image."""
    if raw[:2] != magic:
        raise UnsupportedFormatError(f"{path}: expected magic {magic.decode()}, got {raw[:2]!r}")

    tokens: List[int] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(raw) and (raw[pos] in _WHITESPACE or raw[pos] == ord("#")):
            if raw[pos] == ord("#"):
                end = raw.find(b"\n", pos)
                pos = len(raw) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(raw) and raw[pos : pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise TruncatedPayloadError(f"{path}: incomplete header")
        tokens.append(int(raw[start:pos]))
    if pos >= len(raw) or raw[pos] not in _WHITESPACE:
        raise TruncatedPayloadError(f"{path}: missing separator after header")

    width, height, maxval = tokens
    if maxval != 255:
        raise UnsupportedMaxvalError(f"{path}: maxval {maxval} is not supported (expected 255)")
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid dimensions {width}x{height}")
    return width, height, pos + 1


def read_pgm(path: PathLike) -> LumaFrame:
    """Read a binary P5 PGM with maxval 255."""
    raw = _read_bytes(path)
    width, height, offset = _parse_netpbm_header(raw, b"P5", path)
    expected = width * height
    payload = raw[offset : offset + expected]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"{path}: payload has {len(payload)} bytes, header needs {expected}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return LumaFrame(data)


def encode_pgm(frame: LumaFrame) -> bytes:
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(frame.data, dtype=np.uint8).tobytes()


def write_pgm(frame: LumaFrame, path: PathLike) -> None:
    """Write ``frame`` as P5, maxval 255, no comments, single-byte separators."""
    _write_bytes(path, encode_pgm(frame))


def write_ppm(rgb: np.ndarray, path: PathLike) -> None:
    """Write an ``(height, width, 3)`` uint8 image as binary P6."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataError(f"Expected an RGB image, got shape {rgb.shape}")
    height, width = rgb.shape[:2]
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    _write_bytes(path, header + np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def write_mask(mask: np.ndarray, path: PathLike) -> None:
    """Write a binary mask as a PGM with values 0/255."""
    write_pgm(LumaFrame((np.asarray(mask) > 0).astype(np.uint8) * 255), path)


def read_mask(path: PathLike) -> np.ndarray:
    return (read_pgm(path).data > 127).astype(np.uint8)


# ----------------------------------------------------------------------
# Middlebury flow
def encode_flo(field: FlowField) -> bytes:
    header = np.array([FLO_MAGIC], dtype="<f4").tobytes()
    header += np.array([field.width, field.height], dtype="<i4").tobytes()
    payload = np.stack([field.u, field.v], axis=-1).astype("<f4").tobytes()
    return header + payload


def write_flo(field: FlowField, path: PathLike) -> None:
    _write_bytes(path, encode_flo(field))


def read_flo(path: PathLike) -> FlowField:
    raw = _read_bytes(path)
    if len(raw) < 4 or np.frombuffer(raw[:4], dtype="<f4")[0] != FLO_MAGIC:
        raise BadMagicError(f"{path}: not a Middlebury .flo file")
    if len(raw) < _FLO_HEADER_BYTES:
        raise FlowSizeError(f"{path}: header truncated")
    width, height = (int(value) for value in np.frombuffer(raw[4:12], dtype="<i4"))
    if width < 1 or height < 1:
        raise FlowSizeError(f"{path}: invalid dimensions {width}x{height}")
    expected = width * height * 2 * 4
    payload = raw[_FLO_HEADER_BYTES:]
    if len(payload) != expected:
        raise FlowSizeError(
            f"{path}: payload has {len(payload)} bytes, {width}x{height} header needs {expected}"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2).astype(np.float32)
    try:
        return FlowField(data[..., 0].copy(), data[..., 1].copy())
    except InvalidFlowError as exc:
        raise InvalidFlowError(f"{path}: {exc}") from exc


# ----------------------------------------------------------------------
# Sequences
def _frame_index(path: Path) -> int:
    match = _INDEX_PATTERN.search(path.stem)
    return int(match.group(1)) if match else -1


def load_sequence(directory: PathLike, pattern: str = "*.pgm") -> List[LumaFrame]:
    """Load every frame matching ``pattern`` sorted by the numeric part of its name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameNotFoundError(f"Frame directory {directory} does not exist")
    paths = sorted(directory.glob(pattern), key=lambda item: (_frame_index(item), item.name))
    if not paths:
        raise EmptySequenceError(f"No frames matching '{pattern}' in {directory}")

    frames = [read_pgm(path) for path in paths]
    first = frames[0].shape
    for path, frame in zip(paths, frames):
        if frame.shape != first:
            raise DimensionMismatchError(
                f"{path.name} is {frame.width}x{frame.height}, sequence started with {first[1]}x{first[0]}"
            )
    LOGGER.debug("Loaded %d frames of %dx%d from %s", len(frames), first[1], first[0], directory)
    return frames


def write_sequence(frames: Sequence[LumaFrame], directory: PathLike, prefix: str = "f") -> List[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for index, frame in enumerate(frames):
        path = directory / f"{prefix}{index:04d}.pgm"
        write_pgm(frame, path)
        paths.append(path)
    return paths


# ----------------------------------------------------------------------
# Text outputs
def format_rois(rois: Iterable[RoiRect]) -> str:
    return "".join(f"{roi.x} {roi.y} {roi.w} {roi.h}\n" for roi in rois)


def write_rois(rois: Iterable[RoiRect], path: PathLike) -> None:
    _write_bytes(path, format_rois(rois).encode("ascii"))


def read_rois(path: PathLike) -> List[RoiRect]:
    text = _read_bytes(path).decode("ascii")
    rois = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise DataError(f"{path}:{line_no}: expected 'x y w h', got {line!r}")
        rois.append(RoiRect(*(int(part) for part in parts)))
    return rois


def write_boxes(boxes: Iterable[object], path: PathLike) -> None:
    """Write track boxes (anything with ``rect`` and ``score``) as ``x y w h score`` lines."""
    lines = []
    for box in boxes:
        rect = box.rect  # type: ignore[attr-defined]
        lines.append(f"{rect.x} {rect.y} {rect.w} {rect.h} {box.score:.6f}\n")  # type: ignore[attr-defined]
    _write_bytes(path, "".join(lines).encode("ascii"))


__all__ = [
    "read_pgm",
    "write_pgm",
    "encode_pgm",
    "write_ppm",
    "write_mask",
    "read_mask",
    "read_flo",
    "write_flo",
    "encode_flo",
    "load_sequence",
    "write_sequence",
    "format_rois",
    "write_rois",
    "read_rois",
    "write_boxes",
]
