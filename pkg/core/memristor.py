"""Behavioral model of the SDC memristor array that stores the motion pattern.

Each device keeps a bounded internal state ``s`` in ``[0, 1]`` (0 = fully
high-resistance, 1 = fully low-resistance).  Positive modulation pulses drive
the state exponentially towards the low-resistance rail, negative pulses
towards the high-resistance rail; nothing changes without a pulse.  The
``MemristorArray`` owns one device per sensory unit and is stepped once per
frame; the thresholded states form the binary motion-pattern layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.errors import DimensionMismatchError, InvalidDriveError
from core.frame_io import read_pgm, write_pgm
from core.sensor import BinConfig, ModulationConfig, bin_frame, modulate, sensory_voltage
from core.types import LumaFrame, MotionPattern

LOGGER = logging.getLogger(__name__)


class MemristorParams(BaseModel):
    """Device constants of the rate-based two-rail model."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha_set: float = Field(20.0, gt=0.0, description="Set rate, 1/(V*s).")
    alpha_reset: float = Field(20.0, gt=0.0, description="Reset rate, 1/(V*s).")
    g_on: float = Field(1e-4, gt=0.0, description="Low-resistance conductance, S.")
    g_off: float = Field(1e-6, gt=0.0, description="High-resistance conductance, S.")
    read_threshold: float = Field(0.5, gt=0.0, lt=1.0)
    pulse_width: float = Field(1.0, gt=0.0, description="Seconds; one frame time by default.")

    @model_validator(mode="after")
    def _check_conductances(self) -> "MemristorParams":
        if not self.g_on > self.g_off:
            raise ValueError(f"g_on ({self.g_on}) must exceed g_off ({self.g_off})")
        return self


def apply_pulse(s: Union[float, np.ndarray], v: Union[float, np.ndarray], params: MemristorParams):
    """Return the state after one pulse of ``v`` volts; works on scalars and arrays."""
    v_arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v_arr)):
        raise InvalidDriveError("Drive voltage must be finite")
    s_arr = np.asarray(s, dtype=np.float64)

    rate = np.where(
        v_arr > 0,
        params.alpha_set * v_arr * params.pulse_width * (1.0 - s_arr),
        params.alpha_reset * v_arr * params.pulse_width * s_arr,
    )
    updated = np.clip(s_arr + rate, 0.0, 1.0)
    if updated.ndim == 0:
        return float(updated)
    return updated


def device_current(s: Union[float, np.ndarray], v: Union[float, np.ndarray], params: MemristorParams):
    """Ohmic read-out current ``(g_off + s (g_on - g_off)) * v``."""
    conductance = params.g_off + np.asarray(s, dtype=np.float64) * (params.g_on - params.g_off)
    current = conductance * np.asarray(v, dtype=np.float64)
    if np.ndim(current) == 0:
        return float(current)
    return current


def reset_frames(params: MemristorParams, s_hi: float, v_static: float) -> int:
    """Static frames needed for a cell at ``s_hi`` to read 0 again under drive ``v_static``."""
    if s_hi < params.read_threshold:
        return 0
    decay = params.alpha_reset * abs(v_static) * params.pulse_width
    if decay <= 0:
        raise InvalidDriveError("A static frame must apply a non-zero reset drive")
    return max(1, math.ceil(math.log(s_hi / params.read_threshold) / decay))


def pulse_train(params: MemristorParams, s0: float, voltage: float, count: int) -> List[float]:
    """States after each of ``count`` identical pulses, starting from ``s0``."""
    states = []
    state = s0
    for _ in range(count):
        state = apply_pulse(state, voltage, params)
        states.append(state)
    return states


def hysteresis_sweep(
    params: MemristorParams,
    amplitude: float = 0.5,
    frequency: float = 1.0,
    samples_per_cycle: int = 400,
    cycles: int = 2,
    s0: float = 0.0,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Drive one device with a sine wave and record ``(t, v, i, s)``."""
    dt = 1.0 / (frequency * samples_per_cycle)
    sample_params = params.model_copy(update={"pulse_width": dt})
    t = np.arange(samples_per_cycle * cycles + 1) * dt
    v = amplitude * np.sin(2.0 * np.pi * frequency * t)
    i = np.empty_like(v)
    s = np.empty_like(v)
    state = s0
    for k, voltage in enumerate(v):
        s[k] = state
        i[k] = device_current(state, voltage, sample_params)
        state = apply_pulse(state, voltage, sample_params)
    return t, v, i, s


def loop_area(v: np.ndarray, i: np.ndarray) -> float:
    """Total area enclosed by the lobes of an i-v trace (one lobe per same-sign voltage run)."""
    v = np.asarray(v, dtype=np.float64)
    i = np.asarray(i, dtype=np.float64)
    signs = np.sign(v)
    bounds = [0]
    current = 0.0
    for k, sign in enumerate(signs):
        if sign == 0:
            continue
        if current and sign != current:
            bounds.append(k - 1)
        current = sign
    bounds.append(len(v) - 1)

    area = 0.0
    for start, stop in zip(bounds[:-1], bounds[1:]):
        vs, cs = v[start : stop + 1], i[start : stop + 1]
        if len(vs) > 1:
            area += abs(float(np.sum(0.5 * (cs[1:] + cs[:-1]) * np.diff(vs))))
    return area


@dataclass
class MemristorArray:
    """Grid of device states, one per sensory unit."""

    rows: int
    cols: int
    params: MemristorParams = field(default_factory=MemristorParams)
    state: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.state is None:
            self.state = np.zeros((self.rows, self.cols), dtype=np.float64)
        else:
            self.state = np.clip(np.asarray(self.state, dtype=np.float64), 0.0, 1.0)
        if self.state.shape != (self.rows, self.cols):
            raise DimensionMismatchError(
                f"State shape {self.state.shape} does not match array {self.rows}x{self.cols}"
            )

    @classmethod
    def for_frame(cls, width: int, height: int, bin_cfg: BinConfig, params: Optional[MemristorParams] = None) -> "MemristorArray":
        rows, cols = bin_cfg.grid_shape(width, height)
        return cls(rows=rows, cols=cols, params=params or MemristorParams())

    def apply(self, pulses: np.ndarray) -> None:
        """Apply one pulse per cell."""
        if pulses.shape != self.state.shape:
            raise DimensionMismatchError(f"Pulse grid {pulses.shape} does not match array {self.state.shape}")
        self.state = apply_pulse(self.state, pulses, self.params)


def read_pattern(array: MemristorArray) -> MotionPattern:
    """Threshold the device states: 1 where ``s >= read_threshold``."""
    return MotionPattern((array.state >= array.params.read_threshold).astype(np.uint8))


def step_frame(
    array: MemristorArray,
    prev_frame: LumaFrame,
    curr_frame: LumaFrame,
    bin_cfg: BinConfig,
    mod_cfg: ModulationConfig,
) -> Tuple[MemristorArray, MotionPattern]:
    """Advance the array by one frame interval and read its motion pattern.

    The array is updated in place and returned for convenience; callers own
    the single-writer discipline.
    """
    if prev_frame.shape != curr_frame.shape:
        raise DimensionMismatchError(f"Frames {prev_frame.shape} and {curr_frame.shape} differ")
    grid_shape = bin_cfg.grid_shape(curr_frame.width, curr_frame.height)
    if grid_shape != (array.rows, array.cols):
        raise DimensionMismatchError(
            f"Frame {curr_frame.width}x{curr_frame.height} maps to a {grid_shape} grid, array is {array.rows}x{array.cols}"
        )
    vhat = sensory_voltage(bin_frame(prev_frame, bin_cfg), bin_frame(curr_frame, bin_cfg), bin_cfg)
    array.apply(modulate(vhat, mod_cfg))
    pattern = read_pattern(array)
    LOGGER.debug("Memristor step: %d of %d cells active", pattern.active_count(), pattern.bits.size)
    return array, pattern


def dump_state(array: MemristorArray, path: Union[str, Path]) -> None:
    """Store the array state as a PGM with ``s`` quantized to 0-255."""
    write_pgm(LumaFrame(np.rint(array.state * 255.0).astype(np.uint8)), path)


def load_state(path: Union[str, Path], params: Optional[MemristorParams] = None) -> MemristorArray:
    frame = read_pgm(path)
    return MemristorArray(
        rows=frame.height,
        cols=frame.width,
        params=params or MemristorParams(),
        state=frame.data.astype(np.float64) / 255.0,
    )


__all__ = [
    "MemristorParams",
    "MemristorArray",
    "apply_pulse",
    "device_current",
    "reset_frames",
    "pulse_train",
    "hysteresis_sweep",
    "loop_area",
    "read_pattern",
    "step_frame",
    "dump_state",
    "load_state",
]
