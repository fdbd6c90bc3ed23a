"""Shared fixtures and stubs for the test suite."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Tuple
import sys

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from backends.base import BaseFlowBackend  # noqa: E402
from core.scenes import BackgroundSpec, SceneSpec, SpriteSpec, gen_scene, value_noise  # noqa: E402
from core.sensor import ModulationConfig  # noqa: E402
from core.types import FlowField, LumaFrame  # noqa: E402


@dataclass
class StubFlowBackend(BaseFlowBackend):
    """Deterministic stand-in for a flow backend: constant ``(du, dv)`` everywhere."""

    du: float = 1.0
    dv: float = -0.5
    radius: int = 0
    align: int = 1
    fail_on_call: int = -1
    calls: List[Tuple[int, int]] = field(default_factory=list)

    name = "stub"

    @property
    def window_radius(self) -> int:
        return self.radius

    @property
    def alignment(self) -> int:
        return self.align

    def _estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        self.calls.append(prev.shape)
        if len(self.calls) - 1 == self.fail_on_call:
            raise RuntimeError("stub backend failure")
        height, width = prev.shape
        return FlowField(np.full((height, width), self.du), np.full((height, width), self.dv))


def noise_frame(height: int, width: int, seed: int = 0, scale: float = 4.0, offset=(0.0, 0.0)) -> LumaFrame:
    """Smooth seeded texture quantized to 8 bit."""
    data = value_noise(height, width, seed, scale, 0.0, 255.0, offset)
    return LumaFrame(np.floor(data + 0.5).astype(np.uint8))


def shifted_pair(height: int, width: int, dx: float, dy: float, seed: int = 0, scale: float = 4.0):
    """Frames whose content moves by ``(dx, dy)`` from the first to the second."""
    return noise_frame(height, width, seed, scale), noise_frame(height, width, seed, scale, offset=(-dx, -dy))


SENSITIVE_MODULATION: Dict[str, Any] = {"v_up": 0.02, "bia1": 0.0, "bia2": 0.05}


def sprite_scene_spec(width: int = 640, height: int = 360, frames: int = 4, velocity=(4.0, 0.0)) -> SceneSpec:
    return SceneSpec(
        width=width,
        height=height,
        frames=frames,
        seed=0,
        background=BackgroundSpec(texture_seed=0, scale=8.0, low=0.0, high=90.0),
        sprites=[
            SpriteSpec(x=120.0, y=100.0, width=160, height=160, low=150.0, high=255.0, velocity=velocity),
        ],
    )


@pytest.fixture()
def flow_backend_stub() -> StubFlowBackend:
    """Provide a fresh flow backend stub for each test."""

    return StubFlowBackend()


@pytest.fixture()
def sensitive_modulation() -> ModulationConfig:
    return ModulationConfig(**SENSITIVE_MODULATION)


@pytest.fixture(scope="session")
def sprite_scene():
    return gen_scene(sprite_scene_spec())


@pytest.fixture()
def stub_flow_program(tmp_path: Path) -> Dict[str, Any]:
    """A small external program that copies a fixture ``.flo`` to its output path."""

    from core.frame_io import write_flo

    fixture = FlowField(
        np.arange(12, dtype=np.float32).reshape(3, 4) / 4.0,
        -np.arange(12, dtype=np.float32).reshape(3, 4) / 8.0,
    )
    fixture_path = tmp_path / "fixture.flo"
    write_flo(fixture, fixture_path)
    script = tmp_path / "stub_flow.py"
    script.write_text(
        "import shutil, sys\n"
        "prev, curr, out = sys.argv[1:4]\n"
        f"shutil.copyfile({str(fixture_path)!r}, out)\n",
        encoding="utf-8",
    )
    failing = tmp_path / "failing_flow.py"
    failing.write_text("import sys\nsys.stderr.write('no flow today')\nsys.exit(3)\n", encoding="utf-8")
    silent = tmp_path / "silent_flow.py"
    silent.write_text("import sys\n", encoding="utf-8")
    python = sys.executable
    return {
        "fixture": fixture,
        "command": f'"{python}" "{script}" {{prev}} {{curr}} {{out}}',
        "failing": f'"{python}" "{failing}" {{prev}} {{curr}} {{out}}',
        "silent": f'"{python}" "{silent}" {{prev}} {{curr}} {{out}}',
    }
