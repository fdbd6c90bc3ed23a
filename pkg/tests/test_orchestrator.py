from __future__ import annotations

import itertools
import json
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
import pytest

from backends.farneback import FarnebackBackend
from core.config_loader import build_pipeline_config, merge_configs
from core.errors import ConfigError, DataError, EmptySequenceError, FrameFlowError, RoiFlowError
from core.frame_io import read_flo, read_rois
from core.orchestrator import NeuroFlowOrchestrator, load_source, run_pipeline
from core.scenes import gen_scene, write_scene
from core.types import FlowField, LumaFrame, RoiRect
from tasks.base import BaseTask
from tests.conftest import SENSITIVE_MODULATION, StubFlowBackend, sprite_scene_spec


class RecordingTask(BaseTask):
    """Minimal task implementation that records the context of every pair."""

    metric_name = "roi_count"

    def __init__(self, *, config: Dict[str, Any]) -> None:
        super().__init__(config=config)
        self.calls: List[Dict[str, Any]] = []

    def run(self, context: Dict[str, Any]) -> int:
        self.calls.append(context)
        return len(context["rois"])

    def write(self, artifact: int, out_dir: Path, frame_index: int) -> Path:
        path = Path(out_dir) / "recording" / f"n{frame_index:04d}.txt"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(str(artifact), encoding="utf-8")
        return path


def _write_task_environment(base_dir: Path) -> Path:
    config_dir = base_dir / "task_config"
    config_dir.mkdir(parents=True, exist_ok=True)
    (config_dir / "recording.json").write_text(
        json.dumps({"name": "recording", "description": "Counts ROIs."}), encoding="utf-8"
    )
    return config_dir


def _config(**overrides: Any):
    base = {"mode": "neuromorphic", "modulation": SENSITIVE_MODULATION, "tasks": {"enabled": ["recording"]}}
    return build_pipeline_config(merge_configs(base, overrides))


def _step_clock():
    counter = itertools.count()
    return lambda: float(next(counter))


def _recording_orchestrator(tmp_path: Path, backend: StubFlowBackend, **overrides: Any) -> NeuroFlowOrchestrator:
    return NeuroFlowOrchestrator(
        _config(**overrides),
        backend=backend,
        task_registry={"recording": RecordingTask},
        task_config_dir=_write_task_environment(tmp_path),
        clock=_step_clock(),
    )


def test_outputs_start_at_the_second_frame(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    result = orchestrator.run(sprite_scene)

    assert [output.index for output in result.outputs] == [1, 2, 3]
    task = orchestrator.tasks["recording"]
    assert task.description == "Counts ROIs."
    assert len(task.calls) == 3
    assert task.calls[0]["curr_frame"] is sprite_scene.frames[1]
    assert task.calls[0]["prev_frame"] is sprite_scene.frames[0]
    for output in result.outputs:
        assert output.pattern is not None
        assert output.rois
        assert output.artifacts["recording"] == len(output.rois)
        assert output.scores["recording"] is None


def test_every_stage_is_timed(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    result = orchestrator.run(sprite_scene)

    for stage in ("sensor", "prefilter", "flow", "tensor", "recording"):
        assert result.stage_total(stage) == pytest.approx(3.0)
    assert result.report.roi_counts == [len(output.rois) for output in result.outputs]


def test_gated_flow_is_zero_outside_rois(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    output = orchestrator.run(sprite_scene).outputs[0]

    inside = np.zeros(output.tensor.flow.shape, dtype=bool)
    for roi in output.rois:
        inside[roi.slices()] = True
    assert np.all(output.tensor.u[inside] == 1.0)
    assert np.all(output.tensor.u[~inside] == 0.0)
    assert output.tensor.pattern.shape == (360, 640)


def test_static_scene_never_calls_the_backend(tmp_path: Path, flow_backend_stub: StubFlowBackend):
    scene = gen_scene(sprite_scene_spec(frames=3, velocity=(0.0, 0.0)))
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    result = orchestrator.run(scene)

    assert flow_backend_stub.calls == []
    for output in result.outputs:
        assert output.rois == []
        assert output.pattern.active_count() == 0
        assert output.tensor.flow == FlowField.zeros(360, 640)


def test_conventional_mode_uses_one_full_frame_roi(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub, mode="conventional")

    result = orchestrator.run(sprite_scene)

    assert result.mode == "conventional"
    assert flow_backend_stub.calls == [(360, 640)] * 3
    for output in result.outputs:
        assert output.rois == [RoiRect(0, 0, 640, 360)]
        assert output.pattern is None
        assert np.all(output.tensor.pattern == 1)
    assert result.report.timings["sensor"] == [0.0, 0.0, 0.0]
    assert result.report.timings["prefilter"] == [0.0, 0.0, 0.0]


def test_mode_argument_overrides_configuration(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    assert orchestrator.run(sprite_scene, mode="conventional").mode == "conventional"
    with pytest.raises(ConfigError):
        orchestrator.run(sprite_scene, mode="hybrid")  # type: ignore[arg-type]


def test_dense_backend_failure_names_the_frame(sprite_scene, tmp_path: Path):
    backend = StubFlowBackend(fail_on_call=1)
    orchestrator = _recording_orchestrator(tmp_path, backend, mode="conventional")

    with pytest.raises(FrameFlowError) as excinfo:
        orchestrator.run(sprite_scene)

    assert excinfo.value.frame_index == 2
    assert excinfo.value.exit_code == 3


def test_gated_backend_failure_names_frame_and_roi(sprite_scene, tmp_path: Path):
    backend = StubFlowBackend(fail_on_call=0)
    orchestrator = _recording_orchestrator(tmp_path, backend)

    with pytest.raises(FrameFlowError) as excinfo:
        orchestrator.run(sprite_scene)

    assert excinfo.value.frame_index == 1
    assert isinstance(excinfo.value.cause, RoiFlowError)
    assert excinfo.value.cause.roi_index == 0


def test_invalid_sequences_are_rejected(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    with pytest.raises(EmptySequenceError):
        orchestrator.run(sprite_scene.frames[:1])
    with pytest.raises(DataError):
        orchestrator.run([sprite_scene.frames[0], LumaFrame(np.zeros((360, 620), dtype=np.uint8))])
    with pytest.raises(DataError):
        orchestrator.run([LumaFrame(np.zeros((30, 30), dtype=np.uint8))] * 2)


def test_runs_are_deterministic(sprite_scene, tmp_path: Path):
    first = _recording_orchestrator(tmp_path, StubFlowBackend()).run(sprite_scene)
    second = _recording_orchestrator(tmp_path, StubFlowBackend()).run(sprite_scene)

    for a, b in zip(first.outputs, second.outputs):
        assert a.rois == b.rois
        assert np.array_equal(a.pattern.bits, b.pattern.bits)
        assert a.tensor.flow == b.tensor.flow


def test_repeated_runs_start_from_a_clean_array(sprite_scene, tmp_path: Path, flow_backend_stub: StubFlowBackend):
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    first = orchestrator.run(sprite_scene)
    second = orchestrator.run(sprite_scene)

    assert [o.rois for o in first.outputs] == [o.rois for o in second.outputs]


def test_task_overrides_reach_the_task(tmp_path: Path, flow_backend_stub: StubFlowBackend):
    config = _config(tasks={"enabled": ["tracking", "missing"], "overrides": {"tracking": {"min_area": 64}}})

    orchestrator = NeuroFlowOrchestrator(config, backend=flow_backend_stub)

    assert set(orchestrator.tasks) == {"tracking"}
    assert orchestrator.tasks["tracking"].params.min_area == 64
    assert orchestrator.tasks["tracking"].params.nms_iou == 0.5


def test_write_result_produces_run_layout(tmp_path: Path, flow_backend_stub: StubFlowBackend):
    scene = gen_scene(sprite_scene_spec(frames=3))
    config = _config(tasks={"enabled": ["prediction", "segmentation", "tracking"]})
    orchestrator = NeuroFlowOrchestrator(config, backend=flow_backend_stub)

    result = orchestrator.run(scene)
    root = orchestrator.write_result(result, tmp_path / "run")

    assert read_rois(root / "rois" / "r0001.txt") == result.outputs[0].rois
    assert read_flo(root / "flow" / "u0002.flo") == result.outputs[1].tensor.flow
    for relative in ("predicted/p0001.pgm", "masks/m0002.pgm", "boxes/b0001.txt"):
        assert (root / relative).exists()
    report = json.loads((root / "report.json").read_text(encoding="utf-8"))
    assert report["frames"] == [1, 2]
    assert report["ssim"][-1] is None
    assert report["pa"][0] is not None
    assert set(report["timings"]) >= {"sensor", "prefilter", "flow", "tensor", "prediction"}


def test_load_source_prefers_scene_then_input_dir(tmp_path: Path):
    spec = sprite_scene_spec(frames=2)
    with_scene = _config(scene=spec.model_dump())
    assert len(load_source(with_scene).frames) == 2

    scene_dir = write_scene(gen_scene(spec), tmp_path / "scene")
    from_dir = load_source(_config(paths={"input_dir": str(scene_dir)}))
    assert len(from_dir.masks) == 2
    assert from_dir.boxes[0] == [RoiRect(120, 100, 160, 160)]

    plain = load_source(_config(paths={"input_dir": str(scene_dir / "frames")}))
    assert len(plain.frames) == 2
    assert plain.masks == []

    with pytest.raises(ConfigError):
        load_source(_config())


def test_run_pipeline_with_configured_scene(tmp_path: Path, flow_backend_stub: StubFlowBackend):
    config = _config(scene=sprite_scene_spec(frames=3).model_dump(), tasks={"enabled": []})

    result = run_pipeline(config, backend=flow_backend_stub)

    assert len(result.outputs) == 2
    assert result.outputs[0].artifacts == {}


def test_frames_smaller_than_three_cells_each_way(tmp_path: Path, flow_backend_stub: StubFlowBackend):
    still = LumaFrame(np.zeros((40, 60), dtype=np.uint8))
    lit = np.zeros((40, 60), dtype=np.uint8)
    lit[:20, :20] = 255
    orchestrator = _recording_orchestrator(tmp_path, flow_backend_stub)

    (output,) = orchestrator.run([still, LumaFrame(lit)]).outputs

    assert output.pattern.bits.tolist() == [[1, 0, 0], [0, 0, 0]]
    assert any(roi.x == 0 and roi.y == 0 and roi.w >= 20 and roi.h >= 20 for roi in output.rois)
    assert np.all(output.tensor.u[:20, :20] == 1.0)


@pytest.fixture(scope="module")
def driving_scene_spec():
    return sprite_scene_spec(width=1920, height=900, frames=3)


def test_run_pipeline_meets_segmentation_and_tracking_bounds(driving_scene_spec):
    config = _config(scene=driving_scene_spec.model_dump(), tasks={"enabled": ["segmentation", "tracking"]})

    result = run_pipeline(config, backend=FarnebackBackend())

    assert result.mode == "neuromorphic"
    for output in result.outputs:
        assert output.rois
        assert output.scores["segmentation"] >= 0.99
        assert output.scores["tracking"] >= 0.5


def test_gated_and_dense_segmentation_agree(driving_scene_spec):
    scene = gen_scene(driving_scene_spec)
    config = _config(tasks={"enabled": ["segmentation"]})
    orchestrator = NeuroFlowOrchestrator(config, backend=FarnebackBackend())

    gated = orchestrator.run(scene, mode="neuromorphic").report.mean("pa")
    dense = orchestrator.run(scene, mode="conventional").report.mean("pa")

    assert gated is not None and dense is not None
    assert abs(gated - dense) <= 0.01
