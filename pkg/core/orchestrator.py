"""Pipeline orchestrator that wires the sensor, pre-filter, flow backend and tasks."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Union
import json
import logging
import time

from backends import BaseFlowBackend, build_backend, gated_flow
from core.errors import ConfigError, DataError, EmptySequenceError, FrameFlowError, NeuroFlowError
from core.frame_io import load_sequence, write_flo, write_rois
from core.memristor import MemristorArray, step_frame
from core.metrics import MetricsReport
from core.prefilter import pattern_to_rois
from core.scenes import Scene, gen_scene, is_scene_dir, load_scene, scene_from_frames
from core.settings import Mode, PipelineConfig
from core.types import LumaFrame, MotionPattern, RoiRect, RoiSet
from tasks.tensor import NeuroFlowTensor, assemble_tensor, full_support_tensor

try:  # Optional dependency for YAML.
    import yaml  # type: ignore
except ImportError:  # pragma: no cover - fallback when PyYAML is unavailable.
    yaml = None


LOGGER = logging.getLogger(__name__)

SENSOR_STAGE = "sensor"
PREFILTER_STAGE = "prefilter"
FLOW_STAGE = "flow"
TENSOR_STAGE = "tensor"


@dataclass
class FrameOutput:
    """Everything produced for the frame pair ``(index - 1, index)``."""

    index: int
    rois: RoiSet
    tensor: NeuroFlowTensor
    pattern: Optional[MotionPattern] = None
    artifacts: Dict[str, Any] = field(default_factory=dict)
    scores: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass
class PipelineResult:
    mode: str
    outputs: List[FrameOutput]
    report: MetricsReport

    def stage_total(self, stage: str) -> float:
        return self.report.total_time(stage)


class NeuroFlowOrchestrator:
    """Run one frame sequence through the neuromorphic or the conventional path."""

    def __init__(
        self,
        config: PipelineConfig,
        backend: Optional[BaseFlowBackend] = None,
        task_registry: Optional[Mapping[str, Any]] = None,
        task_config_dir: Optional[Path] = None,
        clock: Callable[[], float] = time.perf_counter,
    ) -> None:
        from tasks import TASK_CONFIG_DIR, TASK_REGISTRY  # Imported lazily to avoid cycles.

        self.config = config
        self.backend = backend or build_backend(config.flow)
        self.clock = clock
        self.task_config_dir = Path(task_config_dir or TASK_CONFIG_DIR)
        self.task_configs = self._load_task_configs(self.task_config_dir)
        registry = dict(task_registry or TASK_REGISTRY)
        self.tasks = self._instantiate_tasks(registry)
        self.array: Optional[MemristorArray] = None

    # ------------------------------------------------------------------
    # Loading helpers
    def _load_task_configs(self, directory: Path) -> Dict[str, Dict[str, Any]]:
        configs: Dict[str, Dict[str, Any]] = {}
        if not directory.exists():
            LOGGER.warning("Task configuration directory %s does not exist", directory)
            return configs

        for path in sorted(directory.iterdir()):
            if path.suffix.lower() not in {".yaml", ".yml", ".json"}:
                continue
            try:
                configs[path.stem] = self._load_structured_file(path)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"Failed to load task configuration {path}: {exc}") from exc
        return configs

    def _load_structured_file(self, path: Path) -> Dict[str, Any]:
        text = path.read_text(encoding="utf-8")
        if path.suffix.lower() == ".json":
            return json.loads(text)
        if yaml is not None:
            return yaml.safe_load(text) or {}
        # YAML is a superset of JSON, so fall back to JSON parsing.
        return json.loads(text)

    def _instantiate_tasks(self, registry: Mapping[str, Any]) -> Dict[str, Any]:
        from core.config_loader import merge_configs  # Local import to avoid cycle.

        instances: Dict[str, Any] = {}
        for name in self.config.tasks.enabled:
            cls = registry.get(name)
            if cls is None:
                LOGGER.warning("Task '%s' is enabled but not registered; skipping", name)
                continue
            base = self.task_configs.get(name, {"name": name})
            override = self.config.tasks.overrides.get(name, {})
            config = merge_configs(base, {"params": override}) if override else base
            instances[name] = cls(config=config)
        return instances

    # ------------------------------------------------------------------
    # Public API
    def run(self, source: Union[Scene, Sequence[LumaFrame]], mode: Optional[Mode] = None) -> PipelineResult:
        """Process every consecutive frame pair of ``source``."""
        scene = source if isinstance(source, Scene) else scene_from_frames(source)
        mode = mode or self.config.mode
        if mode not in ("neuromorphic", "conventional"):
            raise ConfigError(f"Unknown pipeline mode '{mode}'")
        frames = scene.frames
        if len(frames) < 2:
            raise EmptySequenceError(f"The pipeline needs at least 2 frames, got {len(frames)}")
        first = frames[0]
        for index, frame in enumerate(frames):
            if frame.shape != first.shape:
                raise DataError(f"Frame {index} is {frame.width}x{frame.height}, frame 0 is {first.width}x{first.height}")

        self.reset()
        if mode == "neuromorphic":
            self.array = MemristorArray.for_frame(first.width, first.height, self.config.bin, self.config.memristor)
        else:
            self.config.bin.grid_shape(first.width, first.height)

        report = MetricsReport(mode=mode)
        outputs: List[FrameOutput] = []
        for index in range(1, len(frames)):
            output = self._process_pair(scene, index, mode, report)
            outputs.append(output)

        LOGGER.info(
            "%s run over %d frames: flow %.3f s, %d ROIs in total",
            mode,
            len(frames),
            report.total_time(FLOW_STAGE),
            sum(report.roi_counts),
        )
        return PipelineResult(mode=mode, outputs=outputs, report=report)

    def reset(self) -> None:
        """Forget the memristor state of the previous run."""
        self.array = None

    def write_result(self, result: PipelineResult, out_dir: Union[str, Path]) -> Path:
        """Write ROIs, flow fields, task artifacts and ``report.json`` under ``out_dir``."""
        root = Path(out_dir)
        (root / "rois").mkdir(parents=True, exist_ok=True)
        (root / "flow").mkdir(parents=True, exist_ok=True)
        for output in result.outputs:
            write_rois(output.rois, root / "rois" / f"r{output.index:04d}.txt")
            write_flo(output.tensor.flow, root / "flow" / f"u{output.index:04d}.flo")
            for name, artifact in output.artifacts.items():
                self.tasks[name].write(artifact, root, output.index)
        result.report.write_json(root / "report.json")
        LOGGER.info("Run outputs written to %s", root)
        return root

    # ------------------------------------------------------------------
    # Internal helpers
    def _timed(self, report: MetricsReport, stage: str, func: Callable[[], Any]) -> Any:
        start = self.clock()
        try:
            return func()
        finally:
            report.add_timing(stage, self.clock() - start)

    def _process_pair(self, scene: Scene, index: int, mode: Mode, report: MetricsReport) -> FrameOutput:
        prev, curr = scene.frames[index - 1], scene.frames[index]
        height, width = curr.shape
        pattern: Optional[MotionPattern] = None

        if mode == "neuromorphic":
            assert self.array is not None
            _, pattern = self._timed(
                report,
                SENSOR_STAGE,
                lambda: step_frame(self.array, prev, curr, self.config.bin, self.config.modulation),
            )
            rois = self._timed(
                report,
                PREFILTER_STAGE,
                lambda: pattern_to_rois(pattern, self.config.bin, (width, height), self.config.prefilter),
            )
            flow = self._timed(report, FLOW_STAGE, lambda: self._gated(prev, curr, rois, index))
            tensor = self._timed(report, TENSOR_STAGE, lambda: assemble_tensor(pattern, self.config.bin, flow))
        else:
            report.add_timing(SENSOR_STAGE, 0.0)
            report.add_timing(PREFILTER_STAGE, 0.0)
            rois = [RoiRect(0, 0, width, height)]
            flow = self._timed(report, FLOW_STAGE, lambda: self._dense(prev, curr, index))
            tensor = self._timed(report, TENSOR_STAGE, lambda: full_support_tensor(flow))

        output = FrameOutput(index=index, rois=rois, tensor=tensor, pattern=pattern)
        context = {"prev_frame": prev, "curr_frame": curr, "tensor": tensor, "rois": rois, "index": index}
        for name, task in self.tasks.items():
            artifact = self._timed(report, name, lambda task=task: task.run(context))
            output.artifacts[name] = artifact
            output.scores[name] = task.score(artifact, self._reference(scene, name, index), self.config.metrics)

        report.frame_indices.append(index)
        report.roi_counts.append(len(rois))
        report.ssim.append(output.scores.get("prediction"))
        report.pa.append(output.scores.get("segmentation"))
        report.mean_iou.append(output.scores.get("tracking"))
        LOGGER.debug("Frame %d: %d ROIs, scores %s", index, len(rois), output.scores)
        return output

    def _gated(self, prev: LumaFrame, curr: LumaFrame, rois: RoiSet, index: int):
        try:
            return gated_flow(prev, curr, rois, self.backend, max_workers=self.config.flow.max_workers)
        except NeuroFlowError as exc:
            if isinstance(exc, DataError):
                raise
            raise FrameFlowError(index, exc) from exc

    def _dense(self, prev: LumaFrame, curr: LumaFrame, index: int):
        try:
            return self.backend.estimate(prev, curr)
        except DataError:
            raise
        except Exception as exc:
            raise FrameFlowError(index, exc) from exc

    def _reference(self, scene: Scene, task: str, index: int) -> Any:
        """Ground truth for the pair ending at ``index``; flow lives on the grid of ``index - 1``."""
        if task == "prediction":
            return scene.frames[index + 1] if index + 1 < len(scene.frames) else None
        if task == "segmentation":
            return scene.masks[index - 1] if index - 1 < len(scene.masks) else None
        if task == "tracking":
            return scene.boxes[index - 1] if index - 1 < len(scene.boxes) else None
        return None


def load_source(config: PipelineConfig) -> Scene:
    """Scene named by the configuration: a synthetic scene section wins over ``paths.input_dir``."""
    if config.scene is not None:
        return gen_scene(config.scene)
    if not config.paths.input_dir:
        raise ConfigError("Neither a scene nor paths.input_dir is configured")
    if is_scene_dir(config.paths.input_dir):
        return load_scene(config.paths.input_dir)
    return scene_from_frames(load_sequence(config.paths.input_dir, config.paths.frame_pattern))


def run_pipeline(config: PipelineConfig, scene: Optional[Scene] = None, **kwargs: Any) -> PipelineResult:
    orchestrator = NeuroFlowOrchestrator(config, **kwargs)
    return orchestrator.run(scene if scene is not None else load_source(config))


__all__ = ["NeuroFlowOrchestrator", "PipelineResult", "FrameOutput", "load_source", "run_pipeline"]
