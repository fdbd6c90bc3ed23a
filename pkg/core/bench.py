"""Gated-versus-dense comparison harness."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Any, Dict, List, Optional, Tuple, Union
import json
import logging

from core.errors import ConfigError, FrameWriteError
from core.orchestrator import FLOW_STAGE, PREFILTER_STAGE, SENSOR_STAGE, TENSOR_STAGE, NeuroFlowOrchestrator, load_source
from core.scenes import Scene
from core.settings import Mode, PipelineConfig

LOGGER = logging.getLogger(__name__)

MODES: Tuple[Mode, Mode] = ("neuromorphic", "conventional")
TASK_METRICS = {"prediction": "ssim", "segmentation": "pa", "tracking": "mean_iou"}

BenchRow = Tuple[str, str, str, Optional[float]]


@dataclass
class BenchReport:
    """Median stage times, speedups and accuracies of both modes."""

    repetitions: int
    pairs: int
    stage_medians: Dict[str, Dict[str, float]]
    flow_speedup: float
    end_to_end_speedup: float
    latency_per_pair: Dict[str, float]
    reaction_distance_m: Dict[str, float]
    interframe: Dict[str, bool]
    accuracy: Dict[str, Dict[str, Optional[float]]]
    deltas: Dict[str, Optional[float]]
    rows: List[BenchRow] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "repetitions": self.repetitions,
            "pairs": self.pairs,
            "stage_medians": self.stage_medians,
            "flow_speedup": self.flow_speedup,
            "end_to_end_speedup": self.end_to_end_speedup,
            "latency_per_pair": self.latency_per_pair,
            "reaction_distance_m": self.reaction_distance_m,
            "interframe": self.interframe,
            "accuracy": self.accuracy,
            "deltas": self.deltas,
            "rows": [
                {"task": task, "mode": mode, "metric": metric, "value": value}
                for task, mode, metric, value in self.rows
            ],
        }

    def write_json(self, path: Union[str, Path]) -> None:
        try:
            Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        except OSError as exc:
            raise FrameWriteError(f"Cannot write {path}: {exc}") from exc

    def format_table(self) -> str:
        lines = [f"{'task':<14}{'mode':<14}{'metric':<10}value"]
        for task, mode, metric, value in self.rows:
            shown = "-" if value is None else f"{value:.4f}"
            lines.append(f"{task:<14}{mode:<14}{metric:<10}{shown}")
        lines.append("")
        for mode in MODES:
            stages = self.stage_medians[mode]
            lines.append(
                f"{mode:<14}flow {stages.get(FLOW_STAGE, 0.0):.4f} s  "
                f"latency/pair {self.latency_per_pair[mode] * 1000:.1f} ms  "
                f"reaction {self.reaction_distance_m[mode]:.2f} m"
            )
        lines.append(f"flow speedup {self.flow_speedup:.2f}x, end-to-end {self.end_to_end_speedup:.2f}x")
        return "\n".join(lines)


def _pipeline_stages(config: PipelineConfig) -> List[str]:
    return [PREFILTER_STAGE, FLOW_STAGE, TENSOR_STAGE, *config.tasks.enabled]


def bench_compare(
    config: PipelineConfig,
    repetitions: Optional[int] = None,
    scene: Optional[Scene] = None,
    **kwargs: Any,
) -> BenchReport:
    """Run both modes ``repetitions`` times on one sequence and compare them.

    Stage times are per-run totals, reduced to the median over repetitions.
    The sensor readout is reported but kept out of both speedups.
    """
    reps = config.bench.repetitions if repetitions is None else repetitions
    if reps < 3:
        raise ConfigError(f"bench_compare needs at least 3 repetitions, got {reps}")
    scene = scene if scene is not None else load_source(config)

    totals: Dict[str, Dict[str, List[float]]] = {mode: {} for mode in MODES}
    last_reports = {}
    for rep in range(reps):
        for mode in MODES:
            orchestrator = NeuroFlowOrchestrator(config, **kwargs)
            result = orchestrator.run(scene, mode=mode)
            for stage in result.report.timings:
                totals[mode].setdefault(stage, []).append(result.report.total_time(stage))
            last_reports[mode] = result.report
        LOGGER.debug("Bench repetition %d of %d done", rep + 1, reps)

    stage_medians = {
        mode: {stage: float(median(values)) for stage, values in stages.items()} for mode, stages in totals.items()
    }
    pairs = len(scene.frames) - 1
    gated, dense = stage_medians["neuromorphic"], stage_medians["conventional"]
    flow_speedup = dense.get(FLOW_STAGE, 0.0) / max(gated.get(FLOW_STAGE, 0.0), 1e-9)

    stages = _pipeline_stages(config)
    end_to_end = {mode: sum(stage_medians[mode].get(stage, 0.0) for stage in stages) for mode in MODES}
    e2e_speedup = end_to_end["conventional"] / max(end_to_end["neuromorphic"], 1e-9)

    speed_ms = config.bench.vehicle_speed_kmh / 3.6
    latency = {mode: end_to_end[mode] / pairs for mode in MODES}
    reaction = {mode: speed_ms * latency[mode] for mode in MODES}
    interframe = {mode: latency[mode] <= 1.0 / config.bench.frame_rate for mode in MODES}

    accuracy = {
        mode: {metric: last_reports[mode].mean(metric) for metric in TASK_METRICS.values()} for mode in MODES
    }
    deltas: Dict[str, Optional[float]] = {}
    for metric in TASK_METRICS.values():
        a, b = accuracy["neuromorphic"][metric], accuracy["conventional"][metric]
        deltas[metric] = None if a is None or b is None else a - b

    rows: List[BenchRow] = [
        (task, mode, TASK_METRICS[task], accuracy[mode][TASK_METRICS[task]])
        for task in config.tasks.enabled
        if task in TASK_METRICS
        for mode in MODES
    ]

    LOGGER.info(
        "Bench over %d repetitions: flow %.2fx, end-to-end %.2fx, sensor readout %.4f s",
        reps,
        flow_speedup,
        e2e_speedup,
        gated.get(SENSOR_STAGE, 0.0),
    )
    return BenchReport(
        repetitions=reps,
        pairs=pairs,
        stage_medians=stage_medians,
        flow_speedup=flow_speedup,
        end_to_end_speedup=e2e_speedup,
        latency_per_pair=latency,
        reaction_distance_m=reaction,
        interframe=interframe,
        accuracy=accuracy,
        deltas=deltas,
        rows=rows,
    )


__all__ = ["BenchReport", "bench_compare", "MODES", "TASK_METRICS"]
