"""Validated pipeline configuration assembled from the merged profile mapping."""
from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from backends import FlowBackendSpec
from core.memristor import MemristorParams
from core.metrics import MetricParams
from core.prefilter import PrefilterParams
from core.scenes import SceneSpec
from core.sensor import BinConfig, ModulationConfig

Mode = Literal["neuromorphic", "conventional"]
DEFAULT_TASKS = ["prediction", "segmentation", "tracking"]


class PathSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input_dir: Optional[str] = None
    output_dir: str = "./runs"
    frame_pattern: str = "*.pgm"


class LoggingSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: str = "INFO"
    format: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class TaskSettings(BaseModel):
    """Which tasks run and per-task parameter overrides merged over ``tasks/config``."""

    model_config = ConfigDict(extra="forbid")

    enabled: List[str] = Field(default_factory=lambda: list(DEFAULT_TASKS))
    overrides: Dict[str, Dict[str, Any]] = Field(default_factory=dict)


class BenchParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    repetitions: int = Field(5, ge=3)
    vehicle_speed_kmh: float = Field(60.0, gt=0.0)
    frame_rate: float = Field(30.0, gt=0.0)


class PipelineConfig(BaseModel):
    """Every parameter group of the pipeline; unknown top-level keys such as ``app`` are ignored."""

    model_config = ConfigDict(extra="ignore")

    mode: Mode = "neuromorphic"
    bin: BinConfig = Field(default_factory=BinConfig)
    modulation: ModulationConfig = Field(default_factory=ModulationConfig)
    memristor: MemristorParams = Field(default_factory=MemristorParams)
    prefilter: PrefilterParams = Field(default_factory=PrefilterParams)
    flow: FlowBackendSpec = Field(default_factory=FlowBackendSpec)
    metrics: MetricParams = Field(default_factory=MetricParams)
    tasks: TaskSettings = Field(default_factory=TaskSettings)
    bench: BenchParams = Field(default_factory=BenchParams)
    paths: PathSettings = Field(default_factory=PathSettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)
    scene: Optional[SceneSpec] = None

    @model_validator(mode="after")
    def _check_scene_grid(self) -> "PipelineConfig":
        if self.scene is not None:
            if self.scene.height % self.bin.m or self.scene.width % self.bin.n:
                raise ValueError(
                    f"scene {self.scene.width}x{self.scene.height} is not divisible into "
                    f"{self.bin.n}x{self.bin.m} pixel units"
                )
        return self


__all__ = [
    "Mode",
    "PipelineConfig",
    "PathSettings",
    "LoggingSettings",
    "TaskSettings",
    "BenchParams",
    "DEFAULT_TASKS",
]
