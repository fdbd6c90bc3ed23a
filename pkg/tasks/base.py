"""Base classes shared across downstream task implementations."""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, Optional, Type

from pydantic import BaseModel, ValidationError

from core.errors import ConfigError
from core.metrics import MetricParams


class _NoParams(BaseModel):
    """Empty parameter model; pydantic refuses to validate into ``BaseModel`` itself."""


class BaseTask:
    """A consumer of the neuromorphic tensor configured from ``tasks/config/<name>.yaml``.

    ``run`` receives the per-pair context assembled by the orchestrator
    (``prev_frame``, ``curr_frame``, ``tensor``, ``rois``) and returns the
    task artifact; ``score`` compares an artifact with its reference.
    """

    params_model: Type[BaseModel] = _NoParams
    metric_name = ""

    def __init__(self, *, config: Dict[str, Any]) -> None:
        self.config = config
        self.name = config.get("name", self.__class__.__name__)
        self.description = config.get("description", "")
        try:
            self.params = self.params_model.model_validate(config.get("params") or {})
        except ValidationError as exc:
            raise ConfigError(f"Invalid parameters for task '{self.name}': {exc}") from exc

    def run(self, context: Dict[str, Any]) -> Any:
        raise NotImplementedError

    def score(self, artifact: Any, reference: Any, metric_params: MetricParams) -> Optional[float]:
        return None

    def write(self, artifact: Any, out_dir: Path, frame_index: int) -> Path:
        raise NotImplementedError
