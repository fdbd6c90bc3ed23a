"""Task registry for the downstream algorithms."""
from __future__ import annotations

from pathlib import Path
from typing import Dict, Type
import logging

from tasks.base import BaseTask
from tasks.prediction import PredictionTask
from tasks.segmentation import SegmentationTask
from tasks.tracking import TrackingTask

LOGGER = logging.getLogger(__name__)

TASK_CONFIG_DIR = Path(__file__).resolve().parent / "config"

_IMPLEMENTATIONS: Dict[str, Type[BaseTask]] = {
    "prediction": PredictionTask,
    "segmentation": SegmentationTask,
    "tracking": TrackingTask,
}


def _discover_tasks() -> Dict[str, Type[BaseTask]]:
    """Register every task that ships a configuration file and has an implementation."""

    registry: Dict[str, Type[BaseTask]] = {}
    if not TASK_CONFIG_DIR.exists():
        LOGGER.warning("Task configuration directory %s does not exist", TASK_CONFIG_DIR)
        return registry
    for path in sorted(TASK_CONFIG_DIR.iterdir()):
        if not path.is_file() or path.suffix.lower() not in {".yaml", ".yml", ".json"}:
            continue
        implementation = _IMPLEMENTATIONS.get(path.stem)
        if implementation is None:
            LOGGER.warning("No implementation for task configuration %s", path.name)
            continue
        registry[path.stem] = implementation
    return registry


TASK_REGISTRY: Dict[str, Type[BaseTask]] = _discover_tasks()

__all__ = [
    "TASK_REGISTRY",
    "TASK_CONFIG_DIR",
    "BaseTask",
    "PredictionTask",
    "SegmentationTask",
    "TrackingTask",
]
