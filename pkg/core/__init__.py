"""Core modules of the neuromorphic flow pipeline."""
from __future__ import annotations

from importlib import import_module
from typing import Any

# Resolved on first access so that ``backends`` and ``tasks`` can import core submodules freely.
_EXPORTS = {
    "load_profile": "core.config_loader",
    "merge_configs": "core.config_loader",
    "build_pipeline": "core.config_loader",
    "build_pipeline_config": "core.config_loader",
    "build_scene_spec": "core.config_loader",
    "NeuroFlowOrchestrator": "core.orchestrator",
    "run_pipeline": "core.orchestrator",
    "bench_compare": "core.bench",
    "PipelineConfig": "core.settings",
}


def __getattr__(name: str) -> Any:
    module = _EXPORTS.get(name)
    if module is None:
        raise AttributeError(f"module 'core' has no attribute '{name}'")
    return getattr(import_module(module), name)


__all__ = sorted(_EXPORTS)
