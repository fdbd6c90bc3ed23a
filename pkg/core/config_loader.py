"""Helpers for loading pipeline configuration profiles."""
from __future__ import annotations

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any, Dict, Optional, Set, Union
import json
import logging
import os
import re

from pydantic import ValidationError

from core.errors import ConfigError
from core.orchestrator import NeuroFlowOrchestrator
from core.scenes import SceneSpec
from core.settings import PipelineConfig

try:  # Optional dependency for YAML parsing.
    import yaml  # type: ignore
except ImportError:  # pragma: no cover - fallback when PyYAML is unavailable.
    yaml = None


LOGGER = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parents[1] / "config"
_ENV_PATTERN = re.compile(r"\$\{([^}:]+)(?::([^}]*))?\}")
_SUFFIXES = (".yaml", ".yml", ".json")


def merge_configs(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``overrides`` into ``base`` and return a new mapping."""

    result: Dict[str, Any] = dict(base)
    for key, value in overrides.items():
        base_value = result.get(key)
        if isinstance(base_value, Mapping) and isinstance(value, Mapping):
            result[key] = merge_configs(base_value, value)
        else:
            result[key] = value
    return result


def load_profile(profile: Union[str, Path], config_dir: Path = DEFAULT_CONFIG_DIR) -> Dict[str, Any]:
    """Load a profile by name or path and resolve inheritance and environment vars.

    A name is looked up in ``config_dir``; a path to an existing file is read
    directly and its parents are looked up beside it first, then in
    ``config_dir``.
    """

    config_dir = Path(config_dir)
    merged = _load_profile_recursive(str(profile), config_dir, seen=set())
    return _substitute_environment_variables(merged)


def build_pipeline_config(config: Mapping[str, Any]) -> PipelineConfig:
    """Validate a merged profile mapping; failures surface as :class:`ConfigError`."""

    try:
        return PipelineConfig.model_validate(dict(config))
    except ValidationError as exc:
        raise ConfigError(f"Invalid pipeline configuration: {exc}") from exc


def build_scene_spec(config: Mapping[str, Any]) -> SceneSpec:
    """Scene description from a profile holding either a ``scene`` section or the scene fields at top level."""

    data = config.get("scene", config)
    try:
        return SceneSpec.model_validate(dict(data))
    except ValidationError as exc:
        raise ConfigError(f"Invalid scene description: {exc}") from exc


def build_pipeline(config: Union[PipelineConfig, Mapping[str, Any]], **kwargs: Any) -> NeuroFlowOrchestrator:
    """Initialise the pipeline orchestrator according to ``config``."""

    if not isinstance(config, PipelineConfig):
        config = build_pipeline_config(config)
    LOGGER.debug("Building %s pipeline with %s backend", config.mode, config.flow.kind)
    return NeuroFlowOrchestrator(config, **kwargs)


def _load_profile_recursive(profile: str, config_dir: Path, seen: Set[str]) -> Dict[str, Any]:
    path = _resolve_profile_path(profile, config_dir)
    key = str(path.resolve())
    if key in seen:
        raise ConfigError(f"Circular profile inheritance detected for '{profile}'")

    data = _load_structured_file(path)
    inherits = data.pop("inherits", None)
    parents = _normalise_inherits(inherits)

    base_config: Dict[str, Any] = {}
    next_seen = set(seen)
    next_seen.add(key)
    for parent in parents:
        parent_dir = path.parent if _find_in_dir(parent, path.parent) is not None else config_dir
        parent_config = _load_profile_recursive(parent, parent_dir, next_seen)
        base_config = merge_configs(base_config, parent_config)

    return merge_configs(base_config, data)


def _find_in_dir(profile: str, directory: Path) -> Optional[Path]:
    for suffix in _SUFFIXES:
        candidate = directory / f"{profile}{suffix}"
        if candidate.exists():
            return candidate
    return None


def _resolve_profile_path(profile: str, config_dir: Path) -> Path:
    direct = Path(profile).expanduser()
    if direct.suffix.lower() in _SUFFIXES and direct.is_file():
        return direct
    found = _find_in_dir(profile, config_dir)
    if found is not None:
        return found
    raise ConfigError(f"Configuration profile '{profile}' not found in {config_dir}")


def _load_structured_file(path: Path) -> Dict[str, Any]:
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        elif yaml is not None:
            data = yaml.safe_load(text)
        else:
            # YAML is a superset of JSON; fall back to JSON parsing when PyYAML is missing.
            data = json.loads(text)
    except (ValueError, getattr(yaml, "YAMLError", ValueError)) as exc:
        raise ConfigError(f"Cannot parse {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return dict(data)


def _normalise_inherits(value: Any) -> Iterable[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, Mapping):
        raise ConfigError("'inherits' must not be a mapping")
    if isinstance(value, Iterable):
        return [str(item) for item in value]
    raise ConfigError("'inherits' must be a string or iterable of strings")


def _substitute_environment_variables(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {key: _substitute_environment_variables(val) for key, val in value.items()}
    if isinstance(value, list):
        return [_substitute_environment_variables(item) for item in value]
    if isinstance(value, str):
        return _ENV_PATTERN.sub(_replace_env_match, value)
    return value


def _replace_env_match(match: re.Match[str]) -> str:
    variable, default = match.group(1), match.group(2) or ""
    return os.environ.get(variable, default)
