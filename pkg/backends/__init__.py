"""Flow backend registry."""
from __future__ import annotations

from typing import Dict, Literal, Type

from pydantic import BaseModel, ConfigDict, Field

from backends.base import BaseFlowBackend
from backends.blockmatch import BlockMatchBackend, BlockMatchParams, block_match_flow
from backends.external import ExternalBackend, ExternalParams, external_flow
from backends.farneback import FarnebackBackend, FarnebackParams, farneback_flow, poly_expansion
from backends.gating import gated_flow
from core.errors import ConfigError

BackendKind = Literal["farneback", "blockmatch", "external"]

BACKEND_REGISTRY: Dict[str, Type[BaseFlowBackend]] = {
    FarnebackBackend.name: FarnebackBackend,
    BlockMatchBackend.name: BlockMatchBackend,
    ExternalBackend.name: ExternalBackend,
}


class FlowBackendSpec(BaseModel):
    """Selected backend kind plus the parameter groups of every kind."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: BackendKind = "farneback"
    max_workers: int = Field(1, ge=1, description="Threads used for ROIs of one frame pair.")
    farneback: FarnebackParams = Field(default_factory=FarnebackParams)
    blockmatch: BlockMatchParams = Field(default_factory=BlockMatchParams)
    external: ExternalParams = Field(default_factory=ExternalParams)


def build_backend(spec: FlowBackendSpec) -> BaseFlowBackend:
    """Instantiate the backend named by ``spec.kind`` with its parameter group."""
    try:
        backend_cls = BACKEND_REGISTRY[spec.kind]
    except KeyError as exc:
        raise ConfigError(f"Unknown flow backend '{spec.kind}'") from exc
    return backend_cls(getattr(spec, spec.kind))


__all__ = [
    "BACKEND_REGISTRY",
    "BaseFlowBackend",
    "FlowBackendSpec",
    "build_backend",
    "FarnebackBackend",
    "FarnebackParams",
    "BlockMatchBackend",
    "BlockMatchParams",
    "ExternalBackend",
    "ExternalParams",
    "farneback_flow",
    "poly_expansion",
    "block_match_flow",
    "external_flow",
    "gated_flow",
]
