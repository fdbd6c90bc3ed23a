"""Flow backend delegating to an external program through ``.flo`` files."""
from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from backends.base import BaseFlowBackend
from core.types import FlowField, LumaFrame
from services.external_flow import ExternalFlowClient


class ExternalParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    command: str = ""
    max_concurrent: int = Field(1, ge=1)
    timeout: Optional[float] = Field(None, gt=0.0)
    window_radius: int = Field(0, ge=0, description="Context the program needs around a gated ROI.")


def external_flow(prev: LumaFrame, curr: LumaFrame, cmd_template: str) -> FlowField:
    return ExternalFlowClient(cmd_template).compute(prev, curr)


class ExternalBackend(BaseFlowBackend):
    name = "external"

    def __init__(self, params: Optional[ExternalParams] = None, client: Optional[ExternalFlowClient] = None) -> None:
        self.params = params or ExternalParams()
        self.client = client or ExternalFlowClient(
            self.params.command or None,
            max_concurrent=self.params.max_concurrent,
            timeout=self.params.timeout,
        )

    @property
    def window_radius(self) -> int:
        return self.params.window_radius

    def _estimate(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        return self.client.compute(prev, curr)


__all__ = ["ExternalParams", "ExternalBackend", "external_flow"]
