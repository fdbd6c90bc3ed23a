from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import numpy as np
import pytest

from backends.external import ExternalBackend, ExternalParams, external_flow
from backends.gating import gated_flow
from core.errors import ConfigError, DimensionMismatchError, ExternalBackendError, RoiFlowError
from core.types import LumaFrame, RoiRect
from services.external_flow import ExternalFlowClient


def _frames(height: int = 3, width: int = 4):
    rng = np.random.default_rng(0)
    return (
        LumaFrame(rng.integers(0, 256, size=(height, width), dtype=np.uint8)),
        LumaFrame(rng.integers(0, 256, size=(height, width), dtype=np.uint8)),
    )


def test_stub_program_output_is_returned_verbatim(stub_flow_program: Dict[str, Any]) -> None:
    prev, curr = _frames()
    field = external_flow(prev, curr, stub_flow_program["command"])
    assert field == stub_flow_program["fixture"]


def test_backend_uses_configured_command(stub_flow_program: Dict[str, Any]) -> None:
    backend = ExternalBackend(ExternalParams(command=stub_flow_program["command"], window_radius=2))
    prev, curr = _frames()
    assert backend.estimate(prev, curr) == stub_flow_program["fixture"]
    assert backend.window_radius == 2


def test_command_falls_back_to_environment(stub_flow_program: Dict[str, Any], monkeypatch) -> None:
    monkeypatch.setenv("NEUROFLOW_EXTERNAL_CMD", stub_flow_program["command"])
    client = ExternalFlowClient()
    assert client.command == stub_flow_program["command"]


def test_template_must_name_all_placeholders(monkeypatch) -> None:
    monkeypatch.delenv("NEUROFLOW_EXTERNAL_CMD", raising=False)
    with pytest.raises(ConfigError):
        ExternalFlowClient()
    with pytest.raises(ConfigError):
        ExternalFlowClient("flowtool {prev} {curr}")
    with pytest.raises(ConfigError):
        ExternalFlowClient("flowtool {prev} {curr} {out}", max_concurrent=0)


def test_build_argv_substitutes_paths() -> None:
    client = ExternalFlowClient("flowtool --in {prev} --in {curr} -o {out}")
    argv = client.build_argv(Path("/a/p.pgm"), Path("/a/c.pgm"), Path("/a/f.flo"))
    assert argv == ["flowtool", "--in", "/a/p.pgm", "--in", "/a/c.pgm", "-o", "/a/f.flo"]


def test_nonzero_exit_carries_status_and_stderr(stub_flow_program: Dict[str, Any]) -> None:
    prev, curr = _frames()
    with pytest.raises(ExternalBackendError) as excinfo:
        external_flow(prev, curr, stub_flow_program["failing"])
    assert excinfo.value.returncode == 3
    assert "no flow today" in excinfo.value.stderr
    assert excinfo.value.exit_code == 3


def test_missing_output_is_a_backend_error(stub_flow_program: Dict[str, Any]) -> None:
    prev, curr = _frames()
    with pytest.raises(ExternalBackendError):
        external_flow(prev, curr, stub_flow_program["silent"])


def test_missing_program_is_a_backend_error() -> None:
    prev, curr = _frames()
    with pytest.raises(ExternalBackendError):
        external_flow(prev, curr, "no-such-flow-program-xyz {prev} {curr} {out}")


def test_wrong_field_size_is_a_dimension_error(stub_flow_program: Dict[str, Any]) -> None:
    prev, curr = _frames(height=4, width=4)
    with pytest.raises(DimensionMismatchError):
        external_flow(prev, curr, stub_flow_program["command"])


def test_gated_run_wraps_external_failures(stub_flow_program: Dict[str, Any]) -> None:
    backend = ExternalBackend(ExternalParams(command=stub_flow_program["failing"]))
    prev, curr = _frames(height=8, width=8)
    with pytest.raises(RoiFlowError) as excinfo:
        gated_flow(prev, curr, [RoiRect(0, 0, 4, 3)], backend)
    assert excinfo.value.roi_index == 0
    assert isinstance(excinfo.value.cause, ExternalBackendError)
