"""Adapter around an external optical-flow program (learned backends and the like)."""
from __future__ import annotations

from pathlib import Path
from typing import List, Optional
import logging
import os
import shlex
import subprocess
import tempfile
import threading

from core.errors import ConfigError, DataError, DimensionMismatchError, ExternalBackendError
from core.frame_io import read_flo, write_pgm
from core.types import FlowField, LumaFrame

LOGGER = logging.getLogger(__name__)

PLACEHOLDERS = ("{prev}", "{curr}", "{out}")
_STDERR_TAIL = 2000


class ExternalFlowClient:
    """Run a child process per frame pair and read back the ``.flo`` it writes.

    The command template is split like a shell command line; ``{prev}`` and
    ``{curr}`` are replaced by PGM paths and ``{out}`` by the path where the
    program must write its flow.  At most ``max_concurrent`` children run at
    the same time across all threads sharing the client.
    """

    def __init__(
        self,
        command: Optional[str] = None,
        *,
        max_concurrent: int = 1,
        timeout: Optional[float] = None,
    ) -> None:
        self.command = command or os.getenv("NEUROFLOW_EXTERNAL_CMD", "")
        if not self.command:
            raise ConfigError("External flow backend needs a command template")
        missing = [token for token in PLACEHOLDERS if token not in self.command]
        if missing:
            raise ConfigError(f"External command template lacks placeholders: {', '.join(missing)}")
        if max_concurrent < 1:
            raise ConfigError(f"max_concurrent must be at least 1, got {max_concurrent}")
        self.max_concurrent = max_concurrent
        self.timeout = timeout
        self._slots = threading.BoundedSemaphore(max_concurrent)

    def build_argv(self, prev_path: Path, curr_path: Path, out_path: Path) -> List[str]:
        argv = []
        for token in shlex.split(self.command):
            token = token.replace("{prev}", str(prev_path))
            token = token.replace("{curr}", str(curr_path))
            token = token.replace("{out}", str(out_path))
            argv.append(token)
        return argv

    def compute(self, prev: LumaFrame, curr: LumaFrame) -> FlowField:
        with tempfile.TemporaryDirectory(prefix="neuroflow-ext-") as workdir:
            root = Path(workdir)
            prev_path, curr_path, out_path = root / "prev.pgm", root / "curr.pgm", root / "flow.flo"
            write_pgm(prev, prev_path)
            write_pgm(curr, curr_path)
            argv = self.build_argv(prev_path, curr_path, out_path)

            with self._slots:
                LOGGER.debug("Running external flow program: %s", argv)
                try:
                    completed = subprocess.run(
                        argv, capture_output=True, text=True, timeout=self.timeout, check=False
                    )
                except FileNotFoundError as exc:
                    raise ExternalBackendError(f"External flow program not found: {argv[0]}") from exc
                except subprocess.TimeoutExpired as exc:
                    raise ExternalBackendError(f"External flow program timed out after {self.timeout} s") from exc

            if completed.returncode != 0:
                stderr = (completed.stderr or "")[-_STDERR_TAIL:]
                raise ExternalBackendError(
                    f"External flow program exited with status {completed.returncode}: {stderr.strip()}",
                    returncode=completed.returncode,
                    stderr=stderr,
                )
            if not out_path.exists():
                raise ExternalBackendError(f"External flow program did not write {out_path.name}")
            try:
                field = read_flo(out_path)
            except DataError as exc:
                raise ExternalBackendError(f"External flow program wrote an unusable .flo: {exc}") from exc

        if field.shape != prev.shape:
            raise DimensionMismatchError(
                f"External flow is {field.width}x{field.height}, frames are {prev.width}x{prev.height}"
            )
        return field
