"""Script execution backends behind one small interface.

The real backend shells out to the external sandbox runner and parses the
single JSON object it prints. The stub backend interprets ``#:`` directives
embedded in the script text, runs nothing, and is what the test suite and
dry runs use.
"""

from __future__ import annotations

import json
import os
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .errors import InvariantViolation

RUNNER_ENV_VAR = "PROMPTGROUND_RUNNER"


@dataclass(frozen=True)
class ExecutionRecord:
    exit_code: int
    timed_out: bool
    stdout: str
    stderr: str
    duration_ms: int
    artifacts: tuple[str, ...]


class Sandbox(Protocol):
    def run(
        self, script_path: Path, workdir: Path, timeout_s: int
    ) -> ExecutionRecord: ...


class SubprocessRunnerSandbox:
    """Invoke the external runner CLI; its stdout is one result JSON object."""

    def __init__(self, runner_cmd: str | list[str]):
        self.runner_cmd = (
            shlex.split(runner_cmd) if isinstance(runner_cmd, str) else list(runner_cmd)
        )

    def run(self, script_path: Path, workdir: Path, timeout_s: int) -> ExecutionRecord:
        cmd = self.runner_cmd + [
            "--script",
            str(script_path),
            "--workdir",
            str(workdir),
            "--timeout",
            str(timeout_s),
        ]
        try:
            proc = subprocess.run(
                cmd, capture_output=True, text=True, timeout=timeout_s + 60
            )
            payload = json.loads(proc.stdout)
        except (OSError, subprocess.SubprocessError, json.JSONDecodeError) as exc:
            # a runner that broke protocol is reported as a failed run, so
            # suites keep going
            return ExecutionRecord(
                exit_code=-1,
                timed_out=False,
                stdout="",
                stderr=f"sandbox runner failed: {exc}",
                duration_ms=0,
                artifacts=(),
            )
        return ExecutionRecord(
            exit_code=int(payload.get("exit_code", -1)),
            timed_out=bool(payload.get("timed_out", False)),
            stdout=str(payload.get("stdout", "")),
            stderr=str(payload.get("stderr", "")),
            duration_ms=int(payload.get("duration_ms", 0)),
            artifacts=tuple(payload.get("artifacts", [])),
        )


class StubSandbox:
    """Deterministic in-process stand-in: obeys ``#:`` directives, runs nothing.

    Recognized directives, one per line anywhere in the script:

        #: exit <int>          process exit code (default 0)
        #: stdout <text>       appended stdout line
        #: stderr <text>       appended stderr line
        #: artifact <relpath>  file actually created under the workdir
        #: timeout             report the run as timed out

    Durations are a fixed constant so reports stay byte-stable.
    """

    def __init__(self, duration_ms: int = 7):
        self.duration_ms = duration_ms

    def run(self, script_path: Path, workdir: Path, timeout_s: int) -> ExecutionRecord:
        script_path = Path(script_path)
        workdir = Path(workdir)
        if not script_path.exists():
            return ExecutionRecord(-1, False, "", "script missing", 0, ())
        exit_code = 0
        timed_out = False
        stdout_lines: list[str] = []
        stderr_lines: list[str] = []
        artifacts: list[str] = []
        for line in script_path.read_text(encoding="utf-8").splitlines():
            if not line.startswith("#:"):
                continue
            parts = line[2:].strip().split(None, 1)
            if not parts:
                continue
            op, arg = parts[0], parts[1] if len(parts) > 1 else ""
            if op == "exit":
                exit_code = int(arg)
            elif op == "stdout":
                stdout_lines.append(arg)
            elif op == "stderr":
                stderr_lines.append(arg)
            elif op == "artifact":
                target = workdir / arg
                target.parent.mkdir(parents=True, exist_ok=True)
                target.write_text("stub artifact\n")
                artifacts.append(arg)
            elif op == "timeout":
                timed_out = True
        return ExecutionRecord(
            exit_code=exit_code,
            timed_out=timed_out,
            stdout="\n".join(stdout_lines),
            stderr="\n".join(stderr_lines),
            duration_ms=self.duration_ms,
            artifacts=tuple(artifacts),
        )


def resolve_sandbox(runner_cmd: str | None) -> Sandbox:
    """Build a sandbox from config: "stub", an explicit command, or env/auto."""
    if runner_cmd == "stub":
        return StubSandbox()
    if runner_cmd:
        return SubprocessRunnerSandbox(runner_cmd)
    env_cmd = os.environ.get(RUNNER_ENV_VAR)
    if env_cmd:
        return SubprocessRunnerSandbox(env_cmd)
    in_repo = Path("runner/dist/main.js")
    if in_repo.exists():
        return SubprocessRunnerSandbox(["node", str(in_repo)])
    raise InvariantViolation(
        "no sandbox runner configured: set runner_cmd, "
        f"${RUNNER_ENV_VAR}, or build runner/dist/main.js"
    )
