"""Outcome classification and the bounded iterative error-repair loop.

Every run lands in exactly one of three classes: Failed (nonzero exit or
timeout), Correct (ran and passed the checker), or Runnable (ran but did
not pass). Failed attempts feed their error text back into the prompt and
the model tries again, up to ``max_iterations`` total generation attempts.
"""

from __future__ import annotations

import hashlib
import logging
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .config import PipelineConfig
from .errors import GatewayError, InvariantViolation
from .gateway import GeneratedScript, extract_code
from .sandbox import ExecutionRecord, Sandbox

logger = logging.getLogger(__name__)

CORRECT = "Correct"
RUNNABLE = "Runnable"
FAILED = "Failed"
OUTCOMES = (CORRECT, RUNNABLE, FAILED)

REPAIR_HEADER = "The previously generated script failed with this error:"


@dataclass(frozen=True)
class CheckerSpec:
    expected_artifacts: tuple[str, ...] = ()
    checker_command: str | None = None
    timeout_s: int = 60

    def __post_init__(self):
        if not self.expected_artifacts and not self.checker_command:
            raise InvariantViolation(
                "checker needs expected_artifacts or checker_command"
            )
        if self.timeout_s <= 0:
            raise InvariantViolation("checker timeout_s must be positive")


@dataclass(frozen=True)
class Attempt:
    iteration: int  # 1-based
    prompt: str
    script: GeneratedScript
    record: ExecutionRecord
    outcome: str


@dataclass(frozen=True)
class RepairTrace:
    attempts: tuple[Attempt, ...]
    terminal_outcome: str
    iterations_used: int
    task_id: str = ""
    config_name: str = ""
    gateway_error: str | None = None

    def to_dict(self, stderr_tail_chars: int = 4000) -> dict:
        doc = {
            "task_id": self.task_id,
            "config": self.config_name,
            "attempts": [
                {
                    "iteration": a.iteration,
                    "prompt_sha256": hashlib.sha256(
                        a.prompt.encode("utf-8")
                    ).hexdigest(),
                    "script": a.script.source,
                    "exit_code": a.record.exit_code,
                    "timed_out": a.record.timed_out,
                    "stderr_tail": a.record.stderr[-stderr_tail_chars:],
                    "outcome": a.outcome,
                }
                for a in self.attempts
            ],
            "terminal_outcome": self.terminal_outcome,
            "iterations_used": self.iterations_used,
        }
        if self.gateway_error is not None:
            doc["gateway_error"] = self.gateway_error
        return doc


def classify(record: ExecutionRecord, checker: CheckerSpec, workdir: Path) -> str:
    """Decision table: Failed on bad exit/timeout, else Correct iff checks pass."""
    if record.timed_out or record.exit_code != 0:
        return FAILED
    for name in checker.expected_artifacts:
        if not (Path(workdir) / name).exists():
            return RUNNABLE
    if checker.checker_command:
        try:
            proc = subprocess.run(
                shlex.split(checker.checker_command),
                cwd=workdir,
                capture_output=True,
                timeout=checker.timeout_s,
            )
        except (OSError, subprocess.SubprocessError) as exc:
            # the checker itself crashed; the script still ran fine
            logger.warning("checker crashed in %s: %s", workdir, exc)
            return RUNNABLE
        if proc.returncode != 0:
            return RUNNABLE
    return CORRECT


def error_excerpt(record: ExecutionRecord, timeout_s: int) -> str:
    """Error text for one failed run, substituting when stderr is empty."""
    if record.timed_out:
        notice = f"process exceeded the time limit ({timeout_s} s)"
        return f"{notice}\n{record.stderr}" if record.stderr else notice
    if record.stderr:
        return record.stderr
    return (
        f"process exited with code {record.exit_code} "
        "and produced no error output"
    )


def incorrect_excerpt(record: ExecutionRecord, checker: CheckerSpec, workdir: Path) -> str:
    """Diagnostic used when --repair-incorrect extends the loop to Runnable runs."""
    missing = [
        name
        for name in checker.expected_artifacts
        if not (Path(workdir) / name).exists()
    ]
    if missing:
        return "the script ran but did not produce: " + ", ".join(missing)
    return "the script ran but its output failed the correctness check"


def build_repair_prompt(
    base_prompt: str, stderr: str, cfg: PipelineConfig | None = None
) -> str:
    """Append the last error (tail-truncated) and a fix instruction."""
    cfg = cfg or PipelineConfig()
    tail = stderr[-cfg.error_tail_chars :]
    return (
        f"{base_prompt}\n\n{REPAIR_HEADER}\n{tail}\n\n{cfg.repair_instruction}"
    )


def repair_loop(
    enhanced_prompt: str,
    config: PipelineConfig,
    gateway,
    sandbox: Sandbox,
    checker: CheckerSpec,
    data_file: str | Path | None = None,
    workdir_root: str | Path | None = None,
    task_id: str = "",
) -> RepairTrace:
    """Generate, execute, classify, and re-prompt until success or the cap.

    Iteration 1 sends ``enhanced_prompt`` as-is; every later iteration sends
    the ORIGINAL enhanced prompt plus the latest error excerpt (all excerpts
    so far with ``error_history``). Each attempt executes in a fresh working
    directory seeded with the task's data file.
    """
    root = Path(workdir_root) if workdir_root else Path(tempfile.mkdtemp(prefix="pg-"))
    root.mkdir(parents=True, exist_ok=True)

    attempts: list[Attempt] = []
    excerpts: list[str] = []
    prompt = enhanced_prompt
    gateway_error: str | None = None

    for iteration in range(1, config.max_iterations + 1):
        workdir = root / f"attempt{iteration}"
        workdir.mkdir(parents=True, exist_ok=True)
        if data_file is not None:
            src = Path(data_file)
            shutil.copy2(src, workdir / src.name)

        try:
            reply = gateway.chat_text(prompt)
            script = extract_code(reply)
        except GatewayError as exc:
            gateway_error = str(exc)
            record = ExecutionRecord(
                exit_code=-1,
                timed_out=False,
                stdout="",
                stderr=f"gateway error: {exc}",
                duration_ms=0,
                artifacts=(),
            )
            attempts.append(Attempt(iteration, prompt, GeneratedScript("", "python", "whole_reply"), record, FAILED))
            break

        script_path = workdir / "script.py"
        script_path.write_text(script.source, encoding="utf-8")
        record = sandbox.run(script_path, workdir, config.script_timeout_s)
        outcome = classify(record, checker, workdir)
        attempts.append(Attempt(iteration, prompt, script, record, outcome))

        if outcome == CORRECT:
            break
        if outcome == RUNNABLE and not config.repair_incorrect:
            break
        if iteration == config.max_iterations:
            break

        if outcome == FAILED:
            excerpt = error_excerpt(record, config.script_timeout_s)
        else:
            excerpt = incorrect_excerpt(record, checker, workdir)
        excerpts.append(excerpt)
        feedback = "\n\n".join(excerpts) if config.error_history else excerpt
        prompt = build_repair_prompt(enhanced_prompt, feedback, config)

    return RepairTrace(
        attempts=tuple(attempts),
        terminal_outcome=attempts[-1].outcome,
        iterations_used=len(attempts),
        task_id=task_id,
        config_name=config.name,
        gateway_error=gateway_error,
    )
