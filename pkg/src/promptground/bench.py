"""Suite loading, multi-configuration runs, aggregation, and report output.

A suite is one JSON manifest of tasks. Each (task, config) pair produces
one repair trace; aggregation reduces traces to per-config, per-iteration
correct/runnable/failed percentage rows. An append-only JSONL journal
makes interrupted runs resumable.
"""

from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .config import PipelineConfig
from .errors import MissingDataFile, SuiteError
from .pipeline import Services, run_task
from .repair import CORRECT, FAILED, RUNNABLE, CheckerSpec
from .schema import load_schema

ServicesFor = Callable[[PipelineConfig], Services]


@dataclass(frozen=True)
class BenchTask:
    id: str
    data_file: str
    detailed_prompt: str
    simple_prompt: str
    checker: CheckerSpec
    domain_tag: str = ""

    def prompt_for(self, variant: str) -> str:
        return self.detailed_prompt if variant == "detailed" else self.simple_prompt


@dataclass
class BenchReport:
    configs: list[dict]
    traces: list[dict]
    aggregate: list[dict]

    def to_dict(self) -> dict:
        return {
            "configs": self.configs,
            "traces": self.traces,
            "aggregate": self.aggregate,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchReport":
        return cls(
            configs=doc["configs"],
            traces=doc["traces"],
            aggregate=doc["aggregate"],
        )


def load_suite(manifest: str | Path) -> list[BenchTask]:
    """Read and validate a suite manifest; tasks come back ordered by id."""
    path = Path(manifest)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SuiteError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    raw_tasks = doc.get("tasks")
    if not isinstance(raw_tasks, list):
        raise SuiteError(f"{path}: expected top-level 'tasks' list")

    base = path.parent
    tasks: list[BenchTask] = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_tasks):
        where = f"tasks[{i}]"
        task_id = raw.get("id")
        if not task_id or not isinstance(task_id, str):
            raise SuiteError(f"{where}: missing id")
        if task_id in seen:
            raise SuiteError(f"{where}: duplicate id {task_id!r}")
        seen.add(task_id)
        detailed = raw.get("detailed_prompt", "")
        simple = raw.get("simple_prompt", "")
        if not detailed.strip() or not simple.strip():
            raise SuiteError(f"{where}: both prompts must be nonempty")
        data_file = base / raw.get("data_file", "")
        if not data_file.is_file():
            raise MissingDataFile(task_id, str(data_file))
        checker_raw = raw.get("checker", {})
        checker = CheckerSpec(
            expected_artifacts=tuple(checker_raw.get("expected_artifacts", [])),
            checker_command=checker_raw.get("checker_command"),
            timeout_s=int(checker_raw.get("timeout_s", 60)),
        )
        tasks.append(
            BenchTask(
                id=task_id,
                data_file=str(data_file),
                detailed_prompt=detailed,
                simple_prompt=simple,
                checker=checker,
                domain_tag=raw.get("domain_tag", ""),
            )
        )
    tasks.sort(key=lambda t: t.id)
    return tasks


def _error_trace(task: BenchTask, config: PipelineConfig, message: str) -> dict:
    return {
        "task_id": task.id,
        "config": config.name,
        "attempts": [
            {
                "iteration": 1,
                "prompt_sha256": "",
                "script": "",
                "exit_code": -1,
                "timed_out": False,
                "stderr_tail": message,
                "outcome": FAILED,
            }
        ],
        "terminal_outcome": FAILED,
        "iterations_used": 1,
        "error": message,
    }


def _run_pair(
    task: BenchTask,
    config: PipelineConfig,
    services: Services,
    workdir_root: Path,
) -> dict:
    try:
        schema = load_schema(task.data_file)
        trace = run_task(
            task.prompt_for(config.prompt_variant),
            schema,
            config,
            services,
            task.checker,
            data_file=task.data_file,
            workdir_root=workdir_root / config.name.replace("|", "_") / task.id,
            task_id=task.id,
        )
        return trace.to_dict(config.error_tail_chars)
    except Exception as exc:  # a broken task never aborts the suite
        return _error_trace(task, config, f"{type(exc).__name__}: {exc}")


def run_suite(
    tasks: list[BenchTask],
    configs: list[PipelineConfig],
    services: Services | ServicesFor,
    workdir_root: str | Path,
    journal_path: str | Path | None = None,
) -> BenchReport:
    """Produce one trace per (task, config), resuming from the journal if given."""
    services_for: ServicesFor = (
        services if callable(services) else (lambda _cfg: services)
    )
    workdir_root = Path(workdir_root)

    done: dict[tuple[str, str], dict] = {}
    if journal_path and Path(journal_path).exists():
        for line in Path(journal_path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            trace = json.loads(line)
            done[(trace["config"], trace["task_id"])] = trace

    journal_lock = threading.Lock()
    journal_fh = open(journal_path, "a", encoding="utf-8") if journal_path else None

    def record(trace: dict) -> dict:
        if journal_fh:
            with journal_lock:
                journal_fh.write(json.dumps(trace, sort_keys=True) + "\n")
                journal_fh.flush()
        return trace

    try:
        pending = [
            (task, config)
            for config in configs
            for task in tasks
            if (config.name, task.id) not in done
        ]
        workers = max((c.workers for c in configs), default=1)
        if workers > 1 and pending:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(
                        _run_pair, task, config, services_for(config), workdir_root
                    )
                    for task, config in pending
                ]
                for fut in futures:
                    trace = record(fut.result())
                    done[(trace["config"], trace["task_id"])] = trace
        else:
            for task, config in pending:
                trace = record(
                    _run_pair(task, config, services_for(config), workdir_root)
                )
                done[(trace["config"], trace["task_id"])] = trace
    finally:
        if journal_fh:
            journal_fh.close()

    traces = [
        done[(config.name, task.id)] for config in configs for task in tasks
    ]
    aggregate = aggregate_traces(traces, configs)
    return BenchReport(
        configs=[c.to_dict() for c in configs],
        traces=traces,
        aggregate=aggregate,
    )


def outcome_as_of(trace: dict, iteration: int) -> str:
    """Cumulative outcome after ``iteration`` attempts were allowed."""
    if iteration >= trace["iterations_used"]:
        return trace["terminal_outcome"]
    # every attempt before the stopping one failed
    return FAILED


def aggregate_traces(traces: list[dict], configs: list[PipelineConfig]) -> list[dict]:
    rows: list[dict] = []
    for config in configs:
        config_traces = [t for t in traces if t["config"] == config.name]
        if not config_traces:
            continue
        for iteration in range(1, config.max_iterations + 1):
            if config.aggregation == "marginal":
                active = [
                    t
                    for t in config_traces
                    if any(a["iteration"] == iteration for a in t["attempts"])
                ]
                if not active:
                    continue
                outcomes = [
                    next(
                        a["outcome"]
                        for a in t["attempts"]
                        if a["iteration"] == iteration
                    )
                    for t in active
                ]
            else:
                outcomes = [outcome_as_of(t, iteration) for t in config_traces]
            n = len(outcomes)
            rows.append(
                {
                    "config": config.name,
                    "iteration": iteration,
                    "correct_pct": 100.0 * outcomes.count(CORRECT) / n,
                    "runnable_pct": 100.0 * outcomes.count(RUNNABLE) / n,
                    "failed_pct": 100.0 * outcomes.count(FAILED) / n,
                }
            )
    return rows


def round_row(triple: tuple[float, float, float]) -> tuple[float, float, float]:
    """Round to 2 decimals so the row still sums to exactly 100.00.

    Largest-remainder method in units of 0.01; ties hand the spare cent to
    the later column.
    """
    cents = [math.floor(x * 100 + 1e-9) for x in triple]
    remainders = [x * 100 - c for x, c in zip(triple, cents)]
    missing = round(10_000 - sum(cents))
    order = sorted(range(3), key=lambda i: (remainders[i], i), reverse=True)
    for k in range(missing):
        cents[order[k % 3]] += 1
    return tuple(c / 100 for c in cents)  # type: ignore[return-value]


def emit_report(report: BenchReport, fmt: str = "json") -> str:
    if fmt == "json":
        return report.to_json()
    if fmt == "csv":
        lines = ["config,iteration,correct_pct,runnable_pct,failed_pct"]
        for row in report.aggregate:
            c, r, f = round_row(
                (row["correct_pct"], row["runnable_pct"], row["failed_pct"])
            )
            lines.append(
                f"{row['config']},{row['iteration']},{c:.2f},{r:.2f},{f:.2f}"
            )
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        chunks = []
        for config in report.configs:
            name = config["name"]
            rows = [r for r in report.aggregate if r["config"] == name]
            lines = [
                f"### {name}",
                "",
                "| iteration | correct % | runnable % | failed % |",
                "|---:|---:|---:|---:|",
            ]
            for row in rows:
                c, r, f = round_row(
                    (row["correct_pct"], row["runnable_pct"], row["failed_pct"])
                )
                lines.append(
                    f"| {row['iteration']} | {c:.2f} | {r:.2f} | {f:.2f} |"
                )
            chunks.append("\n".join(lines))
        return "\n\n".join(chunks) + "\n"
    raise ValueError(f"unknown report format: {fmt!r}")


def load_report(path: str | Path) -> BenchReport:
    return BenchReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
