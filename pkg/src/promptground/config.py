"""Pipeline configuration and the prompt templates it carries.

Templates are configuration, not code: every one of them can be overridden
from the config file (JSON, or TOML on Python 3.11+ / with tomli).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InvariantViolation

DEFAULT_INTENT_TEMPLATE = """\
Split the task below into three short sub-queries and reply with a JSON \
object of the form {{"access": "...", "preprocess": "...", "visualize": "..."}}:
- "access": how the data should be located and loaded
- "preprocess": what cleaning or transformation is needed
- "visualize": what should be rendered

Task:
{prompt}
"""

DEFAULT_SIMPLIFY_TEMPLATE = """\
Summarize the following detailed request as one concise natural-language \
query, the way a scientist without programming experience would phrase it. \
Reply with the summary only, as a single paragraph.

{prompt}
"""

DEFAULT_REPAIR_INSTRUCTION = (
    "Please return a corrected, complete script. "
    "Reply with the full script, not a diff."
)

PROMPT_VARIANTS = ("detailed", "simple")
AGGREGATION_MODES = ("cumulative", "marginal")


@dataclass
class PipelineConfig:
    """Knobs for one benchmark configuration; defaults follow the study setup."""

    name: str = ""
    model: str = "devstral"
    prompt_variant: str = "detailed"
    disambiguation: bool = True
    retrieval: bool = False
    max_iterations: int = 6
    workers: int = 1
    server_url: str = "http://127.0.0.1:11434"
    kb_index: str | None = None
    strict: float = 87.0
    relaxed: float = 80.0
    max_context_entries: int = 5
    error_tail_chars: int = 4000
    error_history: bool = False
    repair_incorrect: bool = False
    min_score: float | None = None
    temperature: float = 0.0
    seed: int | None = 0
    script_timeout_s: int = 120
    runner_cmd: str | None = None
    system_prompt: str = ""
    aggregation: str = "cumulative"
    intent_template: str = DEFAULT_INTENT_TEMPLATE
    simplify_template: str = DEFAULT_SIMPLIFY_TEMPLATE
    repair_instruction: str = DEFAULT_REPAIR_INSTRUCTION

    def __post_init__(self):
        if not self.name:
            self.name = (
                f"{self.prompt_variant}"
                f"|dis={int(self.disambiguation)}"
                f"|ret={int(self.retrieval)}"
                f"|it={self.max_iterations}"
            )

    def validate(self) -> "PipelineConfig":
        if self.prompt_variant not in PROMPT_VARIANTS:
            raise InvariantViolation(
                f"prompt_variant must be one of {PROMPT_VARIANTS}"
            )
        if self.max_iterations < 1:
            raise InvariantViolation("max_iterations must be >= 1")
        if self.workers < 1:
            raise InvariantViolation("workers must be >= 1")
        if self.aggregation not in AGGREGATION_MODES:
            raise InvariantViolation(
                f"aggregation must be one of {AGGREGATION_MODES}"
            )
        if self.retrieval and not self.kb_index:
            raise InvariantViolation("retrieval=true requires kb_index")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELD_NAMES = {f.name for f in dataclasses.fields(PipelineConfig)}


def config_from_mapping(raw: dict) -> PipelineConfig:
    unknown = set(raw) - _FIELD_NAMES
    if unknown:
        raise InvariantViolation(f"unknown config keys: {sorted(unknown)}")
    return PipelineConfig(**raw).validate()


def load_config(path: str | Path) -> PipelineConfig:
    """Read a PipelineConfig from a .json or .toml file."""
    p = Path(path)
    text = p.read_bytes()
    if p.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        raw = tomllib.loads(text.decode("utf-8"))
    else:
        raw = json.loads(text)
    if not isinstance(raw, dict):
        raise InvariantViolation("config file must hold one object/table")
    return config_from_mapping(raw)
