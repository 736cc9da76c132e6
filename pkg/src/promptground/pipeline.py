"""End-to-end composition: ground the prompt, enhance it, run the repair loop."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .config import PipelineConfig
from .disambig import MatchConfig, disambiguate
from .knowledge import Embedder, VectorIndex, decompose_intent, enhance_prompt
from .repair import CheckerSpec, RepairTrace, repair_loop
from .sandbox import Sandbox
from .schema import SchemaIndex


@dataclass
class Services:
    """Runtime collaborators shared by every task in a run."""

    gateway: Any
    sandbox: Sandbox
    indexes: dict[str, VectorIndex] | None = None
    embedder: Embedder | None = None


def prepare_prompt(
    prompt: str,
    schema: SchemaIndex | None,
    config: PipelineConfig,
    services: Services,
) -> str:
    """Apply the enabled prompt strategies; the input stays a byte-prefix."""
    enhanced = prompt
    if config.disambiguation and schema is not None:
        cfg = MatchConfig(
            strict=config.strict,
            relaxed=config.relaxed,
            max_context_entries=config.max_context_entries,
        )
        enhanced = disambiguate(enhanced, schema, cfg).render()
    if config.retrieval:
        if not services.indexes or services.embedder is None:
            raise ValueError("retrieval enabled but indexes/embedder missing")
        triple = decompose_intent(
            enhanced, services.gateway, config.intent_template
        )
        enhanced = enhance_prompt(
            enhanced,
            triple,
            services.indexes,
            services.embedder,
            min_score=config.min_score,
        ).render()
    return enhanced


def run_task(
    prompt: str,
    schema: SchemaIndex | None,
    config: PipelineConfig,
    services: Services,
    checker: CheckerSpec,
    data_file: str | Path | None = None,
    workdir_root: str | Path | None = None,
    task_id: str = "",
) -> RepairTrace:
    enhanced = prepare_prompt(prompt, schema, config, services)
    return repair_loop(
        enhanced,
        config,
        services.gateway,
        services.sandbox,
        checker,
        data_file=data_file,
        workdir_root=workdir_root,
        task_id=task_id,
    )
