"""Grounded prompt pipeline and benchmark harness for generated analysis scripts."""

from .config import PipelineConfig, load_config
from .disambig import (
    AugmentedPrompt,
    MatchConfig,
    MatchResult,
    TokenSet,
    disambiguate,
    match_tokens,
    rank_matches,
    tokenize,
)
from .fuzzy import fuzzy_similarity, levenshtein
from .gateway import ChatMessage, ChatRequest, GeneratedScript, ModelGateway, extract_code
from .knowledge import (
    HashEmbedder,
    IntentTriple,
    KnowledgeBaseEntry,
    VectorIndex,
    build_index,
    build_indexes,
    cosine_top1,
    decompose_intent,
    enhance_prompt,
)
from .pipeline import Services, run_task
from .repair import (
    CORRECT,
    FAILED,
    RUNNABLE,
    CheckerSpec,
    RepairTrace,
    build_repair_prompt,
    classify,
    repair_loop,
)
from .sandbox import ExecutionRecord, StubSandbox, SubprocessRunnerSandbox
from .schema import DatasetEntry, SchemaIndex, dump_manifest, extract_schema, load_manifest

__version__ = "0.1.0"
