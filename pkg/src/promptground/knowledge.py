"""Three-index example retrieval: access, preprocess, visualize.

The knowledge base is a JSON Lines file of titled, described code snippets.
Each of the three index kinds gets its own vector index (embedding of
``title + " " + description``); retrieval takes the single most similar
entry per index and appends it to the prompt.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from . import _kernels
from .config import DEFAULT_INTENT_TEMPLATE
from .disambig import AugmentedPrompt
from .errors import (
    DimensionMismatch,
    EmbedderUnavailable,
    EmptyIndex,
    GatewayError,
    InvariantViolation,
    ZeroVector,
)

INDEX_KINDS = ("access", "preprocess", "visualize")

# An embedder is any callable mapping text to a 1-d float vector.
Embedder = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class KnowledgeBaseEntry:
    id: str
    index_kind: str
    title: str
    description: str
    code: str

    @property
    def embedding_text(self) -> str:
        # queries are natural language, so code stays out of the embedding
        return f"{self.title} {self.description}"


@dataclass(frozen=True)
class IntentTriple:
    access_query: str
    preprocess_query: str
    visualize_query: str

    def query_for(self, kind: str) -> str:
        return {
            "access": self.access_query,
            "preprocess": self.preprocess_query,
            "visualize": self.visualize_query,
        }[kind]


@dataclass(frozen=True)
class VectorIndex:
    index_kind: str
    dim: int
    entries: tuple[KnowledgeBaseEntry, ...]
    vectors: np.ndarray  # (n, dim) raw embeddings
    unit_rows: np.ndarray  # (n, dim) L2-normalized copy used for scoring

    def __len__(self) -> int:
        return len(self.entries)


def hash_embed(text: str, dim: int = 384) -> np.ndarray:
    """Deterministic hash-projection embedding used by mocks and tests."""
    seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng(seed).standard_normal(dim)


class HashEmbedder:
    """Deterministic text -> vector stand-in for a real encoder."""

    def __init__(self, dim: int = 384):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        return hash_embed(text, self.dim)


def parse_kb_jsonl(text: str) -> list[KnowledgeBaseEntry]:
    """Load and validate knowledge-base entries from JSON Lines text."""
    entries: list[KnowledgeBaseEntry] = []
    seen_ids: set[str] = set()
    for lineno, line in enumerate(io.StringIO(text), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InvariantViolation(f"kb line {lineno}: {exc.msg}") from exc
        kind = raw.get("index")
        if kind not in INDEX_KINDS:
            raise InvariantViolation(
                f"kb line {lineno}: index must be one of {INDEX_KINDS}"
            )
        entry = KnowledgeBaseEntry(
            id=str(raw.get("id", "")),
            index_kind=kind,
            title=str(raw.get("title", "")),
            description=str(raw.get("description", "")),
            code=str(raw.get("code", "")),
        )
        if not entry.id:
            raise InvariantViolation(f"kb line {lineno}: missing id")
        if entry.id in seen_ids:
            raise InvariantViolation(f"kb line {lineno}: duplicate id {entry.id!r}")
        seen_ids.add(entry.id)
        if not (entry.title and entry.description and entry.code):
            raise InvariantViolation(
                f"kb line {lineno}: title, description, and code must be nonempty"
            )
        entries.append(entry)
    return entries


def load_kb(path: str | Path) -> list[KnowledgeBaseEntry]:
    return parse_kb_jsonl(Path(path).read_text(encoding="utf-8"))


def _embed_all(texts: Iterable[str], embedder: Embedder) -> np.ndarray:
    rows = []
    dim = None
    for text in texts:
        try:
            vec = np.asarray(embedder(text), dtype=np.float64).reshape(-1)
        except GatewayError:
            raise
        except Exception as exc:
            raise EmbedderUnavailable(str(exc)) from exc
        if not np.all(np.isfinite(vec)):
            raise EmbedderUnavailable("embedder returned non-finite values")
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise DimensionMismatch(f"expected dim {dim}, got {vec.size}")
        if not np.any(vec):
            raise ZeroVector("embedding has zero norm")
        rows.append(vec)
    return np.vstack(rows) if rows else np.empty((0, 0))


def build_index(
    index_kind: str,
    entries: list[KnowledgeBaseEntry],
    embedder: Embedder,
) -> VectorIndex:
    """Embed every entry of one kind, preserving entry order."""
    kept = tuple(e for e in entries if e.index_kind == index_kind)
    vectors = _embed_all((e.embedding_text for e in kept), embedder)
    if len(kept) == 0:
        return VectorIndex(index_kind, 0, (), vectors, vectors)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return VectorIndex(
        index_kind=index_kind,
        dim=int(vectors.shape[1]),
        entries=kept,
        vectors=vectors,
        unit_rows=vectors / norms,
    )


def build_indexes(
    entries: list[KnowledgeBaseEntry], embedder: Embedder
) -> dict[str, VectorIndex]:
    return {kind: build_index(kind, entries, embedder) for kind in INDEX_KINDS}


def cosine_top1(
    index: VectorIndex, query_vec: np.ndarray
) -> tuple[KnowledgeBaseEntry, float]:
    """Most similar entry by cosine; ties go to the lowest entry position."""
    if len(index) == 0:
        raise EmptyIndex(f"index {index.index_kind!r} is empty")
    q = np.asarray(query_vec, dtype=np.float64).reshape(-1)
    if q.size != index.dim:
        raise DimensionMismatch(f"query dim {q.size} != index dim {index.dim}")
    norm = np.linalg.norm(q)
    if norm == 0.0:
        raise ZeroVector("query vector has zero norm")
    i, score = _kernels.top1_active(index.unit_rows, q / norm)
    return index.entries[int(i)], float(score)


def decompose_intent(prompt: str, gateway, template: str | None = None) -> IntentTriple:
    """Ask the model to split a prompt into the three sub-queries.

    Malformed replies never fail: any missing or empty field falls back to
    the whole prompt.
    """
    template = template or DEFAULT_INTENT_TEMPLATE
    reply = gateway.chat_text(template.format(prompt=prompt))
    fields = _parse_intent_reply(reply)
    return IntentTriple(
        access_query=fields.get("access") or prompt,
        preprocess_query=fields.get("preprocess") or prompt,
        visualize_query=fields.get("visualize") or prompt,
    )


def _parse_intent_reply(reply: str) -> dict[str, str]:
    """Pull the first JSON object with string fields out of model text."""
    start = reply.find("{")
    while start != -1:
        depth = 0
        for i in range(start, len(reply)):
            if reply[i] == "{":
                depth += 1
            elif reply[i] == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(reply[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(obj, dict):
                        return {
                            k: v.strip()
                            for k, v in obj.items()
                            if isinstance(v, str)
                        }
                    break
        start = reply.find("{", start + 1)
    return {}


def enhance_prompt(
    prompt: str,
    triple: IntentTriple,
    indexes: dict[str, VectorIndex],
    embedder: Embedder,
    min_score: float | None = None,
) -> AugmentedPrompt:
    """Append the top entry from each index, in access/preprocess/visualize order.

    ``prompt`` may already carry a disambiguation context block; its bytes
    are preserved as a prefix of the rendered result.
    """
    sections = []
    for kind in INDEX_KINDS:
        index = indexes.get(kind)
        if index is None or len(index) == 0:
            raise EmptyIndex(f"index {kind!r} is empty")
        try:
            qvec = np.asarray(embedder(triple.query_for(kind)), dtype=np.float64)
        except GatewayError:
            raise
        except Exception as exc:
            raise EmbedderUnavailable(str(exc)) from exc
        entry, score = cosine_top1(index, qvec)
        if min_score is not None and score < min_score:
            continue
        sections.append(
            f"[{kind}] {entry.title}\n{entry.description}\n```python\n{entry.code}\n```"
        )
    block = "\n\n".join(["Reference examples:", *sections])
    return AugmentedPrompt(original=prompt, context_block=block)


# --- index persistence (CLI `kb build` / `retrieve`) ---


def save_indexes(indexes: dict[str, VectorIndex], path: str | Path) -> None:
    arrays: dict[str, np.ndarray] = {}
    meta: dict[str, list[dict]] = {}
    for kind, index in indexes.items():
        arrays[f"vectors_{kind}"] = index.vectors
        meta[kind] = [
            {
                "id": e.id,
                "index": e.index_kind,
                "title": e.title,
                "description": e.description,
                "code": e.code,
            }
            for e in index.entries
        ]
    arrays["meta"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_indexes(path: str | Path) -> dict[str, VectorIndex]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        out: dict[str, VectorIndex] = {}
        for kind, raw_entries in meta.items():
            entries = tuple(
                KnowledgeBaseEntry(
                    id=r["id"],
                    index_kind=r["index"],
                    title=r["title"],
                    description=r["description"],
                    code=r["code"],
                )
                for r in raw_entries
            )
            vectors = data[f"vectors_{kind}"]
            if len(entries) == 0:
                out[kind] = VectorIndex(kind, 0, (), vectors, vectors)
                continue
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            out[kind] = VectorIndex(
                index_kind=kind,
                dim=int(vectors.shape[1]),
                entries=entries,
                vectors=vectors,
                unit_rows=vectors / norms,
            )
    return out
