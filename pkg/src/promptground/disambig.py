"""Resolve vague dataset references in a prompt against a schema index.

Matching runs in two rounds. Round one takes the prompt's monograms and
bigrams through exact/partial criteria, then fuzzy similarity at a strict
threshold, then again at a relaxed one. Round two re-runs all four criteria
over slash-expanded tokens and bigrams regenerated from them, which helps
with nested paths whose components carry punctuation. Each (token, path)
pair keeps only the strongest kind that fired.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import EmptyPrompt, EmptySchema
from .fuzzy import fuzzy_similarity
from .schema import SchemaIndex

# Generic words that would otherwise match half the file ("data" is a leaf
# in almost every scientific container). Applied to single tokens only;
# bigrams keep their words so compound names like "temperature data" still
# land on "temperature_data".
STOP_TOKENS = frozenset(
    {
        "the",
        "a",
        "an",
        "of",
        "to",
        "and",
        "data",
        "file",
        "plot",
        "show",
        "visualize",
        "generate",
    }
)

EXACT_FULL_PATH = "ExactFullPath"
SUBGROUP = "Subgroup"
PARTIAL_NAME = "PartialName"
FUZZY = "Fuzzy"

KIND_RANK = {EXACT_FULL_PATH: 0, SUBGROUP: 1, PARTIAL_NAME: 2, FUZZY: 3}

_TOKEN_RUN = re.compile(r"[a-z0-9_]+")
_NON_TOKEN = re.compile(r"[^a-z0-9_]+")


@dataclass(frozen=True)
class MatchConfig:
    strict: float = 87.0
    relaxed: float = 80.0
    max_context_entries: int = 5
    stop_tokens: frozenset[str] = STOP_TOKENS


@dataclass(frozen=True)
class TokenSet:
    monograms: tuple[str, ...]
    bigrams: tuple[str, ...]
    expanded: tuple[str, ...]


@dataclass(frozen=True)
class MatchResult:
    token: str
    path: str
    kind: str
    score: float
    fuzzy_pass: str | None = None  # "strict" | "relaxed", Fuzzy only


@dataclass(frozen=True)
class AugmentedPrompt:
    original: str
    context_block: str
    matches_used: tuple[MatchResult, ...] = ()

    def render(self) -> str:
        return f"{self.original}\n\n{self.context_block}"


def _dedup(items) -> tuple[str, ...]:
    return tuple(dict.fromkeys(x for x in items if x))


def tokenize(prompt: str) -> TokenSet:
    """Split a prompt into monograms, bigrams, and slash-expanded tokens.

    Cleaning lowercases and splits on whitespace, punctuation, and slashes.
    ``expanded`` holds the slash components of raw terms that contained a
    "/", each stripped of punctuation without further splitting.
    """
    if not prompt or not prompt.strip():
        raise EmptyPrompt("prompt is empty")
    raw_terms = prompt.lower().split()
    sequence = [run for term in raw_terms for run in _TOKEN_RUN.findall(term)]
    monograms = _dedup(sequence)
    bigrams = _dedup(f"{a} {b}" for a, b in zip(sequence, sequence[1:]))
    expanded = []
    for term in raw_terms:
        if "/" in term:
            for comp in term.split("/"):
                expanded.append(_NON_TOKEN.sub("", comp))
    return TokenSet(monograms=monograms, bigrams=bigrams, expanded=_dedup(expanded))


def _candidates(token: str) -> tuple[str, ...]:
    # A bigram "w1 w2" may name a compound leaf written w1_w2 or w1w2.
    if " " in token:
        a, b = token.split(" ", 1)
        return (token, f"{a}_{b}", f"{a}{b}")
    return (token,)


class _PathView:
    """Lowercased component view of one dataset or group path."""

    __slots__ = ("path", "comps", "leaf", "full_forms", "is_dataset")

    def __init__(self, path: str, is_dataset: bool):
        self.path = path
        self.is_dataset = is_dataset
        self.comps = tuple(c.lower() for c in path.strip("/").split("/") if c)
        self.leaf = self.comps[-1] if self.comps else ""
        self.full_forms = frozenset(
            sep.join(self.comps) for sep in (" ", "_", "")
        )


def _best_kind(cands: tuple[str, ...], view: _PathView) -> str | None:
    """Strongest non-fuzzy criterion that fires for this token on this path."""
    if view.is_dataset:
        if any(c in view.full_forms for c in cands):
            return EXACT_FULL_PATH
        if any(c == comp for comp in view.comps[:-1] for c in cands):
            return SUBGROUP
        if any(c in view.leaf for c in cands):
            return PARTIAL_NAME
        return None
    # group paths participate in subgroup matching only
    if view.leaf and any(c == view.leaf for c in cands):
        return SUBGROUP
    return None


def match_tokens(
    tokens: TokenSet, schema: SchemaIndex, cfg: MatchConfig | None = None
) -> list[MatchResult]:
    """Run both matching rounds and return one result per (token, path)."""
    cfg = cfg or MatchConfig()
    if not schema.datasets and not schema.groups:
        raise EmptySchema("schema has no datasets or groups")

    views = [_PathView(d.path, True) for d in schema.datasets]
    views += [_PathView(g, False) for g in schema.groups if g != "/"]

    best: dict[tuple[str, str], MatchResult] = {}

    def consider(result: MatchResult) -> None:
        key = (result.token, result.path)
        held = best.get(key)
        if held is None or KIND_RANK[result.kind] < KIND_RANK[held.kind]:
            best[key] = result

    def run_round(round_tokens: list[str]) -> None:
        # exact & partial criteria first
        for token in round_tokens:
            cands = _candidates(token)
            for view in views:
                kind = _best_kind(cands, view)
                if kind is not None:
                    consider(MatchResult(token, view.path, kind, 100.0))
        # fuzzy, strict threshold then relaxed, dataset leaves only
        for token in round_tokens:
            cands = _candidates(token)
            for view in views:
                if not view.is_dataset:
                    continue
                score = max(fuzzy_similarity(c, view.leaf) for c in cands)
                if score >= cfg.strict:
                    consider(MatchResult(token, view.path, FUZZY, score, "strict"))
                elif score >= cfg.relaxed:
                    consider(MatchResult(token, view.path, FUZZY, score, "relaxed"))

    singles = [t for t in tokens.monograms if t not in cfg.stop_tokens]
    run_round(singles + list(tokens.bigrams))

    expanded = [t for t in tokens.expanded if t not in cfg.stop_tokens]
    regenerated = _dedup(
        f"{a} {b}" for a, b in zip(tokens.expanded, tokens.expanded[1:])
    )
    run_round(expanded + list(regenerated))

    return list(best.values())


def rank_matches(matches: list[MatchResult]) -> list[MatchResult]:
    """Order by kind strength, then descending score, then path; stable."""
    return sorted(matches, key=lambda m: (KIND_RANK[m.kind], -m.score, m.path))


def augment_prompt(
    prompt: str,
    ranked: list[MatchResult],
    schema: SchemaIndex,
    cfg: MatchConfig | None = None,
) -> AugmentedPrompt:
    """Append matched paths (or a fallback listing) after the prompt."""
    cfg = cfg or MatchConfig()
    attrs_by_path = {d.path: [n for n, _ in d.attributes] for d in schema.datasets}

    def line(path: str) -> str:
        names = attrs_by_path.get(path, [])
        if names:
            return f"- {path} (attributes: {', '.join(names)})"
        return f"- {path} (no attributes)"

    used: list[MatchResult] = []
    seen: set[str] = set()
    if ranked:
        header = "Dataset context (from the file):"
        for m in ranked:
            if m.path in seen:
                continue
            seen.add(m.path)
            used.append(m)
            if len(used) >= cfg.max_context_entries:
                break
        lines = [line(m.path) for m in used]
    else:
        header = "Datasets available in the file:"
        lines = [
            line(p)
            for p in list(schema.dataset_paths())[: cfg.max_context_entries]
        ]
    block = "\n".join([header, *lines])
    return AugmentedPrompt(
        original=prompt, context_block=block, matches_used=tuple(used)
    )


def disambiguate(
    prompt: str, schema: SchemaIndex, cfg: MatchConfig | None = None
) -> AugmentedPrompt:
    """tokenize -> match -> rank -> augment, deterministic end to end."""
    cfg = cfg or MatchConfig()
    tokens = tokenize(prompt)
    ranked = rank_matches(match_tokens(tokens, schema, cfg))
    return augment_prompt(prompt, ranked, schema, cfg)
