import json
import random

import numpy as np
import pytest

from promptground.errors import (
    DimensionMismatch,
    EmptyIndex,
    InvariantViolation,
    ZeroVector,
)
from promptground.knowledge import (
    INDEX_KINDS,
    HashEmbedder,
    IntentTriple,
    build_index,
    build_indexes,
    cosine_top1,
    decompose_intent,
    enhance_prompt,
    load_indexes,
    parse_kb_jsonl,
    save_indexes,
)

from fakes import FakeGateway
from oracles import cosine_argmax_brute


def kb_line(i, kind, title=None, description=None, code="print(1)"):
    return json.dumps(
        {
            "id": f"e{i}",
            "index": kind,
            "title": f"title {i}" if title is None else title,
            "description": f"description {i}" if description is None else description,
            "code": code,
        }
    )


def small_kb():
    return parse_kb_jsonl(
        "\n".join(
            [
                kb_line(0, "access", "Open an HDF5 dataset by path"),
                kb_line(1, "preprocess", "Mask invalid values"),
                kb_line(2, "visualize", "Plot a time series"),
            ]
        )
    )


def test_three_entries_partition_into_three_indexes():
    indexes = build_indexes(small_kb(), HashEmbedder(32))
    assert set(indexes) == set(INDEX_KINDS)
    assert all(len(indexes[kind]) == 1 for kind in INDEX_KINDS)


def test_empty_title_rejected_at_load():
    with pytest.raises(InvariantViolation, match="nonempty"):
        parse_kb_jsonl(kb_line(0, "access", title=""))


def test_duplicate_id_rejected():
    with pytest.raises(InvariantViolation, match="duplicate id"):
        parse_kb_jsonl(kb_line(0, "access") + "\n" + kb_line(0, "preprocess"))


def test_unknown_index_kind_rejected():
    with pytest.raises(InvariantViolation, match="index"):
        parse_kb_jsonl(json.dumps({"id": "x", "index": "other"}))


def test_fifty_entry_index_is_dim_consistent():
    lines = [kb_line(i, "access") for i in range(50)]
    index = build_index("access", parse_kb_jsonl("\n".join(lines)), HashEmbedder(48))
    assert len(index) == 50
    assert index.vectors.shape == (50, 48)
    assert index.dim == 48
    assert [e.id for e in index.entries] == [f"e{i}" for i in range(50)]


def test_zero_vector_rejected_at_build():
    with pytest.raises(ZeroVector):
        build_index("access", small_kb(), lambda text: np.zeros(8))


def test_inconsistent_dim_rejected_at_build():
    sizes = iter([8, 9, 8])

    def embedder(text):
        return np.ones(next(sizes))

    entries = parse_kb_jsonl("\n".join(kb_line(i, "access") for i in range(3)))
    with pytest.raises(DimensionMismatch):
        build_index("access", entries, embedder)


# --- cosine_top1 ---


def index_from_vectors(vectors):
    entries = parse_kb_jsonl(
        "\n".join(kb_line(i, "access") for i in range(len(vectors)))
    )
    by_text = {e.embedding_text: np.asarray(v, float) for e, v in zip(entries, vectors)}
    return build_index("access", entries, lambda text: by_text[text])


def test_self_similarity_is_one():
    idx = index_from_vectors([[1.0, 2.0, 3.0], [0.0, 1.0, 0.0]])
    entry, score = cosine_top1(idx, np.array([1.0, 2.0, 3.0]))
    assert entry.id == "e0"
    assert score == pytest.approx(1.0)


def test_orthogonal_query_scores_zero():
    idx = index_from_vectors([[1.0, 0.0]])
    entry, score = cosine_top1(idx, np.array([0.0, 2.0]))
    assert entry.id == "e0"
    assert score == pytest.approx(0.0, abs=1e-12)


def test_empty_index_rejected():
    idx = build_index("access", [], HashEmbedder(8))
    with pytest.raises(EmptyIndex):
        cosine_top1(idx, np.zeros(8) + 1.0)


def test_dimension_mismatch_rejected():
    idx = index_from_vectors([[1.0, 0.0]])
    with pytest.raises(DimensionMismatch):
        cosine_top1(idx, np.array([1.0, 0.0, 0.0]))


def test_zero_query_rejected():
    idx = index_from_vectors([[1.0, 0.0]])
    with pytest.raises(ZeroVector):
        cosine_top1(idx, np.zeros(2))


def test_matches_brute_force_on_random_vectors():
    rng = np.random.default_rng(7)
    vectors = rng.standard_normal((100, 16))
    idx = index_from_vectors(vectors.tolist())
    for _ in range(25):
        q = rng.standard_normal(16)
        entry, score = cosine_top1(idx, q)
        bi, bs = cosine_argmax_brute(vectors.tolist(), q.tolist())
        assert entry.id == f"e{bi}"
        assert score == pytest.approx(bs, abs=1e-9)


def test_tie_breaks_to_lowest_position():
    # rows 1 and 2 are the same direction; row order decides
    idx = index_from_vectors([[0.0, 1.0], [1.0, 1.0], [2.0, 2.0]])
    entry, score = cosine_top1(idx, np.array([1.0, 1.0]))
    assert entry.id == "e1"
    assert score == pytest.approx(1.0)


# --- decompose_intent ---


INTENT_REPLY = json.dumps(
    {"access": "load temperature", "preprocess": "mask fill values", "visualize": "line plot"}
)


def test_decompose_parses_three_fields():
    triple = decompose_intent(
        "extract and visualize temperature data", FakeGateway(reply=INTENT_REPLY)
    )
    assert triple == IntentTriple("load temperature", "mask fill values", "line plot")


def test_decompose_falls_back_on_garbage():
    prompt = "extract and visualize temperature data"
    triple = decompose_intent(prompt, FakeGateway(reply="sure! here you go"))
    assert triple == IntentTriple(prompt, prompt, prompt)


def test_decompose_fieldwise_fallback():
    prompt = "extract and visualize temperature data"
    reply = json.dumps({"access": "a", "preprocess": "p", "visualize": ""})
    triple = decompose_intent(prompt, FakeGateway(reply=reply))
    assert triple == IntentTriple("a", "p", prompt)


def test_decompose_reads_fenced_json():
    reply = f"Here you go:\n```json\n{INTENT_REPLY}\n```"
    triple = decompose_intent("x", FakeGateway(reply=reply))
    assert triple.access_query == "load temperature"


# --- enhance_prompt ---


def test_enhance_appends_three_entries_in_order():
    indexes = build_indexes(small_kb(), HashEmbedder(32))
    triple = IntentTriple("read data", "clean data", "draw data")
    out = enhance_prompt("task prompt", triple, indexes, HashEmbedder(32))
    rendered = out.render()
    assert rendered.startswith("task prompt\n\n")
    assert out.context_block.startswith("Reference examples:")
    positions = [out.context_block.index(f"[{k}]") for k in INDEX_KINDS]
    assert positions == sorted(positions)
    assert out.context_block.count("```python") == 3


def test_enhance_retrieves_matching_entry():
    entries = parse_kb_jsonl(
        "\n".join(kb_line(i, "access") for i in range(5))
        + "\n"
        + kb_line(9, "preprocess")
        + "\n"
        + kb_line(10, "visualize")
    )
    indexes = build_indexes(entries, HashEmbedder(32))
    target = indexes["access"].entries[3]
    triple = IntentTriple(target.embedding_text, "x", "y")
    out = enhance_prompt("p", triple, indexes, HashEmbedder(32))
    assert f"[access] {target.title}" in out.context_block


def test_enhance_empty_index_rejected():
    indexes = build_indexes(small_kb(), HashEmbedder(32))
    indexes["visualize"] = build_index("visualize", [], HashEmbedder(32))
    with pytest.raises(EmptyIndex):
        enhance_prompt("p", IntentTriple("a", "b", "c"), indexes, HashEmbedder(32))


def test_enhance_min_score_can_drop_entries():
    indexes = build_indexes(small_kb(), HashEmbedder(32))
    triple = IntentTriple("a", "b", "c")
    out = enhance_prompt("p", triple, indexes, HashEmbedder(32), min_score=1.1)
    assert out.context_block == "Reference examples:"


def test_retrieval_deterministic_and_order_stable():
    entries = parse_kb_jsonl("\n".join(kb_line(i, "access") for i in range(10)))
    embedder = HashEmbedder(24)
    idx_a = build_index("access", entries, embedder)
    shuffled = entries[:]
    random.Random(3).shuffle(shuffled)
    idx_b = build_index("access", shuffled, embedder)
    for q in ["alpha", "beta", "gamma"]:
        ea, sa = cosine_top1(idx_a, embedder(q))
        eb, sb = cosine_top1(idx_b, embedder(q))
        assert ea.id == eb.id  # no exact ties in hash vectors
        assert sa == pytest.approx(sb, abs=1e-12)


def test_save_load_roundtrip(tmp_path):
    indexes = build_indexes(small_kb(), HashEmbedder(16))
    path = tmp_path / "index.bin"
    save_indexes(indexes, path)
    loaded = load_indexes(path)
    assert set(loaded) == set(indexes)
    for kind in INDEX_KINDS:
        assert [e.id for e in loaded[kind].entries] == [
            e.id for e in indexes[kind].entries
        ]
        np.testing.assert_allclose(loaded[kind].vectors, indexes[kind].vectors)
        entry_a, score_a = cosine_top1(indexes[kind], HashEmbedder(16)("q"))
        entry_b, score_b = cosine_top1(loaded[kind], HashEmbedder(16)("q"))
        assert (entry_a.id, score_a) == (entry_b.id, score_b)
