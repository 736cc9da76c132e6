import pytest

from promptground.errors import (
    EmptyPrompt,
    EmptyReply,
    EmptyText,
    GatewayConnectionError,
    GatewayTimeout,
    InvariantViolation,
    ModelNotFound,
)
from promptground.gateway import (
    ChatMessage,
    ChatRequest,
    ModelGateway,
    extract_code,
    simplify_prompt,
)
from promptground.mockserver import MockModelServer, prompt_sha256

from fakes import echo_gateway

CANNED = "```python\nprint('ok')\n```"


@pytest.fixture
def server():
    srv = MockModelServer(
        replies={prompt_sha256("make a plot"): CANNED},
        default_reply="default reply",
        known_models={"testmodel"},
    )
    with srv:
        yield srv


def gw(server, **kw):
    kw.setdefault("backoff_s", 0.01)
    return ModelGateway(server.base_url, model="testmodel", **kw)


def test_chat_returns_scripted_reply(server):
    assert gw(server).chat_text("make a plot") == CANNED
    assert server.seen_prompts == ["make a plot"]


def test_unknown_model_raises_model_not_found(server):
    g = ModelGateway(server.base_url, model="nope", backoff_s=0.01)
    with pytest.raises(ModelNotFound):
        g.chat_text("make a plot")


def test_retry_after_dropped_connection(server):
    server.fail_next(1)
    assert gw(server).chat_text("make a plot") == CANNED


def test_connection_error_after_retries_exhausted(server):
    server.fail_next(10)
    with pytest.raises(GatewayConnectionError):
        gw(server, retries=2).chat_text("make a plot")


def test_timeout_is_distinct():
    with MockModelServer(default_reply="x", chat_delay_s=1.0) as srv:
        g = ModelGateway(srv.base_url, timeout_s=0.15, retries=0, backoff_s=0.01)
        with pytest.raises(GatewayTimeout):
            g.chat_text("anything")


def test_unreachable_server_is_connection_error():
    g = ModelGateway("http://127.0.0.1:9", retries=0, backoff_s=0.01)
    with pytest.raises(GatewayConnectionError):
        g.chat_text("x")


def test_embed_dim_and_determinism(server):
    g = gw(server)
    v1 = g.embed("temperature")
    v2 = g.embed("temperature")
    assert v1.shape == (384,)
    assert (v1 == v2).all()


def test_embed_empty_text_rejected(server):
    with pytest.raises(EmptyText):
        gw(server).embed("")


def test_chat_request_validation():
    with pytest.raises(InvariantViolation):
        ChatRequest(model="m", messages=[])
    with pytest.raises(InvariantViolation):
        ChatRequest(model="m", messages=[ChatMessage("assistant", "hi")])
    req = ChatRequest(model="m", messages=[ChatMessage("user", "hi")])
    assert req.temperature == 0.0


def test_system_prompt_slot(server):
    g = gw(server, system_prompt="be terse")
    g.chat_text("make a plot")
    # the scripted reply keys on the user message only
    assert server.seen_prompts[-1] == "make a plot"


# --- extract_code ---


def test_extract_single_fenced_block():
    script = extract_code("Sure:\n```python\nprint(1)\n```\ndone")
    assert script.source == "print(1)"
    assert script.language_tag == "python"
    assert script.provenance == "fenced_block:0"


def test_extract_prose_only_falls_back():
    script = extract_code("no code here at all")
    assert script.source == "no code here at all"
    assert script.provenance == "whole_reply"


def test_extract_takes_first_of_two_blocks():
    reply = "```python\nfirst\n```\ntext\n```python\nsecond\n```"
    assert extract_code(reply).source == "first"


def test_extract_untagged_block():
    script = extract_code("```\nx = 1\n```")
    assert script.source == "x = 1"
    assert script.provenance == "fenced_block:0"


def test_extract_empty_reply_rejected():
    with pytest.raises(EmptyReply):
        extract_code("")


@pytest.mark.parametrize(
    "reply",
    [
        "print('hello')",
        "```python\nimport sys\nsys.exit(0)\n```",
        "prose\n```\na\nb\n```\nmore",
        "```python\nunterminated fence",
        "```python\nx\n```\n```\ny\n```",
    ],
)
def test_extract_idempotent(reply):
    once = extract_code(reply)
    twice = extract_code(once.source)
    assert twice.source == once.source


# --- simplify_prompt ---


def test_simplify_identity_through_echo():
    out = simplify_prompt("detailed words here", echo_gateway(), template="{prompt}")
    assert out == "detailed words here"


def test_simplify_uses_template():
    g = echo_gateway()
    out = simplify_prompt("X", g, template="Summarize: {prompt}")
    assert out == "Summarize: X"


def test_simplify_rejects_empty():
    with pytest.raises(EmptyPrompt):
        simplify_prompt("  ", echo_gateway(), template="{prompt}")
