"""HTTP client for a local model server (chat + embeddings).

Speaks the de facto local-inference REST shape: ``POST /api/chat`` with
``{"model", "messages", "options", "stream": false}`` returning
``{"message": {"content": ...}}``, and ``POST /api/embeddings`` with
``{"model", "prompt"}`` returning ``{"embedding": [...]}``.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass

import numpy as np
import requests

from .errors import (
    EmptyPrompt,
    EmptyReply,
    EmptyText,
    GatewayConnectionError,
    GatewayError,
    GatewayTimeout,
    InvariantViolation,
    ModelNotFound,
)

DEFAULT_SERVER_URL = "http://127.0.0.1:11434"


@dataclass(frozen=True)
class ChatMessage:
    role: str  # system | user | assistant
    content: str


@dataclass
class ChatRequest:
    model: str
    messages: list[ChatMessage]
    temperature: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not self.messages:
            raise InvariantViolation("chat request needs at least one message")
        if self.messages[-1].role != "user":
            raise InvariantViolation("last chat message must have role 'user'")
        if self.temperature < 0:
            raise InvariantViolation("temperature must be >= 0")


@dataclass(frozen=True)
class GeneratedScript:
    source: str
    language_tag: str
    provenance: str  # "fenced_block:<n>" or "whole_reply"


class ModelGateway:
    """Stateless-per-request client with bounded retry on transient failures."""

    def __init__(
        self,
        server_url: str = DEFAULT_SERVER_URL,
        model: str = "devstral",
        temperature: float = 0.0,
        seed: int | None = 0,
        system_prompt: str = "",
        timeout_s: float = 300.0,
        retries: int = 3,
        backoff_s: float = 0.5,
        session: requests.Session | None = None,
    ):
        self.server_url = server_url.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.seed = seed
        self.system_prompt = system_prompt
        self.timeout_s = timeout_s
        self.retries = retries
        self.backoff_s = backoff_s
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.server_url}{path}"
        last_exc: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(url, json=payload, timeout=self.timeout_s)
            except requests.exceptions.Timeout as exc:
                last_exc = GatewayTimeout(f"{url}: {exc}")
            except requests.exceptions.ConnectionError as exc:
                last_exc = GatewayConnectionError(f"{url}: {exc}")
            else:
                if resp.status_code == 404:
                    raise ModelNotFound(
                        f"{url}: {resp.text.strip() or 'model not found'}"
                    )
                if resp.status_code >= 400:
                    raise GatewayError(f"{url}: HTTP {resp.status_code}: {resp.text}")
                return resp.json()
            if attempt < self.retries:
                time.sleep(self.backoff_s * (2**attempt))
        raise last_exc  # type: ignore[misc]

    def chat(self, req: ChatRequest) -> str:
        payload = {
            "model": req.model,
            "messages": [{"role": m.role, "content": m.content} for m in req.messages],
            "options": {"temperature": req.temperature, "seed": req.seed},
            "stream": False,
        }
        data = self._post("/api/chat", payload)
        return data.get("message", {}).get("content", "")

    def chat_text(self, prompt: str) -> str:
        """Single-turn convenience wrapper used throughout the pipeline."""
        messages = []
        if self.system_prompt:
            messages.append(ChatMessage("system", self.system_prompt))
        messages.append(ChatMessage("user", prompt))
        return self.chat(
            ChatRequest(
                model=self.model,
                messages=messages,
                temperature=self.temperature,
                seed=self.seed,
            )
        )

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise EmptyText("cannot embed empty text")
        data = self._post("/api/embeddings", {"model": self.model, "prompt": text})
        return np.asarray(data.get("embedding", []), dtype=np.float64)


_FENCE_OPEN = re.compile(r"^```([A-Za-z0-9_+.-]*)\s*$")
_FENCE_CLOSE = re.compile(r"^```\s*$")


def extract_code(reply: str) -> GeneratedScript:
    """Pull the first complete fenced code block, or fall back to the reply.

    Only complete open/close fence pairs count, so extraction is idempotent
    on its own output.
    """
    if not reply:
        raise EmptyReply("model reply is empty")
    lines = reply.split("\n")
    fences_seen = 0
    i = 0
    while i < len(lines):
        opened = _FENCE_OPEN.match(lines[i])
        if opened:
            for j in range(i + 1, len(lines)):
                if _FENCE_CLOSE.match(lines[j]):
                    return GeneratedScript(
                        source="\n".join(lines[i + 1 : j]),
                        language_tag=opened.group(1).lower() or "python",
                        provenance=f"fenced_block:{fences_seen}",
                    )
            fences_seen += 1
        i += 1
    return GeneratedScript(
        source=reply, language_tag="python", provenance="whole_reply"
    )


def simplify_prompt(detailed: str, gateway: ModelGateway, template: str) -> str:
    """Have the model summarize a detailed prompt into a simple one."""
    if not detailed or not detailed.strip():
        raise EmptyPrompt("nothing to simplify")
    return gateway.chat_text(template.format(prompt=detailed))
