"""Deterministic scripted model server for reproducible runs.

Speaks the same wire shape as the real local server. Chat replies are
resolved, in order, by (1) SHA-256 of the outgoing prompt, (2) substring
rules, (3) a default reply. A reply value may be a list, consumed one
element per request, sticking on the last. Embeddings come from the same
hash projection as :class:`promptground.knowledge.HashEmbedder`, so the
HTTP route and the in-process route agree vector-for-vector.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .knowledge import hash_embed


def prompt_sha256(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class _ReplyScript:
    """Reply lookup plus per-key consumption counters (thread-safe)."""

    def __init__(self, replies, rules, default_reply):
        self.replies = dict(replies or {})
        self.rules = list(rules or [])
        self.default_reply = default_reply
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def _take(self, key: str, value) -> str:
        if isinstance(value, str):
            return value
        with self._lock:
            n = self._counts.get(key, 0)
            self._counts[key] = n + 1
        return value[min(n, len(value) - 1)]

    def resolve(self, prompt: str) -> str:
        digest = prompt_sha256(prompt)
        if digest in self.replies:
            return self._take(digest, self.replies[digest])
        for i, (needle, value) in enumerate(self.rules):
            if needle in prompt:
                return self._take(f"rule:{i}", value)
        return self._take("default", self.default_reply)


class MockModelServer:
    """In-process HTTP double for the model server.

    ``fail_next(n)`` makes the server drop the next ``n`` connections
    without a response, for retry/fault-injection tests.
    """

    def __init__(
        self,
        replies: dict[str, str | list[str]] | None = None,
        rules: list[tuple[str, str | list[str]]] | None = None,
        default_reply: str = "",
        echo_default: bool = False,
        chat_delay_s: float = 0.0,
        embed_dim: int = 384,
        known_models: set[str] | None = None,
        port: int = 0,
    ):
        self.script = _ReplyScript(replies, rules, default_reply)
        self.echo_default = echo_default
        self.chat_delay_s = chat_delay_s
        self.embed_dim = embed_dim
        self.known_models = known_models
        self.seen_prompts: list[str] = []
        self._fail_lock = threading.Lock()
        self._fail_remaining = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # quiet
                pass

            def _drop(self) -> bool:
                with outer._fail_lock:
                    if outer._fail_remaining > 0:
                        outer._fail_remaining -= 1
                        return True
                return False

            def _send(self, code: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                if self._drop():
                    self.connection.close()
                    return
                length = int(self.headers.get("Content-Length", 0))
                try:
                    req = json.loads(self.rfile.read(length) or b"{}")
                except json.JSONDecodeError:
                    self._send(400, {"error": "bad json"})
                    return
                model = req.get("model", "")
                if outer.known_models is not None and model not in outer.known_models:
                    self._send(404, {"error": f"model '{model}' not found"})
                    return
                if self.path == "/api/chat":
                    if outer.chat_delay_s:
                        time.sleep(outer.chat_delay_s)
                    messages = req.get("messages", [])
                    prompt = messages[-1].get("content", "") if messages else ""
                    outer.seen_prompts.append(prompt)
                    reply = outer.script.resolve(prompt)
                    if not reply and outer.echo_default:
                        reply = prompt
                    self._send(
                        200, {"message": {"role": "assistant", "content": reply}}
                    )
                elif self.path == "/api/embeddings":
                    text = req.get("prompt", "")
                    if not text:
                        self._send(400, {"error": "empty prompt"})
                        return
                    vec = hash_embed(text, outer.embed_dim)
                    self._send(200, {"embedding": vec.tolist()})
                else:
                    self._send(404, {"error": f"no handler for {self.path}"})

        self._server = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._thread = threading.Thread(
            target=self._server.serve_forever, daemon=True
        )

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self._server.server_port}"

    def fail_next(self, n: int = 1) -> None:
        with self._fail_lock:
            self._fail_remaining = n

    def start(self) -> "MockModelServer":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "MockModelServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def load_reply_script(path: str | Path) -> tuple[dict, list, str]:
    """Read a reply script file: {"replies": {...}, "rules": [[needle, reply]...], "default": str}."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return (
        doc.get("replies", {}),
        [tuple(r) for r in doc.get("rules", [])],
        doc.get("default", ""),
    )
