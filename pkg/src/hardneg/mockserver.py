"""Deterministic in-process mock of the chat and embedding endpoints.

Serves POST /v1/chat/completions and POST /embed on a local port, capturing
every request body so tests can assert exactly what went over the wire.

Chat behavior is either scripted (a fixed sequence of canned replies and
HTTP error codes, consumed one per request) or, by default, content-keyed:
the reply is derived from a hash of (model, user message), so identical
requests always get identical five-passage replies, across runs and
processes.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .embedding import hashed_bow_vector

_WORDS = (
    "retrieval ranking corpus passage query index lexical neural vector token "
    "document relevance scoring evidence contrast sample benchmark dataset model "
    "signal context answer sentence measure baseline method study result analysis "
    "system search term weight match feature language statistic estimate record"
).split()


def canned_passages(model: str, user_content: str, words_per_passage: int = 80) -> str:
    """Deterministic five-passage reply keyed on (model, user message)."""
    digest = hashlib.sha256(f"{model}\x00{user_content}".encode("utf-8")).digest()
    rng = random.Random(int.from_bytes(digest[:8], "big"))
    blocks = []
    for i in range(1, 6):
        text = " ".join(rng.choice(_WORDS) for _ in range(words_per_passage))
        blocks.append(f"Passage {i}: {text}")
    return "\n\n".join(blocks)


class MockProviderServer:
    """Threaded HTTP server; use as a context manager or start()/stop()."""

    def __init__(
        self,
        chat_script: list[str | dict] | None = None,
        embed_dimension: int = 256,
        embed_failures: int = 0,
    ):
        self.chat_script = list(chat_script) if chat_script is not None else None
        self.embed_dimension = embed_dimension
        self.embed_failures = embed_failures
        self.chat_requests: list[dict] = []
        self.embed_requests: list[dict] = []
        self._lock = threading.Lock()
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None

    @property
    def url(self) -> str:
        assert self._server is not None, "server not started"
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start(self) -> "MockProviderServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # silence default stderr logging
                pass

            def _reply(self, status: int, payload: dict) -> None:
                body = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_GET(self):
                if self.path == "/health":
                    self._reply(200, {"status": "ok"})
                else:
                    self._reply(404, {"error": "not found"})

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                request = json.loads(self.rfile.read(length) or b"{}")
                if self.path == "/v1/chat/completions":
                    self._handle_chat(request)
                elif self.path == "/embed":
                    self._handle_embed(request)
                else:
                    self._reply(404, {"error": "not found"})

            def _handle_chat(self, request: dict) -> None:
                with outer._lock:
                    outer.chat_requests.append(request)
                    entry = None
                    if outer.chat_script is not None:
                        if not outer.chat_script:
                            self._reply(500, {"error": "script exhausted"})
                            return
                        entry = outer.chat_script.pop(0)
                if isinstance(entry, dict):
                    self._reply(entry.get("status", 500), {"error": entry.get("body", "scripted error")})
                    return
                if entry is None:
                    user = next(
                        (m["content"] for m in request.get("messages", []) if m.get("role") == "user"),
                        "",
                    )
                    content = canned_passages(request.get("model", ""), user)
                else:
                    content = entry
                self._reply(
                    200,
                    {
                        "id": "mock-chat",
                        "object": "chat.completion",
                        "model": request.get("model", ""),
                        "choices": [
                            {
                                "index": 0,
                                "message": {"role": "assistant", "content": content},
                                "finish_reason": "stop",
                            }
                        ],
                    },
                )

            def _handle_embed(self, request: dict) -> None:
                with outer._lock:
                    outer.embed_requests.append(request)
                    if outer.embed_failures > 0:
                        outer.embed_failures -= 1
                        self._reply(503, {"error": "temporarily unavailable"})
                        return
                vectors = [
                    {"index": i, "embedding": hashed_bow_vector(text, outer.embed_dimension)}
                    for i, text in enumerate(request.get("input", []))
                ]
                self._reply(200, {"data": vectors, "dim": outer.embed_dimension})

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._server = None

    def __enter__(self) -> "MockProviderServer":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()
