"""Deterministic in-process completion endpoint for offline pipelines.

Serves the completion wire protocol from a canned variant table keyed by
prompt substring.  Temperature 0 always returns n copies of the first
variant; any other temperature cycles through the variant list, so a
"sampled" set is reproducible run over run.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional


class MockCompletionServer:
    """Context-managed local HTTP endpoint backed by fixture solutions.

    variants maps a substring of the expected prompt (usually the problem
    title) to an ordered list of solution sources.  fail_times makes the
    first k requests answer 500, for exercising retry paths.
    """

    def __init__(
        self,
        variants: dict[str, list[str]],
        fail_times: int = 0,
        default: Optional[list[str]] = None,
    ):
        self.variants = dict(variants)
        self.default = default
        self._lock = threading.Lock()
        self._fail_remaining = fail_times
        self.requests_served = 0
        self._server: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/completions"

    def start(self) -> "MockCompletionServer":
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, fmt, *args):
                pass

            def do_POST(self):
                length = int(self.headers.get("Content-Length", "0"))
                try:
                    request = json.loads(self.rfile.read(length))
                except json.JSONDecodeError:
                    self._reply(400, {"error": "bad json"})
                    return
                with outer._lock:
                    if outer._fail_remaining > 0:
                        outer._fail_remaining -= 1
                        self._reply(500, {"error": "transient"})
                        return
                    outer.requests_served += 1
                prompt = str(request.get("prompt", ""))
                sources = outer._lookup(prompt)
                if sources is None:
                    self._reply(400, {"error": "no canned variant for prompt"})
                    return
                n = int(request.get("n", 1))
                temperature = float(request.get("temperature", 0.0))
                if temperature == 0.0:
                    chosen = [sources[0]] * n
                else:
                    chosen = [sources[i % len(sources)] for i in range(n)]
                texts = [f"```python\n{source}\n```" for source in chosen]
                self._reply(200, {"choices": [{"text": t} for t in texts]})

            def _reply(self, status: int, payload: dict):
                body = json.dumps(payload).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def _lookup(self, prompt: str) -> Optional[list[str]]:
        best_key = None
        for key in self.variants:
            if key in prompt and (best_key is None or len(key) > len(best_key)):
                best_key = key
        if best_key is not None:
            return self.variants[best_key]
        return self.default

    def close(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._thread.join(timeout=5)

    def __enter__(self) -> "MockCompletionServer":
        return self.start()

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()
