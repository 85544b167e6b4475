from __future__ import annotations

import json
import socket
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from mprbench.store import EmbeddingMatrix, ModelCard, Side, l2_normalize


@pytest.fixture
def rng():
    return np.random.default_rng(20250810)


def make_matrix(rng, count, dim, side=Side.GALLERY, prefix="id"):
    """Random unit-norm matrix with predictable ids."""
    rows = rng.standard_normal((count, dim)).astype(np.float32)
    matrix = EmbeddingMatrix(ids=[f"{prefix}{i:05d}" for i in range(count)], rows=rows, side=side)
    return l2_normalize(matrix)


def make_card(name="test-model", params=100.0, resolution=224):
    return ModelCard(
        name=name,
        family="test",
        params_millions=params,
        pretrain_dataset="synthetic",
        resolution_px=resolution,
        backbone=name,
    )


class StubEndpoint:
    """Local chat-completion endpoint with a scripted response queue.

    Each script entry is either a dict (sent as JSON with status 200), a
    tuple (status, raw_body_str), or the string "reset" to slam the
    connection. Once the queue drains, the last entry repeats.
    """

    def __init__(self, script):
        self.script = list(script)
        self.requests: list[dict] = []
        self._lock = threading.Lock()
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length)) if length else {}
                with outer._lock:
                    outer.requests.append(body)
                    entry = outer.script.pop(0) if len(outer.script) > 1 else outer.script[0]
                if entry == "reset":
                    self.connection.close()
                    return
                if isinstance(entry, tuple):
                    status, raw = entry
                else:
                    status, raw = 200, json.dumps(entry)
                data = raw.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/chat/completions"

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._server.shutdown()
        self._server.server_close()


def chat_body(label):
    """Well-formed completion whose assistant content is {"label": ...}."""
    return {"choices": [{"message": {"content": json.dumps({"label": label})}}]}


def free_port_url():
    """A URL nothing listens on, for transport-failure tests."""
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    return f"http://127.0.0.1:{port}/v1/chat/completions"
