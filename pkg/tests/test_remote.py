import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np
import pytest

from parallel_icl.backends import ContextRequest, RemoteBackend
from parallel_icl.backends.remote import parse_logits_response, serialize_request
from parallel_icl.decoding import DecodeConfig, decode_full_context
from parallel_icl.errors import ProtocolError, RetryableBackendError

from conftest import make_demo, make_query

DATA = Path(__file__).parent / "data"


class StubServer:
    """Minimal wire-protocol server with scriptable behaviour."""

    def __init__(self, vocab_size=4, logits_fn=None, fail_first=0, status=200):
        self.vocab_size = vocab_size
        self.logits_fn = logits_fn or (lambda body: [0.0] * self.vocab_size)
        self.fail_first = fail_first
        self.status = status
        self.request_count = 0
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_GET(self):
                if self.path != "/v1/handshake":
                    self.send_error(404)
                    return
                body = json.dumps(
                    {"vocab_size": outer.vocab_size, "model_id": "stub"}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

            def do_POST(self):
                if self.path != "/v1/logits":
                    self.send_error(404)
                    return
                outer.request_count += 1
                if outer.request_count <= outer.fail_first:
                    self.send_error(500)
                    return
                if outer.status != 200:
                    self.send_error(outer.status)
                    return
                length = int(self.headers["Content-Length"])
                request_body = self.rfile.read(length).decode("utf-8")
                logits = outer.logits_fn(request_body)
                body = json.dumps(
                    {"logits": logits, "token_count": 10 + length}
                ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    @property
    def endpoint(self):
        host, port = self.server.server_address
        return f"http://{host}:{port}"

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


def simple_request(partial=()):
    demo = make_demo(0, [1.0], payload={"question": "What is 2+2?", "answer": "4"})
    query = make_query([1.0], payload={"question": "What is 3+3?"})
    return ContextRequest((demo,), query, partial)


class TestWireSerialization:
    def golden_request(self):
        demos = (
            make_demo(0, [1.0], payload={"question": "What is 2+2?", "answer": "4"}),
            make_demo(1, [1.0], payload={"question": "What is 5+1?", "answer": "6"}),
        )
        query = make_query([1.0], payload={"question": "What is 3+3?"})
        return ContextRequest(demos, query, (1, 2))

    def test_request_matches_golden_transcript(self):
        golden = (DATA / "golden_request.json").read_text(encoding="utf-8").strip()
        assert serialize_request(self.golden_request()) == golden

    def test_golden_response_parses_and_round_trips(self):
        golden = (DATA / "golden_response.json").read_text(encoding="utf-8").strip()
        logits, token_count = parse_logits_response(golden, vocab_size=6)
        assert token_count == 148
        # Full round-trip precision: re-serializing reproduces the bytes.
        rebuilt = json.dumps(
            {"logits": [float(v) for v in logits], "token_count": token_count},
            separators=(",", ":"),
        )
        assert rebuilt == golden

    def test_response_validation(self):
        with pytest.raises(ProtocolError):
            parse_logits_response('{"logits": [0.0, 1.0], "token_count": 3}', vocab_size=3)
        with pytest.raises(ProtocolError):
            parse_logits_response('{"logits": [0.0, null], "token_count": 3}', vocab_size=2)
        with pytest.raises(ProtocolError):
            parse_logits_response('{"token_count": 3}', vocab_size=2)
        with pytest.raises(ProtocolError):
            parse_logits_response("not json", vocab_size=2)


class TestRemoteBackend:
    def test_handshake_and_score(self):
        with StubServer(vocab_size=4) as server:
            backend = RemoteBackend(server.endpoint)
            assert backend.vocabulary().size == 4
            assert backend.model_id == "stub"
            logits = backend.score(simple_request())
            np.testing.assert_array_equal(logits, np.zeros(4))

    def test_every_response_must_match_handshake_size(self):
        with StubServer(vocab_size=32, logits_fn=lambda body: [0.0] * 31) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError):
                backend.score(simple_request())

    def test_non_finite_logits_are_fatal(self):
        with StubServer(vocab_size=2, logits_fn=lambda body: [0.0, float("nan")]) as server:
            backend = RemoteBackend(server.endpoint)
            with pytest.raises(ProtocolError):
                backend.score(simple_request())

    def test_transient_failures_are_retried(self):
        with StubServer(vocab_size=2, fail_first=2) as server:
            backend = RemoteBackend(server.endpoint, max_retries=2)
            logits = backend.score(simple_request())
            assert logits.shape == (2,)

    def test_persistent_failure_is_retryable_error(self):
        with StubServer(vocab_size=2, fail_first=100) as server:
            backend = RemoteBackend(server.endpoint, max_retries=1)
            with pytest.raises(RetryableBackendError):
                backend.score(simple_request())

    def test_client_error_is_fatal(self):
        with StubServer(vocab_size=2, status=422) as server:
            backend = RemoteBackend(server.endpoint, max_retries=1)
            with pytest.raises(ProtocolError):
                backend.score(simple_request())

    def test_identical_requests_hit_cache(self):
        with StubServer(vocab_size=2) as server:
            backend = RemoteBackend(server.endpoint)
            backend.score(simple_request())
            backend.score(simple_request())
            assert server.request_count == 1
            assert backend.token_count(simple_request()) > 0
            assert server.request_count == 1  # token_count reuses the cached reply

    def test_echo_stub_decodes_lowest_token(self):
        # Fixed all-zero logits force the greedy tie-break to token 0 forever.
        with StubServer(vocab_size=8) as server:
            backend = RemoteBackend(server.endpoint)
            demo = make_demo(0, [1.0], payload={"question": "q", "answer": "a"})
            query = make_query([1.0], payload={"question": "q2"})
            tokens, trace = decode_full_context(
                backend, [demo], query, DecodeConfig(max_new_tokens=3, eos_token=None)
            )
            assert tokens == [0, 0, 0]
            assert len(trace.steps) == 3

    def test_unreachable_endpoint(self):
        with pytest.raises(RetryableBackendError):
            RemoteBackend("http://127.0.0.1:9", timeout=0.2)
