"""HTTP client for remote logit servers.

Wire protocol (JSON over HTTP, UTF-8):

* ``GET /v1/handshake`` -> ``{"vocab_size": int, "model_id": str}``
* ``POST /v1/logits`` with
  ``{"demonstrations": [{"payload": ...}], "query": {"payload": ...},
  "partial_output": [int]}`` -> ``{"logits": [float], "token_count": int}``

Only payloads travel over the wire; feature vectors stay engine-side. Floats
are serialized with full round-trip precision (the shortest representation
that parses back to the identical double).
"""

from __future__ import annotations

import json
import threading
from collections import OrderedDict

import numpy as np
import requests

from ..core import Vocabulary
from ..errors import ProtocolError, RetryableBackendError
from .base import ContextRequest, LogitProvider

HANDSHAKE_PATH = "/v1/handshake"
LOGITS_PATH = "/v1/logits"


def serialize_request(request: ContextRequest) -> str:
    """Canonical JSON body for a logits request (stable key order, compact)."""
    body = {
        "demonstrations": [{"payload": dict(d.payload)} for d in request.demonstrations],
        "query": {"payload": dict(request.query.payload)},
        "partial_output": list(request.partial_output),
    }
    return json.dumps(body, ensure_ascii=False, separators=(",", ":"))


def parse_logits_response(text: str, vocab_size: int) -> tuple[np.ndarray, int]:
    """Validate and decode a logits response body."""
    try:
        payload = json.loads(text)
        logits = np.asarray(payload["logits"], dtype=np.float64)
        token_count = int(payload["token_count"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"malformed logits response: {exc}") from None
    if logits.ndim != 1 or logits.size != vocab_size:
        raise ProtocolError(
            f"server returned {logits.size} logits, handshake promised {vocab_size}"
        )
    if not np.all(np.isfinite(logits)):
        raise ProtocolError("server returned non-finite logits")
    if token_count < 0:
        raise ProtocolError(f"negative token_count {token_count}")
    return logits, token_count


class RemoteBackend(LogitProvider):
    """Scores requests against a logit server speaking the wire protocol.

    Transport failures are retried ``max_retries`` times and then raised as
    retryable errors; protocol violations (wrong vocabulary size, non-finite
    logits) are fatal. Identical requests are served from a small cache,
    which is sound because providers are required to be deterministic.
    """

    concurrent_safe = True

    def __init__(
        self,
        endpoint: str,
        timeout: float = 30.0,
        max_retries: int = 2,
        max_in_flight: int = 8,
        cache_size: int = 256,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.max_retries = max_retries
        self._session = session or requests.Session()
        self._in_flight = threading.Semaphore(max_in_flight)
        self._cache: OrderedDict[str, tuple[np.ndarray, int]] = OrderedDict()
        self._cache_size = cache_size
        self._cache_lock = threading.Lock()
        self._vocab, self.model_id = self._handshake()

    def _handshake(self) -> tuple[Vocabulary, str]:
        try:
            response = self._session.get(self.endpoint + HANDSHAKE_PATH, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RetryableBackendError(f"handshake failed: {exc}") from exc
        if response.status_code != 200:
            raise ProtocolError(f"handshake returned HTTP {response.status_code}")
        try:
            payload = response.json()
            vocab_size = int(payload["vocab_size"])
            model_id = str(payload["model_id"])
        except (ValueError, KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed handshake: {exc}") from None
        return Vocabulary(vocab_size), model_id

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def _post(self, body: str) -> tuple[np.ndarray, int]:
        with self._cache_lock:
            if body in self._cache:
                self._cache.move_to_end(body)
                return self._cache[body]
        last_error: Exception | None = None
        for _ in range(self.max_retries + 1):
            try:
                with self._in_flight:
                    response = self._session.post(
                        self.endpoint + LOGITS_PATH,
                        data=body.encode("utf-8"),
                        headers={"Content-Type": "application/json; charset=utf-8"},
                        timeout=self.timeout,
                    )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = RetryableBackendError(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"logits request rejected with HTTP {response.status_code}: "
                    f"{response.text[:200]}"
                )
            result = parse_logits_response(response.text, self._vocab.size)
            with self._cache_lock:
                self._cache[body] = result
                while len(self._cache) > self._cache_size:
                    self._cache.popitem(last=False)
            return result
        raise RetryableBackendError(f"logits request failed after retries: {last_error}")

    def score(self, request: ContextRequest) -> np.ndarray:
        logits, _ = self._post(serialize_request(request))
        return logits

    def token_count(self, request: ContextRequest) -> int:
        _, count = self._post(serialize_request(request))
        return count


def remote_score(backend: RemoteBackend, request: ContextRequest) -> np.ndarray:
    """Functional alias for ``backend.score``."""
    return backend.score(request)
