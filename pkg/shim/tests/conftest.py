import pytest
from fastapi.testclient import TestClient

from logit_shim.config import PromptTemplate
from logit_shim.model import ContextOverflowError
from logit_shim.server import create_app

# Matches the recorded golden response: six fixed logits, fixed token count.
CANNED_LOGITS = [-1.25, 0.0, 3.5, 0.1, -0.017578125, 2.2250738585072014e-308]
CANNED_TOKEN_COUNT = 148


class CannedScorer:
    """Protocol test double: no model, deterministic canned output."""

    vocab_size = 6
    model_id = "canned"

    def __init__(self, max_context_tokens=10_000):
        self.max_context_tokens = max_context_tokens
        self.calls = []

    def score_text(self, prompt, partial_output):
        self.calls.append((prompt, tuple(partial_output)))
        tokens = len(prompt.split()) + len(partial_output)
        if tokens > self.max_context_tokens:
            raise ContextOverflowError(tokens, self.max_context_tokens)
        return list(CANNED_LOGITS), CANNED_TOKEN_COUNT


@pytest.fixture
def scorer():
    return CannedScorer()


@pytest.fixture
def client(scorer):
    return TestClient(create_app(scorer, PromptTemplate()))
