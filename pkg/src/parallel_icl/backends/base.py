"""The logit-provider contract every backend implements."""

from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from ..core import Demonstration, Query, TokenId, Vocabulary


@dataclass(frozen=True)
class ContextRequest:
    """Everything a backend needs to score the next token.

    ``demonstrations`` may be empty (zero-shot). The partial output is the
    sequence of tokens already generated for this query.
    """

    demonstrations: tuple[Demonstration, ...]
    query: Query
    partial_output: tuple[TokenId, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "demonstrations", tuple(self.demonstrations))
        object.__setattr__(self, "partial_output", tuple(int(t) for t in self.partial_output))


class LogitProvider(abc.ABC):
    """Scores context requests into next-token logits.

    Implementations must be deterministic: identical requests yield identical
    logits. ``concurrent_safe`` declares whether ``score`` may be invoked from
    many workers simultaneously; when False the engine serializes calls.
    """

    concurrent_safe: bool = False

    @abc.abstractmethod
    def score(self, request: ContextRequest) -> np.ndarray:
        """Next-token logits for the request, length == vocabulary().size."""

    @abc.abstractmethod
    def vocabulary(self) -> Vocabulary:
        """The token id space this provider scores over."""

    @abc.abstractmethod
    def token_count(self, request: ContextRequest) -> int:
        """Context length of the request in backend tokens (cost-model input)."""
