"""Exactly solvable task-mixture backend.

A finite family of latent tasks, each a deterministic map from query symbols
to answer symbols, observed through symmetric label noise. The posterior over
tasks and the next-token predictive are computable in closed form, which
makes this backend the verification oracle for the whole decode pipeline:
every probability it emits can be checked by brute-force enumeration.

Answers are single tokens; after the first generated token the model forces
end-of-sequence, so the full multi-step decode loop is still exercised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Vocabulary
from ..errors import InvalidInputError
from .base import ContextRequest, LogitProvider

# Probability reserved for the "wrong" side of the forced end-of-sequence
# step; keeps every logit finite.
EOS_RESERVE = 1e-9

# Context-length accounting defaults, sized to match published token counts
# for 32-shot multi-image prompts (thousands of visual tokens per example).
DEFAULT_TOKENS_PER_DEMO = 2600
DEFAULT_TOKENS_PER_QUERY = 2557


@dataclass(frozen=True)
class SyntheticTaskModel(LogitProvider):
    """Bayesian posterior-predictive over a finite set of symbol-mapping tasks.

    ``task_tables[t][q]`` is the answer symbol task ``t`` assigns to query
    symbol ``q``. A demonstration's answer matches its task's table with
    probability ``1 - label_noise`` and lands uniformly on any other answer
    otherwise. The vocabulary is the answer symbols followed by one
    end-of-sequence token (id == n_answers).
    """

    n_tasks: int
    n_query_symbols: int
    n_answers: int
    task_tables: tuple[tuple[int, ...], ...]
    label_noise: float
    tokens_per_demo: int = DEFAULT_TOKENS_PER_DEMO
    tokens_per_query: int = DEFAULT_TOKENS_PER_QUERY

    concurrent_safe = True

    def __post_init__(self):
        if self.n_tasks < 1:
            raise InvalidInputError("need at least one task")
        if self.n_answers < 2:
            raise InvalidInputError("need at least two answer symbols")
        if self.n_query_symbols < 1:
            raise InvalidInputError("need at least one query symbol")
        if not 0.0 < self.label_noise < 0.5:
            raise InvalidInputError(
                f"label_noise must lie in (0, 0.5), got {self.label_noise}"
            )
        if self.tokens_per_demo < 1 or self.tokens_per_query < 1:
            raise InvalidInputError("token accounting constants must be positive")
        tables = tuple(tuple(int(a) for a in row) for row in self.task_tables)
        if len(tables) != self.n_tasks:
            raise InvalidInputError(f"expected {self.n_tasks} task tables, got {len(tables)}")
        for t, row in enumerate(tables):
            if len(row) != self.n_query_symbols:
                raise InvalidInputError(
                    f"task {t} table covers {len(row)} symbols, expected {self.n_query_symbols}"
                )
            if any(not 0 <= a < self.n_answers for a in row):
                raise InvalidInputError(f"task {t} table has out-of-range answers")
        object.__setattr__(self, "task_tables", tables)

    @property
    def eos_token(self) -> int:
        return self.n_answers

    def vocabulary(self) -> Vocabulary:
        labels = tuple(f"answer_{a}" for a in range(self.n_answers)) + ("<eos>",)
        return Vocabulary(self.n_answers + 1, labels)

    def _symbol(self, payload, key: str, item_id: str) -> int:
        try:
            value = int(payload[key])
        except (KeyError, TypeError, ValueError):
            raise InvalidInputError(f"{item_id!r}: payload lacks integer {key!r}") from None
        limit = self.n_query_symbols if key == "query_symbol" else self.n_answers
        if not 0 <= value < limit:
            raise InvalidInputError(f"{item_id!r}: {key} {value} out of range 0..{limit - 1}")
        return value

    def posterior(self, request: ContextRequest) -> np.ndarray:
        """Posterior over tasks given the request's demonstrations."""
        matches = np.zeros(self.n_tasks, dtype=np.int64)
        for demo in request.demonstrations:
            q = self._symbol(demo.payload, "query_symbol", demo.id)
            a = self._symbol(demo.payload, "answer_symbol", demo.id)
            for t in range(self.n_tasks):
                if self.task_tables[t][q] == a:
                    matches[t] += 1
        n = len(request.demonstrations)
        log_match = np.log(1.0 - self.label_noise)
        log_miss = np.log(self.label_noise / (self.n_answers - 1))
        # Integer match counts keep the log-likelihood exact to a couple of ulps
        # regardless of how many demonstrations there are.
        log_lik = matches * log_match + (n - matches) * log_miss
        log_lik -= log_lik.max()
        lik = np.exp(log_lik)
        return lik / lik.sum()

    def predictive(self, request: ContextRequest) -> np.ndarray:
        """Posterior-predictive distribution over answer symbols."""
        post = self.posterior(request)
        q = self._symbol(request.query.payload, "query_symbol", request.query.id)
        miss = self.label_noise / (self.n_answers - 1)
        probs = np.full(self.n_answers, 0.0)
        for t in range(self.n_tasks):
            answer = self.task_tables[t][q]
            probs += post[t] * miss
            probs[answer] += post[t] * (1.0 - self.label_noise - miss)
        return probs

    def score(self, request: ContextRequest) -> np.ndarray:
        if request.partial_output:
            # Single-token answers: anything after the first token is eos.
            probs = np.full(self.n_answers + 1, EOS_RESERVE / self.n_answers)
            probs[self.eos_token] = 1.0 - EOS_RESERVE
        else:
            predictive = self.predictive(request)
            probs = np.empty(self.n_answers + 1)
            probs[: self.n_answers] = (1.0 - EOS_RESERVE) * predictive
            probs[self.eos_token] = EOS_RESERVE
        return np.log(probs)

    def token_count(self, request: ContextRequest) -> int:
        return (
            self.tokens_per_demo * len(request.demonstrations)
            + self.tokens_per_query
            + len(request.partial_output)
        )


def synthetic_score(model: SyntheticTaskModel, request: ContextRequest) -> np.ndarray:
    """Functional alias for ``model.score``."""
    return model.score(request)
