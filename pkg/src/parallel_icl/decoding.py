"""Greedy autoregressive decode loops.

``decode_parallel`` scores every chunk of a plan per step and fuses the chunk
logits into one next-token distribution; ``decode_full_context`` runs the
single-context baseline (and doubles as the reference pass for the relevance
metric). Each step is a barrier: all chunk scores must complete before
fusion, and steps are strictly sequential.
"""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, field

import numpy as np

from .backends.base import ContextRequest, LogitProvider
from .backends.cost import CostModel
from .compilation import compile_logits
from .core import ChunkPlan, Demonstration, Query, TokenId, softmax
from .errors import BackendError, DecodeStepError, InvalidInputError


@dataclass(frozen=True)
class DecodeConfig:
    max_new_tokens: int = 1024
    eos_token: TokenId | None = None
    strategy: str = "greedy"
    record_trace: bool = True

    def __post_init__(self):
        if self.max_new_tokens < 1:
            raise InvalidInputError("max_new_tokens must be >= 1")
        if self.strategy != "greedy":
            raise InvalidInputError(f"unsupported decoding strategy {self.strategy!r}")


@dataclass
class DecodeStep:
    chosen_token: TokenId
    step_cost: float | None = None
    compiled_logits: np.ndarray | None = None
    compiled_distribution: np.ndarray | None = None
    chunk_distributions: list[np.ndarray] | None = None


@dataclass
class DecodeTrace:
    """Per-step record of one decode run.

    ``prefill_lengths`` are the backend token counts of each chunk context at
    step zero, which is exactly what the latency simulation needs.
    """

    query_id: str
    n_chunks: int
    weights: np.ndarray
    plan: ChunkPlan | None
    prefill_lengths: list[int] = field(default_factory=list)
    steps: list[DecodeStep] = field(default_factory=list)

    @property
    def tokens(self) -> list[TokenId]:
        return [step.chosen_token for step in self.steps]


def greedy_select(distribution) -> TokenId:
    """Argmax token id; ties resolve toward the lowest id."""
    arr = np.asarray(distribution, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("distribution must be a non-empty vector")
    return int(np.argmax(arr))


def _decode_loop(
    provider: LogitProvider,
    chunk_demos: list[list[Demonstration]],
    weights: np.ndarray,
    query: Query,
    cfg: DecodeConfig,
    plan: ChunkPlan | None,
    executor: Executor | None,
    cost_model: CostModel | None,
) -> tuple[list[TokenId], DecodeTrace]:
    vocab = provider.vocabulary()
    if cfg.eos_token is not None and not 0 <= cfg.eos_token < vocab.size:
        raise InvalidInputError(f"eos token {cfg.eos_token} outside vocabulary of {vocab.size}")
    n_chunks = len(chunk_demos)
    trace = DecodeTrace(query_id=query.id, n_chunks=n_chunks, weights=np.asarray(weights), plan=plan)

    output: list[TokenId] = []
    step_cost: float | None = None
    for step_index in range(cfg.max_new_tokens):
        requests = [
            ContextRequest(tuple(demos), query, tuple(output)) for demos in chunk_demos
        ]
        if step_index == 0:
            trace.prefill_lengths = [provider.token_count(r) for r in requests]
            if cost_model is not None:
                step_cost = cost_model.decode_coeff * float(max(trace.prefill_lengths))
                if n_chunks > 1:
                    step_cost += cost_model.compile_overhead
        try:
            if executor is not None and provider.concurrent_safe and n_chunks > 1:
                chunk_logits = list(executor.map(provider.score, requests))
            else:
                chunk_logits = [provider.score(r) for r in requests]
        except BackendError as exc:
            # One failed chunk aborts the query; silently re-weighting the
            # survivors would change the estimator.
            raise DecodeStepError(step_index, -1, str(exc)) from exc
        for k, logits in enumerate(chunk_logits):
            if np.asarray(logits).shape != (vocab.size,):
                raise DecodeStepError(
                    step_index, k, f"backend returned {np.asarray(logits).shape} logits"
                )
        fused = compile_logits(chunk_logits, weights)
        distribution = softmax(fused)
        token = greedy_select(distribution)

        record = DecodeStep(chosen_token=token, step_cost=step_cost)
        if cfg.record_trace:
            record.compiled_logits = fused
            record.compiled_distribution = distribution
            record.chunk_distributions = [softmax(l) for l in chunk_logits]
        trace.steps.append(record)

        if cfg.eos_token is not None and token == cfg.eos_token:
            break
        output.append(token)
    return output, trace


def decode_parallel(
    provider: LogitProvider,
    demos: list[Demonstration],
    query: Query,
    plan: ChunkPlan,
    cfg: DecodeConfig,
    *,
    executor: Executor | None = None,
    cost_model: CostModel | None = None,
) -> tuple[list[TokenId], DecodeTrace]:
    """Chunk-ensemble greedy decoding under a weighted plan.

    The generated sequence excludes the eos token itself. Chunk evaluations
    within a step may run on the executor when the provider allows it; the
    fused logits are reduced in fixed chunk order either way, so results do
    not depend on completion order.
    """
    if plan.weights is None:
        raise InvalidInputError("chunk plan has no weights; run compute_weights first")
    chunk_demos = plan.chunk_lists(demos)
    return _decode_loop(
        provider, chunk_demos, plan.weights, query, cfg, plan, executor, cost_model
    )


def decode_full_context(
    provider: LogitProvider,
    demos: list[Demonstration],
    query: Query,
    cfg: DecodeConfig,
    *,
    cost_model: CostModel | None = None,
) -> tuple[list[TokenId], DecodeTrace]:
    """Single-context greedy decoding over all demonstrations (possibly none)."""
    return _decode_loop(
        provider,
        [list(demos)],
        np.array([1.0]),
        query,
        cfg,
        None,
        None,
        cost_model,
    )
