"""Per-chunk ensemble weights and logit-level fusion.

Fusing is a weighted sum of raw chunk logits; taking the softmax of that sum
is algebraically identical to a normalized weighted product of the per-chunk
softmax distributions, which is why the engine never needs to form per-chunk
probabilities on the decode path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FEATURE_MODES,
    MULTIMODAL,
    ChunkPlan,
    Demonstration,
    Query,
    cosine_similarity,
    softmax,
)
from .chunking import build_feature
from .errors import InvalidInputError

SIMILARITY = "similarity"
UNIFORM = "uniform"
WEIGHTINGS = (SIMILARITY, UNIFORM)


@dataclass(frozen=True)
class CompilationConfig:
    weighting: str = SIMILARITY
    # Divides chunk similarities before their softmax; 1.0 leaves the
    # weighting untouched, smaller values sharpen it.
    temperature: float = 1.0
    feature_mode: str = MULTIMODAL

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise InvalidInputError(
                f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}"
            )
        if self.temperature <= 0:
            raise InvalidInputError("temperature must be > 0")
        if self.feature_mode not in FEATURE_MODES:
            raise InvalidInputError(f"unknown feature mode {self.feature_mode!r}")


def chunk_similarity(query: Query, chunk: list[Demonstration], mode: str = MULTIMODAL) -> float:
    """Mean cosine similarity between the query and each chunk member."""
    if not chunk:
        raise InvalidInputError("chunk_similarity of an empty chunk")
    query_feature = build_feature(query, mode)
    sims = [cosine_similarity(query_feature, build_feature(d, mode)) for d in chunk]
    return float(np.mean(sims))


def compute_weights(
    query: Query,
    plan: ChunkPlan,
    demos: list[Demonstration],
    cfg: CompilationConfig,
) -> np.ndarray:
    """Per-chunk ensemble weights for one query, computed once before decoding.

    Similarity mode softmaxes the per-chunk mean query-similarity scores
    (divided by the temperature); uniform mode returns 1/K everywhere.
    """
    k = plan.n_chunks
    if cfg.weighting == UNIFORM:
        return np.full(k, 1.0 / k)
    chunks = plan.chunk_lists(demos)
    scores = np.array([chunk_similarity(query, chunk, cfg.feature_mode) for chunk in chunks])
    return softmax(scores / cfg.temperature)


def compile_logits(chunk_logits, weights) -> np.ndarray:
    """Weighted elementwise sum of chunk logit vectors.

    With one chunk and weight 1 the output equals the input bitwise, which is
    what makes the single-chunk decode an exact reduction to full-context
    decoding.
    """
    if len(chunk_logits) == 0:
        raise InvalidInputError("compile_logits needs at least one chunk")
    try:
        stacked = np.stack([np.asarray(l, dtype=np.float64) for l in chunk_logits])
    except ValueError:
        lengths = [np.asarray(l).shape for l in chunk_logits]
        raise InvalidInputError(f"chunk logit vectors have mismatched shapes: {lengths}") from None
    if not np.all(np.isfinite(stacked)):
        raise InvalidInputError("chunk logits contain non-finite entries")
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size != stacked.shape[0]:
        raise InvalidInputError(
            f"expected {stacked.shape[0]} weights, got shape {w.shape}"
        )
    if np.any(w <= 0) or abs(float(w.sum()) - 1.0) > 1e-9:
        raise InvalidInputError("weights must be positive and sum to 1")
    return (w[:, None] * stacked).sum(axis=0)
