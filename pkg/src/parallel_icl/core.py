"""Domain types and numeric primitives shared by every other module.

All types are immutable values after construction and all operations are
pure functions, so everything here is safe to use from concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

# Probability floor applied before KL divergence; keeps the divergence finite
# for near-deterministic (greedy) distributions.
KL_FLOOR = 1e-12

# Feature-selection modes used by chunking and compilation.
MULTIMODAL = "multimodal"
TEXT_ONLY = "text_only"
IMAGE_ONLY = "image_only"
FEATURE_MODES = (MULTIMODAL, TEXT_ONLY, IMAGE_ONLY)

TokenId = int


def _freeze(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Vocabulary:
    """Token id space of a backend; ids are 0..size-1."""

    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise InvalidInputError(f"vocabulary size must be >= 2, got {self.size}")
        if self.labels is not None and len(self.labels) != self.size:
            raise InvalidInputError(
                f"label count {len(self.labels)} does not match vocabulary size {self.size}"
            )

    def label(self, token: TokenId) -> str:
        if self.labels is not None:
            return self.labels[token]
        return str(token)


@dataclass(eq=False)
class Demonstration:
    """One in-context example: per-modality feature vectors plus an opaque payload.

    The payload is only interpreted by the backend scoring it (the synthetic
    backend expects ``query_symbol`` / ``answer_symbol`` integers; remote
    backends receive it verbatim on the wire).
    """

    id: str
    image_feature: np.ndarray
    text_feature: np.ndarray
    payload: Mapping

    def __post_init__(self):
        self.image_feature = _freeze(self.image_feature, "image_feature")
        self.text_feature = _freeze(self.text_feature, "text_feature")


@dataclass(eq=False)
class Query:
    """The input to answer, with optional reference tokens for scoring."""

    id: str
    image_feature: np.ndarray
    text_feature: np.ndarray
    payload: Mapping
    reference_answer: tuple[TokenId, ...] | None = None

    def __post_init__(self):
        self.image_feature = _freeze(self.image_feature, "image_feature")
        self.text_feature = _freeze(self.text_feature, "text_feature")
        if self.reference_answer is not None:
            self.reference_answer = tuple(int(t) for t in self.reference_answer)


@dataclass(frozen=True)
class ChunkPlan:
    """A disjoint, exhaustive partition of demonstrations into chunks.

    ``assignments`` maps demonstration id to a chunk index in [0, n_chunks).
    ``weights`` holds the per-chunk ensemble weights once compilation has
    computed them; partitioners return plans with weights unset.
    """

    assignments: Mapping[str, int]
    n_chunks: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "assignments", dict(self.assignments))
        if self.n_chunks < 1:
            raise InvalidInputError("n_chunks must be positive")
        counts = [0] * self.n_chunks
        for demo_id, chunk in self.assignments.items():
            if not 0 <= chunk < self.n_chunks:
                raise InvalidInputError(
                    f"demonstration {demo_id!r} assigned to chunk {chunk}, "
                    f"outside 0..{self.n_chunks - 1}"
                )
            counts[chunk] += 1
        empty = [k for k, c in enumerate(counts) if c == 0]
        if empty:
            raise InvalidInputError(f"chunks {empty} are empty")
        if self.weights is not None:
            w = _freeze(self.weights, "weights")
            if w.size != self.n_chunks:
                raise InvalidInputError(
                    f"expected {self.n_chunks} weights, got {w.size}"
                )
            if np.any(w <= 0):
                raise InvalidInputError("every chunk weight must be > 0")
            if abs(float(w.sum()) - 1.0) > 1e-9:
                raise InvalidInputError(f"weights sum to {w.sum()}, expected 1")
            object.__setattr__(self, "weights", w)

    @classmethod
    def from_assignments(
        cls,
        assignments: Mapping[str, int],
        n_chunks: int,
        demos: Sequence[Demonstration],
        weights=None,
    ) -> "ChunkPlan":
        """Build a plan, rejecting any mismatch with the demonstration set."""
        demo_ids = [d.id for d in demos]
        if len(set(demo_ids)) != len(demo_ids):
            raise InvalidInputError("duplicate demonstration ids")
        missing = set(demo_ids) - set(assignments)
        extra = set(assignments) - set(demo_ids)
        if missing or extra:
            raise InvalidInputError(
                f"assignments do not cover the demonstration set exactly "
                f"(missing={sorted(missing)}, extra={sorted(extra)})"
            )
        return cls(assignments, n_chunks, weights)

    def with_weights(self, weights) -> "ChunkPlan":
        return ChunkPlan(self.assignments, self.n_chunks, weights)

    def members(self, chunk: int, demos: Sequence[Demonstration]) -> list[Demonstration]:
        """Demonstrations of one chunk, preserving original dataset order."""
        if not 0 <= chunk < self.n_chunks:
            raise InvalidInputError(f"chunk index {chunk} out of range")
        return [d for d in demos if self.assignments.get(d.id) == chunk]

    def chunk_lists(self, demos: Sequence[Demonstration]) -> list[list[Demonstration]]:
        """All chunks, each in original dataset order; validates exact coverage."""
        lists: list[list[Demonstration]] = [[] for _ in range(self.n_chunks)]
        seen = 0
        for d in demos:
            if d.id not in self.assignments:
                raise InvalidInputError(f"demonstration {d.id!r} is not in the plan")
            lists[self.assignments[d.id]].append(d)
            seen += 1
        if seen != len(self.assignments):
            raise InvalidInputError("plan covers demonstrations absent from the input list")
        return lists

    def chunk_sizes(self) -> list[int]:
        counts = [0] * self.n_chunks
        for chunk in self.assignments.values():
            counts[chunk] += 1
        return counts


def softmax(logits) -> np.ndarray:
    """Numerically stable softmax of a logit vector."""
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"logits must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logits contain non-finite entries")
    shifted = arr - arr.max()
    exp = np.exp(shifted)
    return exp / exp.sum()


def _check_distribution(p, name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    if np.any(arr < -1e-12):
        raise InvalidInputError(f"{name} has negative entries")
    total = float(arr.sum())
    if abs(total - 1.0) > 1e-9:
        raise InvalidInputError(f"{name} sums to {total}, expected 1 within 1e-9")
    return arr


def kl_divergence(p, q) -> float:
    """KL divergence D(p || q) in nats.

    Both distributions are clamped to a floor of ``KL_FLOOR`` and renormalized
    before summing, so the result stays finite when either side has (near-)zero
    entries.
    """
    p_arr = _check_distribution(p, "p")
    q_arr = _check_distribution(q, "q")
    if p_arr.size != q_arr.size:
        raise InvalidInputError(
            f"length mismatch: p has {p_arr.size} entries, q has {q_arr.size}"
        )
    p_c = np.maximum(p_arr, KL_FLOOR)
    q_c = np.maximum(q_arr, KL_FLOOR)
    p_c = p_c / p_c.sum()
    q_c = q_c / q_c.sum()
    return float(np.sum(p_c * (np.log(p_c) - np.log(q_c))))


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two feature vectors."""
    a_arr = np.asarray(a, dtype=np.float64)
    b_arr = np.asarray(b, dtype=np.float64)
    if a_arr.shape != b_arr.shape:
        raise InvalidInputError(
            f"dimension mismatch: {a_arr.shape} vs {b_arr.shape}"
        )
    norm_a = float(np.linalg.norm(a_arr))
    norm_b = float(np.linalg.norm(b_arr))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("cosine similarity of a zero-norm vector is undefined")
    value = float(np.dot(a_arr, b_arr) / (norm_a * norm_b))
    return min(1.0, max(-1.0, value))
