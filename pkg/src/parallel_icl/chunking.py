"""Partitioners that split a demonstration set into chunks.

The main partitioner is Lloyd's k-means over demonstration features with
seeded k-means++ initialization; a uniform random partitioner and a greedy
max-min diversity selector provide ablation baselines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FEATURE_MODES,
    IMAGE_ONLY,
    MULTIMODAL,
    ChunkPlan,
    Demonstration,
    Query,
)
from .errors import DegenerateInputError, InvalidInputError


@dataclass(frozen=True)
class ChunkingConfig:
    n_chunks: int
    feature_mode: str = MULTIMODAL
    seed: int = 0
    max_iterations: int = 100
    centroid_tolerance: float = 1e-6
    normalize_features: bool = True

    def __post_init__(self):
        if self.n_chunks < 1:
            raise InvalidInputError("n_chunks must be >= 1")
        if self.feature_mode not in FEATURE_MODES:
            raise InvalidInputError(
                f"feature_mode must be one of {FEATURE_MODES}, got {self.feature_mode!r}"
            )
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")
        if self.centroid_tolerance <= 0:
            raise InvalidInputError("centroid_tolerance must be > 0")


def build_feature(item: Demonstration | Query, mode: str, normalize: bool = False) -> np.ndarray:
    """Select or concatenate per-modality features into one task vector.

    ``multimodal`` concatenates [image || text]; the unimodal modes pick one
    side, which is how the single-modality ablations are run.
    """
    if mode not in FEATURE_MODES:
        raise InvalidInputError(f"unknown feature mode {mode!r}")
    image = np.asarray(item.image_feature, dtype=np.float64)
    text = np.asarray(item.text_feature, dtype=np.float64)
    if mode == MULTIMODAL:
        if image.size == 0 or text.size == 0:
            raise InvalidInputError(f"{item.id!r} is missing a feature required by multimodal mode")
        vec = np.concatenate([image, text])
    elif mode == IMAGE_ONLY:
        if image.size == 0:
            raise InvalidInputError(f"{item.id!r} has no image feature")
        vec = image.copy()
    else:
        if text.size == 0:
            raise InvalidInputError(f"{item.id!r} has no text feature")
        vec = text.copy()
    if normalize:
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise DegenerateInputError(f"{item.id!r} has a zero-norm feature vector")
        vec = vec / norm
    return vec


def _feature_matrix(demos, cfg: ChunkingConfig) -> np.ndarray:
    return np.stack(
        [build_feature(d, cfg.feature_mode, normalize=cfg.normalize_features) for d in demos]
    )


def _pairwise_sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded k-means++ center selection (D^2 sampling)."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    min_d2 = np.einsum("nd,nd->n", points - centers[0], points - centers[0])
    for i in range(1, k):
        total = float(min_d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=min_d2 / total))
        else:
            # All remaining points coincide with an existing center.
            idx = int(rng.integers(n))
        centers[i] = points[idx]
        d2 = np.einsum("nd,nd->n", points - centers[i], points - centers[i])
        min_d2 = np.minimum(min_d2, d2)
    return centers


def _repair_empty(assign: np.ndarray, centers: np.ndarray, points: np.ndarray, k: int) -> np.ndarray:
    """Move the globally farthest point (from a multi-member chunk) into each empty chunk."""
    assign = assign.copy()
    while True:
        counts = np.bincount(assign, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return assign
        target = int(empty[0])
        dist = np.einsum("nd,nd->n", points - centers[assign], points - centers[assign])
        movable = counts[assign] > 1
        if not np.any(movable):
            raise InvalidInputError("cannot repair empty chunk: fewer points than chunks")
        dist = np.where(movable, dist, -np.inf)
        assign[int(np.argmax(dist))] = target


def _kmeans_objective(points: np.ndarray, assign: np.ndarray, k: int) -> float:
    total = 0.0
    for c in range(k):
        members = points[assign == c]
        if members.shape[0] == 0:
            continue
        centroid = members.mean(axis=0)
        total += float(((members - centroid) ** 2).sum())
    return total


def _lloyd(points: np.ndarray, k: int, cfg: ChunkingConfig, rng: np.random.Generator):
    """Runs Lloyd's algorithm; returns (assignment, initial objective, final objective)."""
    centers = _kmeans_pp_init(points, k, rng)
    assign = np.argmin(_pairwise_sq_dists(points, centers), axis=1)
    assign = _repair_empty(assign, centers, points, k)
    initial_objective = _kmeans_objective(points, assign, k)
    for _ in range(cfg.max_iterations):
        new_centers = np.stack([points[assign == c].mean(axis=0) for c in range(k)])
        movement = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        # Ties in the distance matrix resolve toward the lowest chunk index.
        new_assign = np.argmin(_pairwise_sq_dists(points, centers), axis=1)
        new_assign = _repair_empty(new_assign, centers, points, k)
        unchanged = np.array_equal(new_assign, assign)
        assign = new_assign
        if movement < cfg.centroid_tolerance or unchanged:
            break
    return assign, initial_objective, _kmeans_objective(points, assign, k)


def kmeans_partition(demos: list[Demonstration], cfg: ChunkingConfig) -> ChunkPlan:
    """Cluster demonstrations into ``cfg.n_chunks`` chunks in feature space.

    Deterministic for a fixed (demos, cfg): k-means++ runs on a generator
    seeded with ``cfg.seed`` and assignment ties break toward the lowest
    chunk index. Chunks emptied during iteration are repaired by donating the
    point farthest from its current centroid.
    """
    if cfg.n_chunks > len(demos):
        raise InvalidInputError(
            f"cannot split {len(demos)} demonstrations into {cfg.n_chunks} chunks"
        )
    points = _feature_matrix(demos, cfg)
    rng = np.random.default_rng(cfg.seed)
    assign, _, _ = _lloyd(points, cfg.n_chunks, cfg, rng)
    return ChunkPlan.from_assignments(
        {d.id: int(assign[i]) for i, d in enumerate(demos)}, cfg.n_chunks, demos
    )


def random_partition(demos: list[Demonstration], n_chunks: int, seed: int) -> ChunkPlan:
    """Uniformly random chunk assignment, repaired so no chunk is empty."""
    if n_chunks < 1:
        raise InvalidInputError("n_chunks must be >= 1")
    if n_chunks > len(demos):
        raise InvalidInputError(
            f"cannot split {len(demos)} demonstrations into {n_chunks} chunks"
        )
    rng = np.random.default_rng(seed)
    assign = rng.integers(0, n_chunks, size=len(demos))
    counts = np.bincount(assign, minlength=n_chunks)
    for chunk in range(n_chunks):
        if counts[chunk] == 0:
            donor = int(np.argmax(counts))
            donor_members = np.flatnonzero(assign == donor)
            moved = int(donor_members[-1])
            assign[moved] = chunk
            counts[donor] -= 1
            counts[chunk] += 1
    return ChunkPlan.from_assignments(
        {d.id: int(assign[i]) for i, d in enumerate(demos)}, n_chunks, demos
    )


def diversity_select(demos: list[Demonstration], m: int, mode: str = MULTIMODAL) -> list[Demonstration]:
    """Greedy farthest-point (max-min) subset of ``m`` demonstrations.

    Seeds with the maximum-norm demonstration (ties toward the lowest id),
    then repeatedly adds the demonstration with the largest minimum distance
    to the selected set. The result is returned in original dataset order.
    """
    if m < 1:
        raise InvalidInputError("m must be >= 1")
    if m > len(demos):
        raise InvalidInputError(f"cannot select {m} of {len(demos)} demonstrations")
    points = np.stack([build_feature(d, mode, normalize=False) for d in demos])
    norms = np.linalg.norm(points, axis=1)
    top = np.flatnonzero(norms == norms.max())
    seed_idx = min(top, key=lambda i: demos[int(i)].id)
    selected = [int(seed_idx)]
    min_dist = np.linalg.norm(points - points[seed_idx], axis=1)
    while len(selected) < m:
        min_dist[selected] = -np.inf
        nxt = int(np.argmax(min_dist))
        selected.append(nxt)
        dist = np.linalg.norm(points - points[nxt], axis=1)
        min_dist = np.minimum(min_dist, dist)
    return [demos[i] for i in sorted(selected)]
