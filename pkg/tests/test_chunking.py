import itertools

import numpy as np
import pytest

from parallel_icl.chunking import (
    ChunkingConfig,
    _lloyd,
    build_feature,
    diversity_select,
    kmeans_partition,
    random_partition,
)
from parallel_icl.core import IMAGE_ONLY, MULTIMODAL, TEXT_ONLY
from parallel_icl.errors import DegenerateInputError, InvalidInputError

from conftest import make_demo


def brute_force_objective(points, assign, k):
    total = 0.0
    for c in range(k):
        members = points[assign == c]
        if len(members):
            total += ((members - members.mean(axis=0)) ** 2).sum()
    return total


def brute_force_best_partition(points, k):
    """Enumerate every surjective assignment and return the minimal objective."""
    n = len(points)
    best, best_assign = np.inf, None
    for assign in itertools.product(range(k), repeat=n):
        assign = np.asarray(assign)
        if len(set(assign.tolist())) != k:
            continue
        obj = brute_force_objective(points, assign, k)
        if obj < best:
            best, best_assign = obj, assign
    return best, best_assign


def partition_as_sets(plan, demos):
    groups = {}
    for d in demos:
        groups.setdefault(plan.assignments[d.id], set()).add(d.id)
    return sorted(frozenset(g) for g in groups.values())


class TestBuildFeature:
    def test_multimodal_concatenation(self):
        demo = make_demo(0, [1.0, 0.0], [0.0, 1.0])
        np.testing.assert_array_equal(
            build_feature(demo, MULTIMODAL, normalize=False), [1.0, 0.0, 0.0, 1.0]
        )

    def test_image_only_normalized(self):
        demo = make_demo(0, [3.0, 4.0], [9.0, 9.0])
        np.testing.assert_allclose(
            build_feature(demo, IMAGE_ONLY, normalize=True), [0.6, 0.8], atol=1e-15
        )

    def test_text_only_selection(self):
        demo = make_demo(0, [1.0], [2.0])
        np.testing.assert_array_equal(build_feature(demo, TEXT_ONLY, normalize=False), [2.0])

    def test_zero_norm_normalization_rejected(self):
        demo = make_demo(0, [0.0, 0.0], [1.0, 0.0])
        with pytest.raises(DegenerateInputError):
            build_feature(demo, IMAGE_ONLY, normalize=True)

    def test_unknown_mode(self):
        with pytest.raises(InvalidInputError):
            build_feature(make_demo(0, [1.0]), "audio_only")


class TestKmeansPartition:
    def four_demos(self):
        feats = [[0.0, 0.0], [0.1, 0.0], [10.0, 10.0], [10.1, 10.0]]
        return [make_demo(i, f) for i, f in enumerate(feats)], np.asarray(feats)

    def cfg(self, k, **kw):
        kw.setdefault("feature_mode", IMAGE_ONLY)
        kw.setdefault("normalize_features", False)
        return ChunkingConfig(n_chunks=k, **kw)

    def test_two_well_separated_pairs(self):
        demos, points = self.four_demos()
        plan = kmeans_partition(demos, self.cfg(2))
        _, oracle_assign = brute_force_best_partition(points, 2)
        oracle_groups = sorted(
            frozenset(f"d{i}" for i in np.flatnonzero(oracle_assign == c)) for c in range(2)
        )
        assert partition_as_sets(plan, demos) == oracle_groups
        assert partition_as_sets(plan, demos) == sorted(
            [frozenset({"d0", "d1"}), frozenset({"d2", "d3"})]
        )

    def test_k_equals_one(self):
        demos, _ = self.four_demos()
        plan = kmeans_partition(demos, self.cfg(1))
        assert plan.chunk_sizes() == [4]

    def test_k_equals_n_gives_singletons(self):
        # Objective 0 is achievable with distinct points, so every chunk is a
        # singleton; cross-check optimality by brute force for n <= 6.
        rng = np.random.default_rng(5)
        for n in (3, 5, 6):
            demos = [make_demo(i, rng.normal(size=2)) for i in range(n)]
            points = np.stack([d.image_feature for d in demos])
            plan = kmeans_partition(demos, self.cfg(n))
            assert plan.chunk_sizes() == [1] * n
            best, _ = brute_force_best_partition(points, n)
            assert brute_force_objective(
                points, np.array([plan.assignments[d.id] for d in demos]), n
            ) == pytest.approx(best, abs=1e-12)

    def test_k_larger_than_n_rejected(self):
        demos, _ = self.four_demos()
        with pytest.raises(InvalidInputError):
            kmeans_partition(demos, self.cfg(5))

    def test_deterministic(self):
        demos, _ = self.four_demos()
        a = kmeans_partition(demos, self.cfg(2, seed=9))
        b = kmeans_partition(demos, self.cfg(2, seed=9))
        assert a.assignments == b.assignments

    def test_objective_never_above_initialization(self, rng):
        for trial in range(20):
            n = int(rng.integers(4, 20))
            k = int(rng.integers(2, min(n, 6)))
            points = rng.normal(size=(n, 3))
            cfg = self.cfg(k, seed=trial)
            assign, initial, final = _lloyd(
                points, k, cfg, np.random.default_rng(cfg.seed)
            )
            assert final <= initial + 1e-9
            assert len(set(assign.tolist())) == k

    def test_well_separated_recovery(self, rng):
        # Inter-cluster distance >= 10x intra-cluster spread recovers the
        # generating partition for n <= 64, k <= 8.
        for trial in range(10):
            k = int(rng.integers(2, 9))
            sizes = rng.integers(2, 9, size=k)
            n = int(sizes.sum())
            if n > 64:
                continue
            labels, feats = [], []
            for c in range(k):
                center = np.zeros(k)
                center[c] = 10.0
                for _ in range(sizes[c]):
                    labels.append(c)
                    feats.append(center + rng.normal(scale=0.1, size=k))
            demos = [make_demo(i, f) for i, f in enumerate(feats)]
            plan = kmeans_partition(demos, self.cfg(k, seed=trial))
            mapping = {}
            for demo, label in zip(demos, labels):
                chunk = plan.assignments[demo.id]
                assert mapping.setdefault(label, chunk) == chunk
            assert len(set(mapping.values())) == k

    def test_duplicate_points_still_partition(self):
        demos = [make_demo(i, [1.0, 1.0]) for i in range(6)]
        plan = kmeans_partition(demos, self.cfg(3))
        assert sorted(plan.chunk_sizes()) == sorted([4, 1, 1]) or all(
            s >= 1 for s in plan.chunk_sizes()
        )


class TestRandomPartition:
    def test_deterministic(self):
        demos = [make_demo(i, [float(i)]) for i in range(8)]
        a = random_partition(demos, 3, seed=42)
        b = random_partition(demos, 3, seed=42)
        assert a.assignments == b.assignments

    def test_k_one(self):
        demos = [make_demo(i, [float(i)]) for i in range(4)]
        assert random_partition(demos, 1, seed=0).chunk_sizes() == [4]

    def test_k_larger_than_n_rejected(self):
        demos = [make_demo(i, [float(i)]) for i in range(2)]
        with pytest.raises(InvalidInputError):
            random_partition(demos, 3, seed=0)

    def test_no_empty_chunks_many_seeds(self):
        demos = [make_demo(i, [float(i)]) for i in range(5)]
        for seed in range(200):
            plan = random_partition(demos, 4, seed=seed)
            assert all(size >= 1 for size in plan.chunk_sizes())

    def test_uniformity_monte_carlo(self):
        # Each demonstration lands in chunk 0 with frequency 1/2 +- 0.02
        # over 10,000 seeded trials (n=8, k=2).
        demos = [make_demo(i, [float(i)]) for i in range(8)]
        counts = np.zeros(8)
        trials = 10_000
        for seed in range(trials):
            plan = random_partition(demos, 2, seed=seed)
            for i, demo in enumerate(demos):
                if plan.assignments[demo.id] == 0:
                    counts[i] += 1
        freqs = counts / trials
        assert np.all(np.abs(freqs - 0.5) <= 0.02), freqs


class TestDiversitySelect:
    def test_select_all_restores_order(self):
        demos = [make_demo(i, [float(i)]) for i in (3, 1, 2)]
        result = diversity_select(demos, 3, IMAGE_ONLY)
        assert [d.id for d in result] == [d.id for d in demos]

    def test_max_min_pair(self):
        demos = [make_demo(i, [v]) for i, v in enumerate([0.0, 1.0, 10.0])]
        chosen = {d.id for d in diversity_select(demos, 2, IMAGE_ONLY)}
        # Brute-force max-min over all 2-subsets
        points = np.array([[0.0], [1.0], [10.0]])
        best_pair = max(
            itertools.combinations(range(3), 2),
            key=lambda pair: np.linalg.norm(points[pair[0]] - points[pair[1]]),
        )
        assert chosen == {f"d{i}" for i in best_pair} == {"d0", "d2"}

    def test_single_pick_is_max_norm(self):
        demos = [make_demo(i, [v, 0.0]) for i, v in enumerate([1.0, -5.0, 3.0])]
        assert [d.id for d in diversity_select(demos, 1, IMAGE_ONLY)] == ["d1"]

    def test_norm_tie_breaks_to_lowest_id(self):
        demos = [
            make_demo(0, [0.0, 1.0], demo_id="b"),
            make_demo(1, [1.0, 0.0], demo_id="a"),
        ]
        assert [d.id for d in diversity_select(demos, 1, IMAGE_ONLY)] == ["a"]

    def test_m_too_large(self):
        demos = [make_demo(0, [1.0])]
        with pytest.raises(InvalidInputError):
            diversity_select(demos, 2, IMAGE_ONLY)

    def test_coverage_property(self, rng):
        # Greedy max-min never selects duplicates and covers extremes.
        demos = [make_demo(i, rng.normal(size=3)) for i in range(12)]
        result = diversity_select(demos, 5, IMAGE_ONLY)
        assert len({d.id for d in result}) == 5
