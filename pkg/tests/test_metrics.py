import json
import math

import numpy as np
import pytest

from parallel_icl.core import kl_divergence
from parallel_icl.decoding import DecodeStep, DecodeTrace
from parallel_icl.errors import InvalidInputError
from parallel_icl.metrics import (
    QueryRecord,
    RunReport,
    compute_aggregates,
    diversity,
    exact_match_accuracy,
    relevance,
    speedup_and_ratio,
)


def trace_with(dists_per_step, query_id="q0", n_chunks=None, compiled=None):
    steps = []
    for i, dists in enumerate(dists_per_step):
        dists = [np.asarray(d, dtype=float) for d in dists]
        comp = np.asarray(compiled[i], dtype=float) if compiled else dists[0]
        steps.append(
            DecodeStep(
                chosen_token=0,
                compiled_distribution=comp,
                chunk_distributions=dists,
            )
        )
    k = n_chunks if n_chunks is not None else len(dists_per_step[0])
    return DecodeTrace(
        query_id=query_id, n_chunks=k, weights=np.full(k, 1.0 / k), plan=None, steps=steps
    )


class TestDiversity:
    def test_identical_chunks_give_zero(self):
        trace = trace_with([[[0.5, 0.5], [0.5, 0.5]], [[0.2, 0.8], [0.2, 0.8]]])
        assert diversity(trace) == pytest.approx(0.0, abs=1e-12)

    def test_single_step_pair(self):
        p1, p2 = [0.75, 0.25], [0.5, 0.5]
        trace = trace_with([[p1, p2]])
        oracle = (kl_divergence(p1, p2) + kl_divergence(p2, p1)) / 2
        assert diversity(trace) == pytest.approx(oracle, abs=1e-12)
        assert diversity(trace) == pytest.approx(0.137326, abs=1e-4)

    def test_single_chunk_is_undefined(self):
        trace = trace_with([[[1.0, 0.0]]], n_chunks=1)
        assert diversity(trace) is None

    def test_non_negative(self, rng):
        for _ in range(20):
            dists = []
            for _ in range(3):
                step = []
                for _ in range(3):
                    raw = rng.uniform(0.05, 1.0, size=4)
                    step.append(raw / raw.sum())
                dists.append(step)
            assert diversity(trace_with(dists)) >= 0.0


class TestRelevance:
    def test_identical_traces_give_exactly_one(self):
        dists = [[[0.9, 0.1], [0.8, 0.2]], [[0.4, 0.6], [0.5, 0.5]]]
        trace = trace_with(dists)
        assert relevance(trace, trace) == 1.0

    def test_single_step_hand_value(self):
        # Solve (by bisection, the oracle) for a Bernoulli p whose divergence
        # against the uniform coin is exactly 0.01 nats; exp(-100 * 0.01) = exp(-1).
        target = 0.01

        def kl_vs_uniform(p):
            return kl_divergence([p, 1.0 - p], [0.5, 0.5])

        lo, hi = 0.5, 0.99
        for _ in range(200):
            mid = (lo + hi) / 2
            if kl_vs_uniform(mid) < target:
                lo = mid
            else:
                hi = mid
        p = (lo + hi) / 2
        run_trace = trace_with([[[0.5, 0.5]]], compiled=[[0.5, 0.5]])
        ref_trace = trace_with([[[p, 1 - p]]], compiled=[[p, 1 - p]])
        value = relevance(run_trace, ref_trace)
        assert value == pytest.approx(math.exp(-1.0), abs=1e-4)
        assert value == pytest.approx(0.3679, abs=1e-4)

    def test_truncates_to_shorter_trace(self):
        long = trace_with([[[0.5, 0.5]], [[0.9, 0.1]]], compiled=[[0.5, 0.5], [0.9, 0.1]])
        short = trace_with([[[0.5, 0.5]]], compiled=[[0.5, 0.5]])
        assert relevance(long, short) == 1.0

    def test_query_mismatch_rejected(self):
        a = trace_with([[[0.5, 0.5]]], query_id="qa")
        b = trace_with([[[0.5, 0.5]]], query_id="qb")
        with pytest.raises(InvalidInputError):
            relevance(a, b)

    def test_bounded(self, rng):
        for _ in range(20):
            raw1 = rng.uniform(0.05, 1.0, size=3)
            raw2 = rng.uniform(0.05, 1.0, size=3)
            t1 = trace_with([[raw1 / raw1.sum()]], compiled=[raw1 / raw1.sum()])
            t2 = trace_with([[raw2 / raw2.sum()]], compiled=[raw2 / raw2.sum()])
            assert 0.0 < relevance(t1, t2) <= 1.0


def record(query_id, output, reference, latency=1.0, **kw):
    return QueryRecord(
        query_id=query_id,
        output_tokens=output,
        reference_tokens=reference,
        matched=None if reference is None else output == reference,
        total_latency=latency,
        prefill_latency=latency * 0.9,
        decoding_latency=latency * 0.1,
        steps=len(output),
        **kw,
    )


class TestExactMatchAccuracy:
    def test_all_match(self):
        rows = [record(f"q{i}", [1], [1]) for i in range(4)]
        assert exact_match_accuracy(rows) == 1.0

    def test_none_match(self):
        rows = [record(f"q{i}", [1], [2]) for i in range(4)]
        assert exact_match_accuracy(rows) == 0.0

    def test_partial(self):
        rows = [record(f"q{i}", [1], [1] if i < 7 else [0]) for i in range(10)]
        assert exact_match_accuracy(rows) == pytest.approx(0.7)

    def test_missing_references_excluded(self):
        rows = [record("q0", [1], [1]), record("q1", [1], None)]
        assert exact_match_accuracy(rows) == 1.0
        assert compute_aggregates(rows).n_unscored == 1

    def test_no_scorable_rows(self):
        with pytest.raises(InvalidInputError):
            exact_match_accuracy([record("q0", [1], None)])


def report_from(rows, name="run"):
    return RunReport(
        experiment={"experiment": {"seed": 0}},
        rows=rows,
        aggregates=compute_aggregates(rows),
        timestamp={"generated_at": "2020-01-01T00:00:00+00:00", "wall_clock_seconds": 0.0},
        run_name=name,
    )


class TestSpeedupAndRatio:
    def test_self_comparison_exact(self):
        report = report_from([record(f"q{i}", [1], [1], latency=2.5) for i in range(3)])
        result = speedup_and_ratio(report, report)
        assert result.speedup == 1.0
        assert result.approx_ratio_pct == 100.0

    def test_published_latency_pair(self):
        # Mean latencies 3.479 vs 2.999 -> 1.160x
        run = report_from([record("q0", [1], [1], latency=2.999)])
        base = report_from([record("q0", [1], [1], latency=3.479)], name="baseline")
        result = speedup_and_ratio(run, base)
        assert result.speedup == pytest.approx(1.160, abs=1e-3)

    def test_published_accuracy_pair(self):
        # Accuracies 63.40% vs 58.90% -> 107.6% approximation ratio.
        run_rows = [record(f"q{i}", [1], [1] if i < 6340 else [0]) for i in range(10_000)]
        base_rows = [record(f"q{i}", [1], [1] if i < 5890 else [0]) for i in range(10_000)]
        result = speedup_and_ratio(report_from(run_rows), report_from(base_rows, "baseline"))
        assert result.approx_ratio_pct == pytest.approx(107.6, abs=0.1)

    def test_query_set_mismatch(self):
        run = report_from([record("q0", [1], [1])])
        base = report_from([record("qX", [1], [1])], name="baseline")
        with pytest.raises(InvalidInputError):
            speedup_and_ratio(run, base)

    def test_zero_baseline_score_rejected(self):
        run = report_from([record("q0", [1], [1])])
        base = report_from([record("q0", [1], [0])], name="baseline")
        with pytest.raises(InvalidInputError):
            speedup_and_ratio(run, base)


class TestRunReport:
    def test_aggregates_recomputable(self):
        rows = [
            record("q0", [1], [1], latency=2.0, diversity=0.5, relevance=0.9),
            record("q1", [0], [1], latency=4.0, diversity=0.7, relevance=0.8),
            QueryRecord(query_id="q2", output_tokens=[], error="boom"),
        ]
        report = report_from(rows)
        fresh = compute_aggregates(report.rows)
        assert fresh == report.aggregates
        assert fresh.accuracy == pytest.approx(0.5, abs=1e-9)
        assert fresh.mean_total_latency == pytest.approx(3.0, abs=1e-9)
        assert fresh.mean_diversity == pytest.approx(0.6, abs=1e-9)
        assert fresh.n_failed == 1

    def test_json_round_trip(self):
        report = report_from([record("q0", [1, 2], [1, 2], latency=1.5)])
        text = report.to_json()
        loaded = RunReport.from_json(text)
        assert loaded.to_json() == text
        assert loaded.rows[0].output_tokens == [1, 2]

    def test_schema_version_mandatory(self):
        doc = json.loads(report_from([record("q0", [1], [1])]).to_json())
        del doc["schema_version"]
        with pytest.raises(InvalidInputError):
            RunReport.from_json(json.dumps(doc))
