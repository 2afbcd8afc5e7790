"""Diagnostics and evaluation: inter-chunk diversity, reference relevance,
exact-match accuracy, and cross-run speedup/approximation aggregates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

from .decoding import DecodeTrace
from .core import kl_divergence
from .errors import InvalidInputError

SCHEMA_VERSION = 1


def diversity(trace: DecodeTrace) -> float | None:
    """Mean pairwise KL divergence among per-step chunk distributions.

    Undefined (None) for single-chunk traces, matching how full-context
    baselines report it. The per-step sum over ordered chunk pairs is
    normalized by steps * chunks, so adding chunks with distinct predictions
    raises the score.
    """
    if trace.n_chunks < 2:
        return None
    if not trace.steps:
        return 0.0
    total = 0.0
    for step in trace.steps:
        dists = step.chunk_distributions
        if dists is None:
            raise InvalidInputError("trace was recorded without chunk distributions")
        for i in range(len(dists)):
            for j in range(len(dists)):
                if i != j:
                    total += kl_divergence(dists[i], dists[j])
    return total / (len(trace.steps) * trace.n_chunks)


def relevance(trace: DecodeTrace, reference_trace: DecodeTrace, damping: float = 100.0) -> float:
    """Exponentially damped KL between reference and compiled distributions.

    The reference trace is the full-context pass for the same query; the
    comparison runs over the first min(L, L_ref) steps and each step
    contributes exp(-damping * KL(reference || compiled)).
    """
    if trace.query_id != reference_trace.query_id:
        raise InvalidInputError(
            f"traces decode different queries: {trace.query_id!r} vs "
            f"{reference_trace.query_id!r}"
        )
    steps = min(len(trace.steps), len(reference_trace.steps))
    if steps == 0:
        raise InvalidInputError("cannot compute relevance over zero steps")
    total = 0.0
    for step, ref_step in zip(trace.steps[:steps], reference_trace.steps[:steps]):
        if step.compiled_distribution is None or ref_step.compiled_distribution is None:
            raise InvalidInputError("trace was recorded without distributions")
        kl = kl_divergence(ref_step.compiled_distribution, step.compiled_distribution)
        total += math.exp(-damping * kl)
    return total / steps


@dataclass
class QueryRecord:
    query_id: str
    output_tokens: list[int]
    reference_tokens: list[int] | None = None
    matched: bool | None = None
    total_latency: float | None = None
    prefill_latency: float | None = None
    decoding_latency: float | None = None
    steps: int = 0
    reference_steps: int | None = None
    diversity: float | None = None
    relevance: float | None = None
    error: str | None = None


@dataclass
class Aggregates:
    n_queries: int = 0
    n_failed: int = 0
    n_unscored: int = 0
    accuracy: float | None = None
    mean_total_latency: float | None = None
    mean_prefill_latency: float | None = None
    mean_decoding_latency: float | None = None
    mean_diversity: float | None = None
    mean_relevance: float | None = None
    baseline_name: str | None = None
    speedup: float | None = None
    approx_ratio_pct: float | None = None


@dataclass
class RunReport:
    """One experiment run: per-query records plus recomputable aggregates.

    The ``timestamp`` object is the only volatile field; two runs with the
    same configuration and seed must serialize byte-identically apart from it.
    """

    experiment: dict
    rows: list[QueryRecord]
    aggregates: Aggregates
    timestamp: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION
    run_name: str = "run"

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "run_name": self.run_name,
            "experiment": self.experiment,
            "aggregates": asdict(self.aggregates),
            "rows": [asdict(row) for row in self.rows],
            "timestamp": self.timestamp,
        }
        return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        if "schema_version" not in doc:
            raise InvalidInputError("report lacks a schema_version field")
        if doc["schema_version"] != SCHEMA_VERSION:
            raise InvalidInputError(f"unsupported schema version {doc['schema_version']}")
        return cls(
            experiment=doc["experiment"],
            rows=[QueryRecord(**row) for row in doc["rows"]],
            aggregates=Aggregates(**doc["aggregates"]),
            timestamp=doc.get("timestamp", {}),
            schema_version=doc["schema_version"],
            run_name=doc.get("run_name", "run"),
        )


def exact_match_accuracy(rows: list[QueryRecord]) -> float:
    """Fraction of scorable queries whose output equals the reference exactly."""
    scorable = [r for r in rows if r.error is None and r.reference_tokens is not None]
    if not scorable:
        raise InvalidInputError("no queries with reference answers to score")
    hits = sum(1 for r in scorable if r.output_tokens == r.reference_tokens)
    return hits / len(scorable)


def _mean(values: list[float]) -> float | None:
    if not values:
        return None
    return sum(values) / len(values)


def compute_aggregates(rows: list[QueryRecord]) -> Aggregates:
    ok = [r for r in rows if r.error is None]
    agg = Aggregates(n_queries=len(rows), n_failed=len(rows) - len(ok))
    agg.n_unscored = sum(1 for r in ok if r.reference_tokens is None)
    scorable = [r for r in ok if r.reference_tokens is not None]
    if scorable:
        agg.accuracy = exact_match_accuracy(rows)
    agg.mean_total_latency = _mean([r.total_latency for r in ok if r.total_latency is not None])
    agg.mean_prefill_latency = _mean(
        [r.prefill_latency for r in ok if r.prefill_latency is not None]
    )
    agg.mean_decoding_latency = _mean(
        [r.decoding_latency for r in ok if r.decoding_latency is not None]
    )
    agg.mean_diversity = _mean([r.diversity for r in ok if r.diversity is not None])
    agg.mean_relevance = _mean([r.relevance for r in ok if r.relevance is not None])
    return agg


@dataclass(frozen=True)
class SpeedupReport:
    speedup: float
    approx_ratio_pct: float


def speedup_and_ratio(run: RunReport, baseline: RunReport) -> SpeedupReport:
    """Latency speedup and benchmark-score ratio of a run over a baseline."""
    run_ids = sorted(r.query_id for r in run.rows)
    base_ids = sorted(r.query_id for r in baseline.rows)
    if run_ids != base_ids:
        raise InvalidInputError("run and baseline cover different query sets")
    if not baseline.aggregates.mean_total_latency or not run.aggregates.mean_total_latency:
        raise InvalidInputError("both runs need a nonzero mean latency")
    if baseline.aggregates.accuracy is None or run.aggregates.accuracy is None:
        raise InvalidInputError("both runs need an accuracy score")
    if baseline.aggregates.accuracy == 0:
        raise InvalidInputError("baseline score is zero")
    speedup = baseline.aggregates.mean_total_latency / run.aggregates.mean_total_latency
    ratio = 100.0 * run.aggregates.accuracy / baseline.aggregates.accuracy
    return SpeedupReport(speedup=speedup, approx_ratio_pct=ratio)
