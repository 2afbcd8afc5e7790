"""Experiment orchestration: config resolution, per-query pipeline, reporting.

The runner is the only concurrency coordinator. It owns a worker pool over
queries and a second pool for chunk scoring inside a query; every module
below it is pure or declared concurrent-safe. Per-query randomness (the
random-partition baseline) draws from a stream derived from the global seed
and the query id, so reports do not depend on execution order.
"""

from __future__ import annotations

import configparser
import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace, asdict
from datetime import datetime, timezone
from pathlib import Path

from .backends.base import LogitProvider
from .backends.cost import DEFAULT_COST_MODEL, CostModel, CostModelWrapper, simulate_latency
from .backends.remote import RemoteBackend
from .backends.synthetic import SyntheticTaskModel
from .chunking import ChunkingConfig, diversity_select, kmeans_partition, random_partition
from .compilation import CompilationConfig, compute_weights
from .core import Query
from .dataset import load_dataset
from .decoding import DecodeConfig, decode_full_context, decode_parallel
from .errors import ConfigError, DecodeStepError, InvalidInputError, ProtocolError
from .metrics import (
    QueryRecord,
    RunReport,
    compute_aggregates,
    diversity,
    relevance,
)
from .synthetic_suite import SyntheticSuiteSpec, generate_synthetic, load_model

# Canonical configurations for the chunking/compilation/feature ablation rows.
ABLATION_PRESETS: dict[str, dict[str, str]] = {
    "kmeans_similarity": {},
    "random_similarity": {"chunking.partitioner": "random"},
    "kmeans_uniform": {"compilation.weighting": "uniform"},
    "text_only_features": {
        "chunking.feature_mode": "text_only",
        "compilation.feature_mode": "text_only",
    },
    "image_only_features": {
        "chunking.feature_mode": "image_only",
        "compilation.feature_mode": "image_only",
    },
    "full_context": {"experiment.full_context": "true"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    n_shots: int
    chunking: ChunkingConfig
    compilation: CompilationConfig = CompilationConfig()
    decode: DecodeConfig = DecodeConfig()
    cost_model: CostModel = DEFAULT_COST_MODEL
    suite: SyntheticSuiteSpec | None = None
    dataset_dir: str | None = None
    backend: str = "synthetic"
    endpoint: str | None = None
    eos_token: int | None = None
    partitioner: str = "kmeans"
    selector: str = "none"
    select_m: int | None = None
    full_context: bool = False
    compute_relevance: bool = False
    seed: int = 0
    workers: int = 4
    output: str | None = None
    run_name: str = "run"

    def __post_init__(self):
        if self.n_shots < 1:
            raise ConfigError("n_shots must be >= 1")
        if self.chunking.n_chunks > self.n_shots:
            raise ConfigError(
                f"n_chunks ({self.chunking.n_chunks}) cannot exceed n_shots ({self.n_shots})"
            )
        if self.backend not in ("synthetic", "remote"):
            raise ConfigError(f"backend must be synthetic or remote, got {self.backend!r}")
        if self.backend == "remote" and not self.endpoint:
            raise ConfigError("remote backend needs an endpoint")
        if self.partitioner not in ("kmeans", "random"):
            raise ConfigError(f"partitioner must be kmeans or random, got {self.partitioner!r}")
        if self.selector not in ("none", "diversity"):
            raise ConfigError(f"selector must be none or diversity, got {self.selector!r}")
        if self.selector == "diversity":
            if self.select_m is None or self.select_m < 1:
                raise ConfigError("diversity selector needs select_m >= 1")
            if self.select_m > self.n_shots:
                raise ConfigError("select_m cannot exceed n_shots")
            if self.chunking.n_chunks > self.select_m:
                raise ConfigError("n_chunks cannot exceed select_m")
        if self.suite is None and self.dataset_dir is None:
            raise ConfigError("either a [suite] section or dataset_dir is required")
        if self.compute_relevance and not self.decode.record_trace:
            raise ConfigError("compute_relevance requires decode.record_trace")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def snapshot(self) -> dict:
        """Resolved configuration as plain data for embedding in reports."""
        doc = {
            "experiment": {
                "run_name": self.run_name,
                "n_shots": self.n_shots,
                "seed": self.seed,
                "workers": self.workers,
                "full_context": self.full_context,
                "compute_relevance": self.compute_relevance,
                "selector": self.selector,
                "select_m": self.select_m,
                "dataset_dir": self.dataset_dir,
                "output": self.output,
            },
            "backend": {
                "kind": self.backend,
                "endpoint": self.endpoint,
                "eos_token": self.eos_token,
            },
            "chunking": {"partitioner": self.partitioner, **asdict(self.chunking)},
            "compilation": asdict(self.compilation),
            "decode": asdict(self.decode),
            "cost_model": asdict(self.cost_model),
        }
        doc["suite"] = asdict(self.suite) if self.suite is not None else None
        return doc


def derive_query_seed(seed: int, query_id: str) -> int:
    """Stable 64-bit stream seed for one query, independent of execution order."""
    digest = hashlib.blake2b(f"{seed}:{query_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _load_inputs(cfg: ExperimentConfig):
    if cfg.suite is not None:
        model, demos, queries = generate_synthetic(cfg.suite)
        return model, demos, queries
    dataset_dir = Path(cfg.dataset_dir)
    demos, queries = load_dataset(dataset_dir / "dataset.jsonl")
    model = None
    model_path = dataset_dir / "model.json"
    if model_path.exists():
        model = load_model(model_path)
    return model, demos, queries


def _build_provider(cfg: ExperimentConfig, model: SyntheticTaskModel | None) -> LogitProvider:
    if cfg.backend == "synthetic":
        if model is None:
            raise ConfigError("synthetic backend needs a [suite] section or a model.json")
        return model
    return RemoteBackend(cfg.endpoint)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Chunk, weight, decode, and score every query; emit one report.

    Queries may execute concurrently; rows are emitted in dataset order, so
    the report is independent of scheduling. Per-query failures are recorded
    in their row without aborting the run, except fatal protocol errors.
    """
    started = time.time()
    model, all_demos, queries = _load_inputs(cfg)
    provider = _build_provider(cfg, model)

    eos = cfg.eos_token
    if eos is None and isinstance(provider, SyntheticTaskModel):
        eos = provider.eos_token
    decode_cfg = replace(cfg.decode, eos_token=eos)

    if cfg.n_shots > len(all_demos):
        raise ConfigError(
            f"n_shots={cfg.n_shots} but only {len(all_demos)} demonstrations available"
        )
    demos = all_demos[: cfg.n_shots]
    if cfg.selector == "diversity":
        demos = diversity_select(demos, cfg.select_m, cfg.chunking.feature_mode)

    wrapper = CostModelWrapper(provider, cfg.cost_model)
    shared_plan = None
    if not cfg.full_context and cfg.partitioner == "kmeans":
        shared_plan = kmeans_partition(demos, cfg.chunking)

    chunk_pool = ThreadPoolExecutor(max_workers=min(8, max(2, cfg.chunking.n_chunks)))

    def run_one(query: Query) -> QueryRecord:
        record = QueryRecord(query_id=query.id, output_tokens=[])
        try:
            if cfg.full_context:
                tokens, trace = decode_full_context(
                    wrapper, demos, query, decode_cfg, cost_model=cfg.cost_model
                )
            else:
                plan = shared_plan
                if plan is None:
                    plan = random_partition(
                        demos, cfg.chunking.n_chunks, derive_query_seed(cfg.seed, query.id)
                    )
                weighted = plan.with_weights(
                    compute_weights(query, plan, demos, cfg.compilation)
                )
                tokens, trace = decode_parallel(
                    wrapper,
                    demos,
                    query,
                    weighted,
                    decode_cfg,
                    executor=chunk_pool,
                    cost_model=cfg.cost_model,
                )
            record.output_tokens = [int(t) for t in tokens]
            record.steps = len(trace.steps)
            latency = simulate_latency(cfg.cost_model, trace.prefill_lengths, len(trace.steps))
            record.total_latency = latency.total
            record.prefill_latency = latency.prefill
            record.decoding_latency = latency.decoding
            if decode_cfg.record_trace:
                record.diversity = diversity(trace)
            if cfg.compute_relevance and decode_cfg.record_trace:
                _, ref_trace = decode_full_context(
                    wrapper, demos, query, decode_cfg, cost_model=cfg.cost_model
                )
                record.relevance = relevance(trace, ref_trace)
                record.reference_steps = len(ref_trace.steps)
            if query.reference_answer is not None:
                record.reference_tokens = [int(t) for t in query.reference_answer]
                record.matched = record.output_tokens == record.reference_tokens
        except ProtocolError:
            raise
        except DecodeStepError as exc:
            if isinstance(exc.__cause__, ProtocolError):
                raise
            record.error = str(exc)
        except Exception as exc:  # per-query failures stay in the row
            record.error = f"{type(exc).__name__}: {exc}"
        return record

    try:
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                rows = list(pool.map(run_one, queries))
        else:
            rows = [run_one(q) for q in queries]
    finally:
        chunk_pool.shutdown(wait=True)

    aggregates = compute_aggregates(rows)
    return RunReport(
        experiment=cfg.snapshot(),
        rows=rows,
        aggregates=aggregates,
        timestamp={
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "wall_clock_seconds": round(time.time() - started, 6),
        },
        run_name=cfg.run_name,
    )


# ---------------------------------------------------------------------------
# Config file handling (flat key=value INI with one section per config type).
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "experiment": {
        "name",
        "n_shots",
        "seed",
        "workers",
        "compute_relevance",
        "full_context",
        "selector",
        "select_m",
        "preset",
        "dataset_dir",
        "output",
    },
    "suite": {
        "n_tasks",
        "n_query_symbols",
        "n_answers",
        "label_noise",
        "demos_per_task",
        "queries_per_task",
        "feature_sigma",
        "seed",
        "query_task",
    },
    "backend": {"kind", "endpoint", "eos_token"},
    "chunking": {
        "n_chunks",
        "partitioner",
        "feature_mode",
        "seed",
        "max_iterations",
        "centroid_tolerance",
        "normalize_features",
    },
    "compilation": {"weighting", "temperature", "feature_mode"},
    "decode": {"max_new_tokens", "record_trace"},
    "cost_model": {
        "prefill_quad",
        "prefill_linear",
        "decode_coeff",
        "compile_overhead",
        "parallel_lanes",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _parse_bool(value: str, where: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE:
        return True
    if lowered in _FALSE:
        return False
    raise ConfigError(f"{where}: expected a boolean, got {value!r}")


def _parse_int(value: str, where: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{where}: expected an integer, got {value!r}") from None


def _parse_float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None


def _validate_mapping(mapping: dict[str, dict[str, str]]) -> None:
    for section, keys in mapping.items():
        if section not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in keys:
            if key not in _KNOWN_KEYS[section]:
                raise ConfigError(f"unknown config key {section}.{key}")


def apply_overrides(mapping: dict[str, dict[str, str]], overrides) -> None:
    """Apply ``section.key=value`` strings onto a raw config mapping."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise ConfigError(f"override key {dotted!r} must be section.key")
        section, key = dotted.split(".", 1)
        mapping.setdefault(section, {})[key.strip()] = value.strip()


def config_from_mapping(mapping: dict[str, dict[str, str]]) -> ExperimentConfig:
    """Build an ExperimentConfig from a {section: {key: value-string}} mapping."""
    mapping = {section: dict(keys) for section, keys in mapping.items()}
    preset = mapping.get("experiment", {}).pop("preset", None)
    if preset is not None:
        if preset not in ABLATION_PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {sorted(ABLATION_PRESETS)}"
            )
        apply_overrides(mapping, [f"{k}={v}" for k, v in ABLATION_PRESETS[preset].items()])
    _validate_mapping(mapping)

    exp = mapping.get("experiment", {})
    if "n_shots" not in exp:
        raise ConfigError("experiment.n_shots is required")
    seed = _parse_int(exp.get("seed", "0"), "experiment.seed")

    suite = None
    if "suite" in mapping:
        s = mapping["suite"]
        query_task = s.get("query_task", "").strip()
        suite = SyntheticSuiteSpec(
            n_tasks=_parse_int(s.get("n_tasks", "4"), "suite.n_tasks"),
            n_query_symbols=_parse_int(s.get("n_query_symbols", "8"), "suite.n_query_symbols"),
            n_answers=_parse_int(s.get("n_answers", "8"), "suite.n_answers"),
            label_noise=_parse_float(s.get("label_noise", "0.1"), "suite.label_noise"),
            demos_per_task=_parse_int(s.get("demos_per_task", "8"), "suite.demos_per_task"),
            queries_per_task=_parse_int(
                s.get("queries_per_task", "4"), "suite.queries_per_task"
            ),
            feature_sigma=_parse_float(s.get("feature_sigma", "0.05"), "suite.feature_sigma"),
            seed=_parse_int(s.get("seed", str(seed)), "suite.seed"),
            query_task=_parse_int(query_task, "suite.query_task") if query_task else None,
        )

    ch = mapping.get("chunking", {})
    chunking = ChunkingConfig(
        n_chunks=_parse_int(ch.get("n_chunks", "1"), "chunking.n_chunks"),
        feature_mode=ch.get("feature_mode", "multimodal"),
        seed=_parse_int(ch.get("seed", str(seed)), "chunking.seed"),
        max_iterations=_parse_int(ch.get("max_iterations", "100"), "chunking.max_iterations"),
        centroid_tolerance=_parse_float(
            ch.get("centroid_tolerance", "1e-6"), "chunking.centroid_tolerance"
        ),
        normalize_features=_parse_bool(
            ch.get("normalize_features", "true"), "chunking.normalize_features"
        ),
    )

    co = mapping.get("compilation", {})
    compilation = CompilationConfig(
        weighting=co.get("weighting", "similarity"),
        temperature=_parse_float(co.get("temperature", "1.0"), "compilation.temperature"),
        feature_mode=co.get("feature_mode", "multimodal"),
    )

    de = mapping.get("decode", {})
    decode = DecodeConfig(
        max_new_tokens=_parse_int(de.get("max_new_tokens", "1024"), "decode.max_new_tokens"),
        record_trace=_parse_bool(de.get("record_trace", "true"), "decode.record_trace"),
    )

    cm = mapping.get("cost_model", {})
    cost_model = CostModel(
        prefill_quad=_parse_float(
            cm.get("prefill_quad", repr(DEFAULT_COST_MODEL.prefill_quad)),
            "cost_model.prefill_quad",
        ),
        prefill_linear=_parse_float(
            cm.get("prefill_linear", repr(DEFAULT_COST_MODEL.prefill_linear)),
            "cost_model.prefill_linear",
        ),
        decode_coeff=_parse_float(
            cm.get("decode_coeff", repr(DEFAULT_COST_MODEL.decode_coeff)),
            "cost_model.decode_coeff",
        ),
        compile_overhead=_parse_float(
            cm.get("compile_overhead", repr(DEFAULT_COST_MODEL.compile_overhead)),
            "cost_model.compile_overhead",
        ),
        parallel_lanes=_parse_int(
            cm.get("parallel_lanes", str(DEFAULT_COST_MODEL.parallel_lanes)),
            "cost_model.parallel_lanes",
        ),
    )

    be = mapping.get("backend", {})
    eos_raw = be.get("eos_token", "").strip()
    select_m_raw = exp.get("select_m", "").strip()

    try:
        return ExperimentConfig(
            n_shots=_parse_int(exp["n_shots"], "experiment.n_shots"),
            chunking=chunking,
            compilation=compilation,
            decode=decode,
            cost_model=cost_model,
            suite=suite,
            dataset_dir=exp.get("dataset_dir"),
            backend=be.get("kind", "synthetic"),
            endpoint=be.get("endpoint"),
            eos_token=_parse_int(eos_raw, "backend.eos_token") if eos_raw else None,
            partitioner=ch.get("partitioner", "kmeans"),
            selector=exp.get("selector", "none"),
            select_m=_parse_int(select_m_raw, "experiment.select_m") if select_m_raw else None,
            full_context=_parse_bool(exp.get("full_context", "false"), "experiment.full_context"),
            compute_relevance=_parse_bool(
                exp.get("compute_relevance", "false"), "experiment.compute_relevance"
            ),
            seed=seed,
            workers=_parse_int(exp.get("workers", "4"), "experiment.workers"),
            output=exp.get("output"),
            run_name=exp.get("name", "run"),
        )
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from None


def read_config_mapping(path: str | Path) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return {section: dict(parser.items(section)) for section in parser.sections()}


def load_config(path: str | Path, overrides=()) -> ExperimentConfig:
    mapping = read_config_mapping(path)
    apply_overrides(mapping, overrides)
    return config_from_mapping(mapping)
