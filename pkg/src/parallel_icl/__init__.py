"""Chunked-context in-context learning engine with product-of-experts fusion."""

from .backends import (
    ContextRequest,
    CostModel,
    CostModelWrapper,
    DEFAULT_COST_MODEL,
    LatencyBreakdown,
    LogitProvider,
    RemoteBackend,
    SyntheticTaskModel,
    fit_prefill_coefficients,
    simulate_latency,
    synthetic_score,
)
from .chunking import (
    ChunkingConfig,
    build_feature,
    diversity_select,
    kmeans_partition,
    random_partition,
)
from .compilation import CompilationConfig, chunk_similarity, compile_logits, compute_weights
from .core import (
    ChunkPlan,
    Demonstration,
    Query,
    Vocabulary,
    cosine_similarity,
    kl_divergence,
    softmax,
)
from .decoding import (
    DecodeConfig,
    DecodeTrace,
    decode_full_context,
    decode_parallel,
    greedy_select,
)
from .dataset import load_dataset, save_dataset
from .experiment import ABLATION_PRESETS, ExperimentConfig, load_config, run_experiment
from .metrics import (
    RunReport,
    diversity,
    exact_match_accuracy,
    relevance,
    speedup_and_ratio,
)
from .synthetic_suite import SyntheticSuiteSpec, generate_synthetic

__version__ = "0.1.0"
