#!/usr/bin/env python3
"""Desk-scale ablation table: chunking strategy, weighting strategy, and
feature modality against the full-context baseline, averaged over seeds.

Each row mirrors one ablation preset; latency is the simulated cost-model
figure. Diversity is undefined (blank) for the single-context baseline.
"""

import argparse
from dataclasses import replace

import numpy as np

from parallel_icl.chunking import ChunkingConfig
from parallel_icl.compilation import CompilationConfig
from parallel_icl.experiment import ExperimentConfig, run_experiment
from parallel_icl.synthetic_suite import SyntheticSuiteSpec

MIXED_SUITE = dict(
    n_tasks=4, n_query_symbols=8, n_answers=8, label_noise=0.1,
    demos_per_task=8, queries_per_task=4, feature_sigma=0.05,
)

ROWS = {
    "full_context": dict(full_context=True),
    "kmeans_similarity": dict(),
    "random_similarity": dict(partitioner="random"),
    "kmeans_uniform": dict(weighting="uniform"),
    "text_only_features": dict(feature_mode="text_only"),
    "image_only_features": dict(feature_mode="image_only"),
}


def run_row(seed, *, full_context=False, partitioner="kmeans", weighting="similarity",
            feature_mode="multimodal"):
    cfg = ExperimentConfig(
        n_shots=32,
        chunking=ChunkingConfig(n_chunks=4, seed=seed, feature_mode=feature_mode),
        compilation=CompilationConfig(weighting=weighting, feature_mode=feature_mode),
        suite=SyntheticSuiteSpec(seed=seed, **MIXED_SUITE),
        compute_relevance=True,
        seed=seed,
        workers=1,
        full_context=full_context,
        partitioner=partitioner,
    )
    if full_context:
        cfg = replace(cfg, chunking=ChunkingConfig(n_chunks=1, seed=seed))
    return run_experiment(cfg).aggregates


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, default=10)
    args = parser.parse_args()

    print(f"{'row':<22} {'accuracy':>9} {'latency':>9} {'diversity':>10} {'relevance':>10}")
    for name, overrides in ROWS.items():
        acc, lat, div, rel = [], [], [], []
        for seed in range(args.seeds):
            agg = run_row(seed, **overrides)
            acc.append(agg.accuracy)
            lat.append(agg.mean_total_latency)
            if agg.mean_diversity is not None:
                div.append(agg.mean_diversity)
            rel.append(agg.mean_relevance)
        div_text = f"{np.mean(div):>10.4f}" if div else f"{'n/a':>10}"
        print(
            f"{name:<22} {np.mean(acc):>9.4f} {np.mean(lat):>9.4f} "
            f"{div_text} {np.mean(rel):>10.4f}"
        )


if __name__ == "__main__":
    main()
