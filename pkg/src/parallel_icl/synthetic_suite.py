"""Deterministic generation of synthetic task-mixture datasets.

Each latent task gets an orthogonal one-hot feature prototype; demonstration
and query features are that prototype plus Gaussian noise in both modalities.
Task tables are sampled so tasks disagree on every query symbol whenever the
answer space allows it, which makes the suite a clean task-identification
problem. Demonstration ids encode the generating task (``demo-t<task>-<i>``)
so diagnostics can recover the true partition without the engine ever seeing
task labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backends.synthetic import SyntheticTaskModel
from .core import Demonstration, Query
from .errors import InvalidInputError


@dataclass(frozen=True)
class SyntheticSuiteSpec:
    n_tasks: int = 4
    n_query_symbols: int = 8
    n_answers: int = 8
    label_noise: float = 0.1
    demos_per_task: int = 8
    queries_per_task: int = 4
    feature_sigma: float = 0.05
    seed: int = 0
    # None generates queries for every task round-robin; an integer keeps
    # only that task's queries.
    query_task: int | None = None

    def __post_init__(self):
        if self.n_tasks < 1 or self.demos_per_task < 1 or self.queries_per_task < 1:
            raise InvalidInputError("counts must be positive")
        if self.feature_sigma < 0:
            raise InvalidInputError("feature_sigma must be >= 0")
        if self.query_task is not None and not 0 <= self.query_task < self.n_tasks:
            raise InvalidInputError(f"query_task {self.query_task} out of range")


def true_task_of(item_id: str) -> int:
    """Recover the generating task from a suite-generated id (diagnostics only)."""
    try:
        return int(item_id.split("-")[1][1:])
    except (IndexError, ValueError):
        raise InvalidInputError(f"{item_id!r} is not a synthetic-suite id") from None


def _sample_tables(spec: SyntheticSuiteSpec, rng: np.random.Generator) -> tuple[tuple[int, ...], ...]:
    columns = []
    for _ in range(spec.n_query_symbols):
        if spec.n_answers >= spec.n_tasks:
            answers = rng.choice(spec.n_answers, size=spec.n_tasks, replace=False)
        else:
            answers = rng.integers(0, spec.n_answers, size=spec.n_tasks)
        columns.append(answers)
    table = np.stack(columns, axis=1)  # (tasks, symbols)
    return tuple(tuple(int(a) for a in row) for row in table)


def _noisy_prototype(task: int, spec: SyntheticSuiteSpec, rng: np.random.Generator) -> np.ndarray:
    proto = np.zeros(spec.n_tasks)
    proto[task] = 1.0
    return proto + spec.feature_sigma * rng.standard_normal(spec.n_tasks)


def generate_synthetic(
    spec: SyntheticSuiteSpec,
) -> tuple[SyntheticTaskModel, list[Demonstration], list[Query]]:
    """Build the scoring model plus a demonstration/query set drawn from it.

    Demonstrations are interleaved round-robin across tasks so every prefix
    of the dataset stays balanced. Query reference answers are the noiseless
    table outputs of the query's own task.
    """
    rng = np.random.default_rng(spec.seed)
    tables = _sample_tables(spec, rng)
    model = SyntheticTaskModel(
        n_tasks=spec.n_tasks,
        n_query_symbols=spec.n_query_symbols,
        n_answers=spec.n_answers,
        task_tables=tables,
        label_noise=spec.label_noise,
    )

    demos: list[Demonstration] = []
    for i in range(spec.demos_per_task):
        for task in range(spec.n_tasks):
            q = int(rng.integers(spec.n_query_symbols))
            if rng.random() < spec.label_noise:
                others = [a for a in range(spec.n_answers) if a != tables[task][q]]
                answer = int(others[int(rng.integers(len(others)))])
            else:
                answer = tables[task][q]
            demos.append(
                Demonstration(
                    id=f"demo-t{task}-{i}",
                    image_feature=_noisy_prototype(task, spec, rng),
                    text_feature=_noisy_prototype(task, spec, rng),
                    payload={"query_symbol": q, "answer_symbol": answer},
                )
            )

    queries: list[Query] = []
    for i in range(spec.queries_per_task):
        for task in range(spec.n_tasks):
            if spec.query_task is not None and task != spec.query_task:
                continue
            q = int(rng.integers(spec.n_query_symbols))
            queries.append(
                Query(
                    id=f"query-t{task}-{i}",
                    image_feature=_noisy_prototype(task, spec, rng),
                    text_feature=_noisy_prototype(task, spec, rng),
                    payload={"query_symbol": q},
                    reference_answer=(tables[task][q],),
                )
            )
    return model, demos, queries


def save_model(path: str | Path, model: SyntheticTaskModel) -> None:
    doc = {
        "schema_version": 1,
        "n_tasks": model.n_tasks,
        "n_query_symbols": model.n_query_symbols,
        "n_answers": model.n_answers,
        "label_noise": model.label_noise,
        "task_tables": [list(row) for row in model.task_tables],
        "tokens_per_demo": model.tokens_per_demo,
        "tokens_per_query": model.tokens_per_query,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SyntheticTaskModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return SyntheticTaskModel(
        n_tasks=doc["n_tasks"],
        n_query_symbols=doc["n_query_symbols"],
        n_answers=doc["n_answers"],
        task_tables=tuple(tuple(row) for row in doc["task_tables"]),
        label_noise=doc["label_noise"],
        tokens_per_demo=doc.get("tokens_per_demo", 2600),
        tokens_per_query=doc.get("tokens_per_query", 2557),
    )
