"""JSONL dataset ingestion and serialization.

One JSON object per line with a ``kind`` field of ``demonstration`` or
``query``. Feature dimensions must be consistent across the whole file and
ids must be unique; violations are reported with the offending line number.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Demonstration, Query
from .errors import DatasetError

KINDS = ("demonstration", "query")


def _feature(record: dict, key: str, line: int) -> np.ndarray:
    try:
        values = record[key]
    except KeyError:
        raise DatasetError(f"line {line}: missing {key!r}") from None
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise DatasetError(f"line {line}: {key!r} is not a numeric array") from None
    if arr.ndim != 1 or arr.size == 0:
        raise DatasetError(f"line {line}: {key!r} must be a non-empty flat array")
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"line {line}: {key!r} contains non-finite values")
    return arr


def load_dataset(path: str | Path) -> tuple[list[Demonstration], list[Query]]:
    """Parse a JSONL dataset into demonstrations and queries (in file order)."""
    demos: list[Demonstration] = []
    queries: list[Query] = []
    seen_ids: set[str] = set()
    dims: tuple[int, int] | None = None

    try:
        handle = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from None
    with handle:
        for line_no, raw in enumerate(handle, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {line_no}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetError(f"line {line_no}: record is not an object")
            kind = record.get("kind")
            if kind not in KINDS:
                raise DatasetError(
                    f"line {line_no}: kind must be one of {KINDS}, got {kind!r}"
                )
            item_id = record.get("id")
            if not isinstance(item_id, str) or not item_id:
                raise DatasetError(f"line {line_no}: id must be a non-empty string")
            if item_id in seen_ids:
                raise DatasetError(f"line {line_no}: duplicate id {item_id!r}")
            seen_ids.add(item_id)

            image = _feature(record, "image_feature", line_no)
            text = _feature(record, "text_feature", line_no)
            if dims is None:
                dims = (image.size, text.size)
            elif dims != (image.size, text.size):
                raise DatasetError(
                    f"line {line_no}: feature dimensions ({image.size}, {text.size}) "
                    f"do not match the dataset's ({dims[0]}, {dims[1]})"
                )
            payload = record.get("payload", {})
            if not isinstance(payload, dict):
                raise DatasetError(f"line {line_no}: payload must be an object")

            if kind == "demonstration":
                demos.append(Demonstration(item_id, image, text, payload))
            else:
                reference = record.get("reference_answer")
                if reference is not None:
                    if not isinstance(reference, list) or not all(
                        isinstance(t, int) for t in reference
                    ):
                        raise DatasetError(
                            f"line {line_no}: reference_answer must be a list of ints"
                        )
                    reference = tuple(reference)
                queries.append(Query(item_id, image, text, payload, reference))
    return demos, queries


def save_dataset(path: str | Path, demos: list[Demonstration], queries: list[Query]) -> None:
    """Write demonstrations then queries as JSONL; inverse of load_dataset."""
    with open(path, "w", encoding="utf-8") as handle:
        for demo in demos:
            record = {
                "kind": "demonstration",
                "id": demo.id,
                "image_feature": [float(v) for v in demo.image_feature],
                "text_feature": [float(v) for v in demo.text_feature],
                "payload": dict(demo.payload),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
        for query in queries:
            record = {
                "kind": "query",
                "id": query.id,
                "image_feature": [float(v) for v in query.image_feature],
                "text_feature": [float(v) for v in query.text_feature],
                "payload": dict(query.payload),
            }
            if query.reference_answer is not None:
                record["reference_answer"] = list(query.reference_answer)
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")
