"""Command-line interface.

Subcommands: ``run`` (one experiment -> report JSON), ``compare`` (speedup and
approximation ratio of a run against a baseline), ``gen-synthetic`` (write a
synthetic dataset to disk), ``sweep`` (grid over config parameters plus a CSV
of headline metrics).

Exit codes: 0 success, 1 config error, 2 backend/protocol error, 3 run
finished with per-query failures recorded.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
from pathlib import Path

from .dataset import save_dataset
from .errors import BackendError, ConfigError, DatasetError, InvalidInputError
from .experiment import (
    apply_overrides,
    config_from_mapping,
    load_config,
    read_config_mapping,
    run_experiment,
)
from .metrics import RunReport, speedup_and_ratio
from .synthetic_suite import generate_synthetic, save_model

# Sweep shorthand for the two headline grid axes.
_PARAM_ALIASES = {
    "K": "chunking.n_chunks",
    "N": "experiment.n_shots",
}


def _write_report(report: RunReport, path: str) -> None:
    out = Path(path)
    if out.parent and str(out.parent) != ".":
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding="utf-8")


def _summary_line(report: RunReport) -> str:
    agg = report.aggregates
    parts = [f"queries={agg.n_queries}", f"failed={agg.n_failed}"]
    if agg.accuracy is not None:
        parts.append(f"accuracy={agg.accuracy:.4f}")
    if agg.mean_total_latency is not None:
        parts.append(f"latency={agg.mean_total_latency:.4f}s")
    if agg.mean_diversity is not None:
        parts.append(f"diversity={agg.mean_diversity:.4f}")
    if agg.mean_relevance is not None:
        parts.append(f"relevance={agg.mean_relevance:.4f}")
    return " ".join(parts)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.override)
    output = args.out or cfg.output
    if not output:
        raise ConfigError("no output path: set experiment.output or pass --out")
    report = run_experiment(cfg)
    _write_report(report, output)
    print(f"wrote {output}: {_summary_line(report)}")
    return 3 if report.aggregates.n_failed > 0 else 0


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        run = RunReport.from_json(Path(args.run).read_text(encoding="utf-8"))
        baseline = RunReport.from_json(Path(args.baseline).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read report: {exc}") from None
    result = speedup_and_ratio(run, baseline)

    run.aggregates.baseline_name = baseline.run_name
    run.aggregates.speedup = result.speedup
    run.aggregates.approx_ratio_pct = result.approx_ratio_pct
    out = args.out or str(Path(args.run).with_suffix(".compare.json"))
    _write_report(run, out)

    baseline_label = baseline.run_name
    if baseline_label == run.run_name:
        baseline_label += " (baseline)"
    header = f"{'run':<24}{'latency':>10}{'speedup':>10}{'accuracy':>10}{'ratio':>9}"
    print(header)
    print("-" * len(header))
    for name, rep, speed, ratio in (
        (run.run_name, run, result.speedup, result.approx_ratio_pct),
        (baseline_label, baseline, 1.0, 100.0),
    ):
        print(
            f"{name:<24}"
            f"{rep.aggregates.mean_total_latency:>10.4f}"
            f"{speed:>9.3f}x"
            f"{rep.aggregates.accuracy:>10.4f}"
            f"{ratio:>8.1f}%"
        )
    print(f"wrote {out}")
    return 0


def cmd_gen_synthetic(args: argparse.Namespace) -> int:
    mapping = read_config_mapping(args.spec)
    if "suite" not in mapping:
        raise ConfigError(f"{args.spec} has no [suite] section")
    mapping.setdefault("experiment", {}).setdefault("n_shots", "1")
    cfg = config_from_mapping(mapping)
    model, demos, queries = generate_synthetic(cfg.suite)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset(out / "dataset.jsonl", demos, queries)
    save_model(out / "model.json", model)
    print(
        f"wrote {out / 'dataset.jsonl'} ({len(demos)} demonstrations, "
        f"{len(queries)} queries) and {out / 'model.json'}"
    )
    return 0


def _parse_sweep_param(raw: str) -> tuple[str, list[str]]:
    if "=" not in raw:
        raise ConfigError(f"--param {raw!r} is not of the form key=v1,v2,...")
    key, values = raw.split("=", 1)
    key = _PARAM_ALIASES.get(key.strip(), key.strip())
    if "." not in key:
        raise ConfigError(f"--param key {key!r} must be K, N, or section.key")
    parsed = [v.strip() for v in values.split(",") if v.strip()]
    if not parsed:
        raise ConfigError(f"--param {raw!r} has no values")
    return key, parsed


def cmd_sweep(args: argparse.Namespace) -> int:
    params = [_parse_sweep_param(p) for p in args.param]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    worst = 0
    rows = []
    for combo in itertools.product(*(values for _, values in params)):
        mapping = read_config_mapping(args.config)
        apply_overrides(mapping, args.override)
        cell = dict(zip((key for key, _ in params), combo))
        apply_overrides(mapping, [f"{k}={v}" for k, v in cell.items()])
        cfg = config_from_mapping(mapping)
        report = run_experiment(cfg)
        tag = "_".join(f"{key.rsplit('.', 1)[1]}{value}" for key, value in cell.items())
        _write_report(report, str(out_dir / f"report_{tag}.json"))
        agg = report.aggregates
        rows.append(
            {
                "N": cfg.n_shots,
                "K": 1 if cfg.full_context else cfg.chunking.n_chunks,
                "accuracy": "" if agg.accuracy is None else agg.accuracy,
                "latency": "" if agg.mean_total_latency is None else agg.mean_total_latency,
                "diversity": "" if agg.mean_diversity is None else agg.mean_diversity,
                "relevance": "" if agg.mean_relevance is None else agg.mean_relevance,
            }
        )
        print(f"cell {cell}: {_summary_line(report)}")
        if agg.n_failed > 0:
            worst = 3

    csv_path = out_dir / "sweep.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(
            handle, fieldnames=["N", "K", "accuracy", "latency", "diversity", "relevance"]
        )
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {csv_path}")
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parallel-icl",
        description="Chunked-context ICL engine with product-of-experts fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write a report")
    run.add_argument("--config", required=True)
    run.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    run.add_argument("--out", help="report path (overrides experiment.output)")
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare", help="speedup/approx-ratio of run vs baseline")
    compare.add_argument("--run", required=True)
    compare.add_argument("--baseline", required=True)
    compare.add_argument("--out")
    compare.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-synthetic", help="write a synthetic dataset to a directory")
    gen.add_argument("--spec", required=True, help="config file with a [suite] section")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_synthetic)

    sweep = sub.add_parser("sweep", help="grid over config parameters, one report per cell")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--param", action="append", required=True, metavar="KEY=V1,V2,...")
    sweep.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except InvalidInputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
