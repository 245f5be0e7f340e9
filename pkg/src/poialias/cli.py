"""Command-line interface: one executable exposing the whole pipeline.

Subcommands: synth, ingest-check, preprocess, discover, evaluate,
crossval, transfer, sweep. Artifacts are written atomically (temp file
plus rename) under --out; every command also writes a run_manifest.json
with the fully resolved configuration, stage timings, and counts. Reports
never contain timings, so identical inputs and configuration reproduce
them byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import asdict, fields

from . import evaluation
from .discovery import MetricConfig, apply_threshold
from .errors import InvalidConfigError, PoiAliasError
from .ingestion import load_corpus, partition_by_district
from .pipeline import CityData, build_city_data, score_city
from .preprocess import clean_text
from .synth import SynthConfig, generate_city

logger = logging.getLogger("poialias")

CLI_METHODS = {
    "centroid": "centroid",
    "loccent": "loc_cent",
    "kl": "kl_div",
    "jaccard": "jaccard",
    "editdist": "edit_distance",
}


def _atomic_write(path: str, text: str):
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _write_json(path: str, obj):
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _log_kv(**kwargs):
    logger.info(" ".join(f"{k}={v}" for k, v in kwargs.items()))


class _Timer:
    def __init__(self):
        self.timings_ms: dict[str, float] = {}
        self._t0 = None
        self._stage = None

    def stage(self, name: str):
        now = time.perf_counter()
        if self._stage is not None:
            self.timings_ms[self._stage] = round((now - self._t0) * 1000.0, 3)
            _log_kv(stage=self._stage, elapsed_ms=self.timings_ms[self._stage])
        self._stage = name
        self._t0 = now

    def done(self):
        self.stage("_end")
        self.timings_ms.pop("_end", None)


def _parse_threshold(raw: str):
    if raw == "calibrate":
        return "calibrate"
    try:
        return float(raw)
    except ValueError as exc:
        raise InvalidConfigError(
            f"--threshold must be a number or 'calibrate', got {raw!r}"
        ) from exc


def _metric_config(args, threshold: float = 0.0) -> MetricConfig:
    method = CLI_METHODS[args.method]
    if method == "edit_distance" and isinstance(threshold, float):
        # CLI edit thresholds cut a distance from above; internally the
        # score is 1 - distance, so flip the boundary
        threshold = 1.0 - threshold
    return MetricConfig(
        method=method,
        threshold=threshold if isinstance(threshold, float) else 0.0,
        local_window_m=args.local_window_m,
        grid_n=args.grid_n,
        kl_epsilon=args.kl_epsilon,
        min_profile_points=args.min_profile_points,
    )


def _resolved_config(args, **extra) -> dict:
    keys = (
        "data",
        "format",
        "out",
        "method",
        "threshold",
        "local_window_m",
        "grid_n",
        "kl_epsilon",
        "min_profile_points",
        "cluster_threshold",
        "train_frac",
        "grids",
        "workers",
    )
    out = {k: getattr(args, k) for k in keys if hasattr(args, k)}
    out.update(extra)
    return out


def _load_city(args, require_labels: bool):
    corpus = load_corpus(args.data, fmt=args.format, require_labels=require_labels)
    _log_kv(
        stage="ingest",
        addresses=len(corpus.addresses),
        users=len(corpus.locations),
        labels=len(corpus.labels),
        districts=len(corpus.districts),
        orphan_labels=len(corpus.orphan_labels),
    )
    city = build_city_data(corpus, cluster_threshold=args.cluster_threshold)
    return corpus, city


def _pairs_csv(city: CityData, scores: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["district", "standard_name", "candidate_name", "score", "decision"])
    for district in sorted(scores):
        for pair in scores[district]:
            writer.writerow(
                [
                    district,
                    pair.standard_name,
                    pair.candidate_name,
                    "" if pair.score is None else repr(pair.score),
                    pair.decision,
                ]
            )
    return buf.getvalue()


def _apply_city_threshold(city: CityData, scores: dict, theta: float):
    matrices = {}
    for district, pairs in scores.items():
        dd = city.districts[district]
        matrices[district] = apply_threshold(
            pairs, theta, district, dd.standard_names, dd.candidate_names
        )
    return matrices


def _resolve_theta(args, city, scores, threshold):
    """Numeric threshold straight through; 'calibrate' fits on all labels."""
    if threshold != "calibrate":
        return float(threshold), None
    cal = evaluation.calibrate_on_districts(city, scores, sorted(scores))
    _log_kv(stage="calibrate", theta=cal.theta, train_f1=round(cal.f1, 6))
    return cal.theta, cal


def _write_manifest(args, command: str, timer: _Timer, counts: dict, config: dict):
    manifest = {
        "command": command,
        "config": config,
        "counts": counts,
        "timings_ms": timer.timings_ms,
    }
    _write_json(os.path.join(args.out, "run_manifest.json"), manifest)


# ---------------------------------------------------------------- commands


def _cmd_synth(args) -> int:
    timer = _Timer()
    timer.stage("generate")
    overrides = {}
    for item in args.config or []:
        if "=" not in item:
            raise InvalidConfigError(f"--config expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        field_types = {f.name: f.type for f in fields(SynthConfig)}
        if key not in field_types:
            raise InvalidConfigError(f"unknown synth config key {key!r}")
        current = getattr(SynthConfig(), key)
        if isinstance(current, tuple):
            parts = [int(v) for v in value.split(",")]
            if len(parts) != 2:
                raise InvalidConfigError(f"{key} expects 'lo,hi', got {value!r}")
            overrides[key] = tuple(parts)
        elif isinstance(current, bool):
            overrides[key] = value.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            overrides[key] = int(value)
        elif isinstance(current, float):
            overrides[key] = float(value)
        else:
            overrides[key] = value
    config = SynthConfig(seed=args.seed, **overrides)
    os.makedirs(args.out, exist_ok=True)
    summary = generate_city(config, args.out)
    _log_kv(stage="synth", **{k: v for k, v in summary.items() if k != "out_dir"})
    timer.done()
    _write_manifest(args, "synth", timer, summary, asdict(config))
    return 0


def _cmd_ingest_check(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus = load_corpus(args.data, fmt=args.format, require_labels=False)
    by_district = partition_by_district(corpus.addresses)
    report = {
        "files": {name: rep.to_dict() for name, rep in corpus.reports.items()},
        "districts": {
            d: {"addresses": len(recs)} for d, recs in sorted(by_district.items())
        },
        "n_users_with_locations": len(corpus.locations),
        "n_labels": len(corpus.labels),
        "orphan_labels": [
            {
                "district": lb.district,
                "standard_name": lb.standard_name,
                "candidate_name": lb.candidate_name,
                "reason": reason,
            }
            for lb, reason in corpus.orphan_labels
        ],
    }
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    _write_json(os.path.join(args.out, "ingest_report.json"), report)
    timer.done()
    counts = {
        "addresses": len(corpus.addresses),
        "users": len(corpus.locations),
        "labels": len(corpus.labels),
        "row_errors": sum(r.n_errors for r in corpus.reports.values()),
        "orphan_labels": len(corpus.orphan_labels),
    }
    _write_manifest(args, "ingest-check", timer, counts, _resolved_config(args))
    n_err = counts["row_errors"]
    _log_kv(stage="ingest-check", row_errors=n_err)
    return 0


def _cmd_preprocess(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus, city = _load_city(args, require_labels=False)
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    by_district = partition_by_district(corpus.addresses)
    n_raw = 0
    n_canonical = 0
    for district, dd in sorted(city.districts.items()):
        raw_names = sorted({rec.poi_name for rec in by_district.get(district, [])})
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["raw_name", "canonical_name"])
        for raw in raw_names:
            writer.writerow([raw, dd.canonical_map.resolve(clean_text(raw))])
        _atomic_write(os.path.join(args.out, f"canonical_{district}.csv"), buf.getvalue())
        n_raw += len(raw_names)
        n_canonical += len(dd.canonical_map.cluster_sizes)
    timer.done()
    counts = {"raw_names": n_raw, "canonical_names": n_canonical, "districts": len(city.districts)}
    _log_kv(stage="preprocess", **counts)
    _write_manifest(args, "preprocess", timer, counts, _resolved_config(args))
    return 0


def _score_command_setup(args, require_labels: bool):
    corpus, city = _load_city(args, require_labels=require_labels)
    threshold = _parse_threshold(args.threshold)
    base = _metric_config(args, threshold if isinstance(threshold, float) else 0.0)
    return corpus, city, base, threshold


def _cmd_discover(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus, city, config, threshold = _score_command_setup(
        args, require_labels=args.threshold == "calibrate"
    )
    timer.stage("score")
    scores = score_city(city, config, workers=args.workers)
    timer.stage("calibrate")
    theta, cal = _resolve_theta(args, city, scores, threshold)
    matrices = _apply_city_threshold(city, scores, theta)
    n_links = sum(len(m.links) for m in matrices.values())
    n_pairs = sum(len(p) for p in scores.values())
    _log_kv(stage="discover", pairs=n_pairs, links=n_links)
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    _atomic_write(os.path.join(args.out, "aliases.csv"), _pairs_csv(city, scores))
    if args.dump_density and config.method in ("kl_div", "jaccard"):
        from .distribution import rasterize

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["district", "name", "row", "col", "count"])
        for district, dd in sorted(city.districts.items()):
            if dd.bbox is None:
                continue
            for name in sorted(dd.profiles):
                prof = dd.profiles[name]
                if not prof.point_count:
                    continue
                dm = rasterize(prof, dd.bbox, config.grid_n)
                for cell, count in zip(dm.cells.tolist(), dm.counts.tolist()):
                    writer.writerow(
                        [district, name, cell // dm.n_grid, cell % dm.n_grid, count]
                    )
        _atomic_write(os.path.join(args.out, "density.csv"), buf.getvalue())
    if args.dump_profiles:
        lines = []
        for district, dd in sorted(city.districts.items()):
            for name in sorted(dd.profiles):
                prof = dd.profiles[name]
                lines.append(
                    json.dumps(
                        {
                            "district": district,
                            "name": name,
                            "user_count": prof.user_count,
                            "point_count": prof.point_count,
                        },
                        sort_keys=True,
                    )
                )
        _atomic_write(os.path.join(args.out, "profiles.jsonl"), "\n".join(lines) + "\n")
    timer.done()
    config_echo = _resolved_config(args, resolved_theta=evaluation.json_safe(theta))
    counts = {"pairs": n_pairs, "links": n_links, "districts": len(city.districts)}
    _write_manifest(args, "discover", timer, counts, config_echo)
    return 0


def _cmd_evaluate(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus, city, config, threshold = _score_command_setup(args, require_labels=True)
    timer.stage("score")
    scores = score_city(city, config, workers=args.workers)
    timer.stage("calibrate")
    theta, cal = _resolve_theta(args, city, scores, threshold)
    timer.stage("evaluate")
    report = evaluation.evaluate_districts(
        city,
        scores,
        theta,
        method=args.method,
        config=_resolved_config(args, resolved_theta=evaluation.json_safe(theta)),
    )
    _log_kv(stage="evaluate", f1=round(report.f1, 6), precision=round(report.precision, 6), recall=round(report.recall, 6))
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    payload = {"command": "evaluate", "report": report.to_dict()}
    if cal is not None:
        payload["calibration"] = {
            "theta": evaluation.json_safe(cal.theta),
            "train_f1": cal.f1,
            "n_candidates": cal.n_candidates,
        }
    _write_json(os.path.join(args.out, "report.json"), payload)
    timer.done()
    counts = {
        "pairs": sum(len(p) for p in scores.values()),
        "true_positive": report.true_positive,
        "predicted_positive": report.predicted_positive,
        "actual_positive": report.actual_positive,
    }
    _write_manifest(args, "evaluate", timer, counts, _resolved_config(args))
    return 0


def _cmd_crossval(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus, city = _load_city(args, require_labels=True)
    config = _metric_config(args)
    timer.stage("score")
    scores = score_city(city, config, workers=args.workers)
    timer.stage("evaluate")
    report = evaluation.district_cross_validation(
        city, scores, train_frac=args.train_frac, method=args.method
    )
    _log_kv(stage="crossval", folds=len(report.folds), mean_f1=round(report.mean_f1, 6))
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "command": "crossval",
        "config": _resolved_config(args),
        "report": report.to_dict(),
    }
    _write_json(os.path.join(args.out, "report.json"), payload)
    timer.done()
    _write_manifest(
        args,
        "crossval",
        timer,
        {"folds": len(report.folds)},
        _resolved_config(args),
    )
    return 0


def _cmd_transfer(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    source = load_corpus(args.source, fmt=args.format, require_labels=True)
    target = load_corpus(args.target, fmt=args.format, require_labels=True)
    source_city = build_city_data(source, cluster_threshold=args.cluster_threshold)
    target_city = build_city_data(target, cluster_threshold=args.cluster_threshold)
    config = _metric_config(args)
    timer.stage("score")
    source_scores = score_city(source_city, config, workers=args.workers)
    target_scores = score_city(target_city, config, workers=args.workers)
    timer.stage("evaluate")
    report = evaluation.cross_city_transfer(
        source_city, source_scores, target_city, target_scores, method=args.method
    )
    _log_kv(
        stage="transfer",
        theta=report.theta,
        source_f1=round(report.source_report.f1, 6),
        target_f1=round(report.target_report.f1, 6),
    )
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    payload = {
        "command": "transfer",
        "config": _resolved_config(args, source=args.source, target=args.target),
        "report": report.to_dict(),
    }
    _write_json(os.path.join(args.out, "report.json"), payload)
    timer.done()
    _write_manifest(args, "transfer", timer, {}, _resolved_config(args))
    return 0


def _cmd_sweep(args) -> int:
    timer = _Timer()
    timer.stage("ingest")
    corpus, city = _load_city(args, require_labels=True)
    grids = [int(g) for g in args.grids.split(",") if g.strip()]
    if not grids:
        raise InvalidConfigError(f"--grids produced no values from {args.grids!r}")
    base = _metric_config(args)
    timer.stage("sweep")
    results = evaluation.resolution_sweep(
        city, CLI_METHODS[args.method], grids, base, workers=args.workers
    )
    timer.stage("write")
    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["grid_n", "method", "precision", "recall", "f1"])
    for n, rep in results:
        writer.writerow([n, args.method, repr(rep.precision), repr(rep.recall), repr(rep.f1)])
    _atomic_write(os.path.join(args.out, "sweep.csv"), buf.getvalue())
    payload = {
        "command": "sweep",
        "config": _resolved_config(args),
        "results": [{"grid_n": n, "report": rep.to_dict()} for n, rep in results],
    }
    _write_json(os.path.join(args.out, "report.json"), payload)
    timer.done()
    _write_manifest(args, "sweep", timer, {"grids": len(results)}, _resolved_config(args))
    print(f"{'grid_n':>8} {'precision':>10} {'recall':>10} {'f1':>10}")
    for n, rep in results:
        print(f"{n:>8} {rep.precision:>10.4f} {rep.recall:>10.4f} {rep.f1:>10.4f}")
    return 0


# ---------------------------------------------------------------- parser


def _add_data_opts(p):
    p.add_argument("data", help="data directory holding addresses/locations/labels files")
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")


def _add_common_opts(p):
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--verbose", action="store_true")
    p.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker pool size for per-district scoring",
    )


def _add_tunables(p):
    p.add_argument("--local-window-m", type=float, default=640.0, dest="local_window_m")
    p.add_argument("--grid-n", type=int, default=50, dest="grid_n")
    p.add_argument("--kl-epsilon", type=float, default=1e-9, dest="kl_epsilon")
    p.add_argument(
        "--min-profile-points", type=int, default=5, dest="min_profile_points"
    )
    p.add_argument(
        "--cluster-threshold", type=float, default=0.2, dest="cluster_threshold"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poialias",
        description="Discover POI name aliases from delivery addresses and user GPS locations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic city")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--config", action="append", metavar="KEY=VALUE", help="override a synth config field")
    _add_common_opts(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("ingest-check", help="parse inputs and report row errors and orphans")
    _add_data_opts(p)
    _add_common_opts(p)
    p.set_defaults(func=_cmd_ingest_check)

    p = sub.add_parser("preprocess", help="emit per-district canonical name maps")
    _add_data_opts(p)
    _add_common_opts(p)
    _add_tunables(p)
    p.set_defaults(func=_cmd_preprocess)

    method_help = "similarity method"
    for name, handler, needs_threshold in (
        ("discover", _cmd_discover, True),
        ("evaluate", _cmd_evaluate, True),
        ("crossval", _cmd_crossval, False),
    ):
        p = sub.add_parser(name)
        _add_data_opts(p)
        p.add_argument("--method", choices=sorted(CLI_METHODS), required=True, help=method_help)
        if needs_threshold:
            p.add_argument(
                "--threshold",
                default="calibrate",
                help="numeric threshold or 'calibrate' (default)",
            )
        if name == "crossval":
            p.add_argument("--train-frac", type=float, default=0.8, dest="train_frac")
        if name == "discover":
            p.add_argument("--dump-profiles", action="store_true", dest="dump_profiles")
            p.add_argument("--dump-density", action="store_true", dest="dump_density")
        _add_common_opts(p)
        _add_tunables(p)
        p.set_defaults(func=handler)

    p = sub.add_parser("transfer", help="calibrate on a source city, evaluate on a target city")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--method", choices=sorted(CLI_METHODS), required=True)
    _add_common_opts(p)
    _add_tunables(p)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("sweep", help="calibrate and evaluate across grid resolutions")
    _add_data_opts(p)
    p.add_argument("--method", choices=("kl", "jaccard"), required=True)
    p.add_argument("--grids", default="20,50,150,300,500")
    _add_common_opts(p)
    _add_tunables(p)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (PoiAliasError, FileNotFoundError, OSError) as exc:
        print(f"error: command={args.command} {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
