"""Command-line entry point: ``predstab run|sweep|gen-data|plot``.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from collections import OrderedDict
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, config
from .errors import InvalidArgument, ParseError
from .loop import run_experiment, snapshot_dumper
from .pool import BlobSpec, generate_blobs, generate_test_blobs, write_csv_dataset
from .svg import line_chart

log = logging.getLogger("predstab.cli")

METRICS_HEADER = ["strategy", "trial", "round", "labeled_count", "test_accuracy"]


class UsageError(Exception):
    pass


# Metrics files -------------------------------------------------------------

def metrics_rows(result):
    for t, history in enumerate(result.trials):
        for m in history:
            yield [result.strategy, t, m.round, m.labeled_count, f"{m.test_accuracy:.6f}"]


def write_metrics(results, path, prefix_cols=()):
    """``prefix_cols`` is a list of (header, value) pairs prepended to each row."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([h for h, _ in prefix_cols] + METRICS_HEADER)
    for prefix, result in results:
        for row in metrics_rows(result):
            w.writerow(list(prefix) + row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_metrics(path):
    """Rows of a metrics CSV as dicts with typed values; checks the schema."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise UsageError(f"{path}: expected header {','.join(METRICS_HEADER)}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(METRICS_HEADER):
                raise UsageError(f"{path}: line {lineno}: expected {len(METRICS_HEADER)} fields")
            try:
                rows.append({
                    "strategy": row[0],
                    "trial": int(row[1]),
                    "round": int(row[2]),
                    "labeled_count": int(row[3]),
                    "test_accuracy": float(row[4]),
                })
            except ValueError:
                raise UsageError(f"{path}: line {lineno}: malformed value") from None
    if not rows:
        raise UsageError(f"{path}: no metric rows")
    return rows


def mean_curves(rows):
    """strategy -> [(labeled_count, mean accuracy)], strategies in first-seen order."""
    acc = OrderedDict()
    for r in rows:
        acc.setdefault(r["strategy"], OrderedDict()).setdefault(
            r["labeled_count"], []).append(r["test_accuracy"])
    return [
        (name, [(n, sum(v) / len(v)) for n, v in sorted(by_n.items())])
        for name, by_n in acc.items()
    ]


def curves_svg(rows, title=""):
    return line_chart(mean_curves(rows), "labeled samples", "mean test accuracy", title)


# Commands ------------------------------------------------------------------

def _resolve(args, extra_overrides=()):
    values = config.load(args.config, list(args.set or ()) + list(extra_overrides))
    if args.seed is not None:
        values["al.master_seed"] = args.seed
    return values


def _run_all(values, dump_dir=None):
    cfgs = config.experiment_configs(values)
    data = cfgs[0].data.load()
    results, dumps = [], []
    for cfg in cfgs:
        sink = None
        if dump_dir is not None and cfg.strategy.is_sequential:
            sink = snapshot_dumper(dump_dir, cfg.strategy.label)
        results.append(run_experiment(cfg, data, jobs=values["run.jobs"], snapshot_sink=sink))
        if sink is not None:
            dumps.extend(str(p) for p in sink.written)
    return results, dumps


def _manifest(out, values, artifacts, **extra):
    manifest = {
        "tool": "predstab",
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": {k: config.format_value(v) for k, v in sorted(values.items())},
        "artifacts": artifacts,
        **extra,
    }
    path = Path(out) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def cmd_run(args):
    values = _resolve(args)
    config.experiment_configs(values)  # validate before touching the filesystem
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_dir = out / "snapshots" if args.dump_snapshots else None
    results, dumps = _run_all(values, dump_dir)

    metrics_path = out / "metrics.csv"
    write_metrics([((), r) for r in results], metrics_path)
    svg_path = out / "curves.svg"
    svg_path.write_text(curves_svg(read_metrics(metrics_path)), encoding="utf-8")
    artifacts = {"metrics": str(metrics_path), "svg": str(svg_path)}
    if dumps:
        artifacts["snapshots"] = dumps
    _manifest(out, values, artifacts)
    for r in results:
        print(f"{r.strategy}: final mean accuracy {r.mean[-1]:.4f} "
              f"(std {r.std[-1]:.4f}, {len(r.trials)} trials)")
    return 0


def cmd_sweep(args):
    key, sep, raw = args.param.partition("=")
    key = key.strip()
    if not sep or not raw.strip():
        raise config.ConfigError(args.param, "sweep parameter must look like key=v1,v2,...")
    if key not in config.SCHEMA:
        raise config.ConfigError(key, "unknown configuration key")
    if key not in config.NUMERIC_KEYS:
        raise config.ConfigError(key, "only numeric keys can be swept")
    raw_values = [v.strip() for v in raw.split(",") if v.strip()]
    # Validate every point before running any of them.
    resolved = []
    for v in raw_values:
        values = _resolve(args, [f"{key}={v}"])
        config.experiment_configs(values)
        resolved.append((v, values))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combined, final = [], OrderedDict()
    for v, values in resolved:
        results, _ = _run_all(values)
        for r in results:
            combined.append(((key, v), r))
            final.setdefault(r.strategy, []).append((values[key], float(r.mean[-1])))

    sweep_csv = out / "sweep.csv"
    write_metrics([((v,), r) for (_, v), r in combined], sweep_csv, prefix_cols=[(key, None)])
    svg_path = out / "sweep.svg"
    svg_path.write_text(
        line_chart(list(final.items()), key, "final mean test accuracy"), encoding="utf-8"
    )
    _manifest(out, resolved[0][1], {"metrics": str(sweep_csv), "svg": str(svg_path)},
              sweep={"key": key, "values": raw_values})
    for name, pts in final.items():
        print(name + ": " + ", ".join(f"{key}={x:g} -> {y:.4f}" for x, y in pts))
    return 0


def cmd_gen_data(args):
    try:
        spec = BlobSpec(
            num_classes=args.classes,
            samples_per_class=args.samples_per_class,
            dim=args.dim,
            center_scale=args.center_scale,
            noise_sigma=args.noise_sigma,
            seed=args.seed,
        )
    except InvalidArgument as exc:
        raise UsageError(str(exc)) from None
    ds = generate_blobs(spec)
    write_csv_dataset(ds, args.out)
    if args.test_out:
        write_csv_dataset(generate_test_blobs(spec), args.test_out)
    print(f"n={len(ds)} d={ds.dim} C={ds.num_classes}")
    return 0


def cmd_plot(args):
    rows = []
    for p in args.metrics:
        rows.extend(read_metrics(p))
    Path(args.out).write_text(curves_svg(rows, args.title or ""), encoding="utf-8")
    return 0


# Parser --------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="predstab",
        description="Pool-based active learning with prediction-stability acquisition.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--seed", type=int, help="override al.master_seed")

    p = sub.add_parser("run", help="run one experiment per configured strategy")
    experiment_flags(p)
    p.add_argument("--dump-snapshots", action="store_true",
                   help="write per-round snapshot CSVs for sequential strategies")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="repeat the experiment over values of one key")
    experiment_flags(p)
    p.add_argument("--param", required=True, metavar="KEY=V1,V2,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-data", help="write a synthetic blob dataset CSV")
    p.add_argument("--classes", type=int, default=4)
    p.add_argument("--samples-per-class", type=int, default=100)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--center-scale", type=float, default=1.0)
    p.add_argument("--noise-sigma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--test-out", help="also write a test split here")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("plot", help="render mean accuracy curves from metrics CSVs")
    p.add_argument("metrics", nargs="+", help="metrics CSV files")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (config.ConfigError, UsageError) as exc:
        print(f"predstab: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ParseError, InvalidArgument, RuntimeError) as exc:
        print(f"predstab: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
