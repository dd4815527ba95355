"""Command-line entry point: experiments, sweeps, and data tooling."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config, override
from .data import IdxFormatError, load_idx
from .graph import format_edge_list, graph_at
from .harness import build_schedule, emit_csv, emit_plot, format_summary, montecarlo, read_csv, run_mode, summarize

FMNIST_NAMES = (
    "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colearn",
        description="Multi-agent consensus-labeling experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a single run of a config")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="output directory")

    p = sub.add_parser("montecarlo", help="execute all configured runs")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("sweep", help="repeat the Monte Carlo over parameter values")
    p.add_argument("config", type=Path)
    p.add_argument("--param", required=True, help="parameter name, e.g. gamma")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("graph-dump", help="print one round's edge list")
    p.add_argument("config", type=Path)
    p.add_argument("--iter", type=int, default=0, dest="iteration")

    p = sub.add_parser("data-check", help="validate IDX dataset files")
    p.add_argument("paths", nargs="+", type=Path,
                   help="a dataset directory or 4 files: train/test images+labels")

    p = sub.add_parser("plot", help="render a metrics CSV as an SVG chart")
    p.add_argument("csv", type=Path)
    p.add_argument("svg", type=Path)
    return parser


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def _out_dir(args, suffix: str = "") -> Path:
    out = args.out if args.out is not None else Path("results") / args.config.stem
    out = out / suffix if suffix else out
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_run(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args)
    output = run_mode(config, run_index=0, manifest_path=out / "manifest.txt")
    emit_csv(output.records, out / "metrics.csv")
    emit_plot(output.records, out / "plot.svg")
    rows = summarize(config.mode, [output])
    text = format_summary(rows)
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    print(f"wrote {out}/metrics.csv, plot.svg, summary.txt, manifest.txt")
    return 0


def _cmd_montecarlo(args) -> int:
    config = load_config(args.config)
    out = _out_dir(args)
    manifest_dir = out / "manifests"
    manifest_dir.mkdir(exist_ok=True)
    rows, outputs = montecarlo(config, jobs=args.jobs, manifest_dir=manifest_dir)
    records = [r for o in outputs for r in o.records]
    emit_csv(records, out / "metrics.csv")
    emit_plot(records, out / "plot.svg")
    text = format_summary(rows)
    (out / "summary.txt").write_text(text + "\n", encoding="utf-8")
    print(text)
    print(f"wrote {out}/metrics.csv, plot.svg, summary.txt, manifests/")
    return 0


def _cmd_sweep(args) -> int:
    base = load_config(args.config)
    values = [_parse_value(v.strip()) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ConfigError("--values: expected at least one value")
    out = _out_dir(args)
    for value in values:
        config = override(base, args.param, value)
        sub = out / f"{args.param}_{value}"
        sub.mkdir(parents=True, exist_ok=True)
        rows, outputs = montecarlo(config, jobs=args.jobs)
        records = [r for o in outputs for r in o.records]
        emit_csv(records, sub / "metrics.csv")
        text = format_summary(rows)
        (sub / "summary.txt").write_text(text + "\n", encoding="utf-8")
        print(f"== {args.param} = {value}")
        print(text)
    return 0


def _cmd_graph_dump(args) -> int:
    config = load_config(args.config)
    if args.iteration < 0:
        raise ConfigError("--iter: must be >= 0")
    g = graph_at(build_schedule(config), args.iteration)
    text = format_edge_list(g)
    if text:
        print(text)
    return 0


def _cmd_data_check(args) -> int:
    paths = args.paths
    if len(paths) == 1 and paths[0].is_dir():
        paths = [paths[0] / name for name in FMNIST_NAMES]
    if len(paths) != 4:
        raise ConfigError(
            "data-check: expected a dataset directory or exactly 4 paths "
            "(train images, train labels, test images, test labels)"
        )
    for p in paths:
        if not p.is_file():
            raise ConfigError(f"data-check: file not found: {p}")
    train = load_idx(paths[0], paths[1])
    test = load_idx(paths[2], paths[3])
    print(f"{train.m} train / {test.m} test")
    return 0


def _cmd_plot(args) -> int:
    if not args.csv.is_file():
        raise ConfigError(f"plot: file not found: {args.csv}")
    emit_plot(read_csv(args.csv), args.svg)
    print(f"wrote {args.svg}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "montecarlo": _cmd_montecarlo,
    "sweep": _cmd_sweep,
    "graph-dump": _cmd_graph_dump,
    "data-check": _cmd_data_check,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, IdxFormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
