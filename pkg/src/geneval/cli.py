"""Command-line entry point: ``geneval <experiment> --config <file> ...``."""

from __future__ import annotations

import argparse
import sys

from .datasets import DATASET_SOURCES, verify_dataset_files
from .experiments import EXPERIMENTS, load_config, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geneval",
        description="Seeded generative-model evaluation experiments with CSV output.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<experiment>")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker thread cap")
        p.add_argument("--out", help="output directory (default geneval-out)")
        p.add_argument(
            "--gnuplot",
            action="store_true",
            help="order CSV columns numeric-first for direct gnuplot use",
        )
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config parameter; repeatable",
        )
    fetch = sub.add_parser("fetch", help="print dataset URLs and verify checksums")
    fetch.add_argument("--dataset", required=True, choices=sorted(DATASET_SOURCES))
    fetch.add_argument("--dir", help="directory of already-downloaded files to verify")
    return parser


def _parse_overrides(items) -> dict[str, str]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    return overrides


def _run_fetch(args) -> int:
    print(f"{args.dataset}: official sources (this tool never downloads)")
    for url, sha in DATASET_SOURCES[args.dataset]:
        print(f"  {url}")
        print(f"    sha256 {sha}")
    if args.dir:
        bad = 0
        for filename, status, digest in verify_dataset_files(args.dataset, args.dir):
            print(f"  {filename}: {status}" + (f" (computed {digest})" if digest else ""))
            bad += status != "ok"
        return 1 if bad else 0
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fetch":
            return _run_fetch(args)
        config = load_config(
            args.command,
            config_path=args.config,
            overrides=_parse_overrides(args.set),
            seed=args.seed,
            out_dir=args.out,
            threads=args.threads,
            gnuplot=args.gnuplot,
        )
        outputs = run_experiment(config)
        for path in outputs:
            print(path)
        return 0
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"geneval: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
