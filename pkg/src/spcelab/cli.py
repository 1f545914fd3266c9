"""Command-line interface.

Verbs: ``simulate``, ``analyze``, ``sweep``, ``validate-config``.

Exit codes distinguish what happened, not just that something did:

* 0 - clean run or analysis,
* 2 - error (bad config, unreadable input, invalid arguments),
* 3 - statistical rejection verdict (CHSH violation flagged, purity
  rejected, factorization failed); the report still prints normally.

The default output directory is the first of ``--out``, the config's
``out`` key, the ``SPCELAB_OUT_DIR`` environment variable, and the
current directory.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .backend import available_backends, backend_name
from .config import load_config
from .errors import SpceLabError
from .harness import (
    ANALYSIS_KINDS,
    SWEEP_METRICS,
    analyze,
    resolve_out_dir,
    simulate,
    sweep,
    write_report,
)
from .series_io import format_kv_csv, format_kv_text

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_REJECT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spcelab",
        description="Simulate and analyze two-station coincidence experiments.",
    )
    parser.add_argument(
        "--backend-info",
        action="store_true",
        help="print the active compute backend and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p_sim = sub.add_parser("simulate", help="run one configured experiment and write series files")
    p_sim.add_argument("config", help="flat key-value config file")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--out", default=None, help="output directory")
    p_sim.add_argument("--parallelism", type=int, default=1, help="worker threads for generation")
    p_sim.add_argument("--format", choices=("text", "csv"), default="text", help="stdout summary format")

    p_an = sub.add_parser("analyze", help="analyze recorded series or response tables")
    p_an.add_argument("kind", choices=ANALYSIS_KINDS)
    p_an.add_argument("inputs", nargs="+", help="series files (chsh: 4 in term order; purity: 1) or table file")
    p_an.add_argument("--normalization", choices=("detected", "raw"), default="detected",
                      help="chsh: correlation denominator convention")
    p_an.add_argument("--alpha", type=float, default=0.05, help="purity: family error level")
    p_an.add_argument("--subsamples", type=int, default=5, help="purity: number of random subsamples")
    p_an.add_argument("--fraction", type=float, default=0.1, help="purity: subsample fraction")
    p_an.add_argument("--tol", type=float, default=1e-10, help="factorization: violation tolerance")
    p_an.add_argument("--seed", type=int, default=0, help="purity: subsampling seed")
    p_an.add_argument("--out", default=None, help="also write the report file into this directory")
    p_an.add_argument("--format", choices=("text", "csv"), default="text", help="report format")

    p_sw = sub.add_parser("sweep", help="simulate+analyze over a parameter grid")
    p_sw.add_argument("config", help="template config file")
    p_sw.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...",
                      help="swept key and values; repeat for a product grid")
    p_sw.add_argument("--metric", choices=SWEEP_METRICS, required=True)
    p_sw.add_argument("--seed", type=int, default=None, help="master seed for per-point seeds")
    p_sw.add_argument("--out", default=None, help="sweep output directory")
    p_sw.add_argument("--parallelism", type=int, default=1)
    p_sw.add_argument("--format", choices=("text", "csv"), default="text", help="stdout summary format")

    p_val = sub.add_parser("validate-config", help="parse and validate a config file")
    p_val.add_argument("config")
    p_val.add_argument("--format", choices=("text", "csv"), default="text")
    return parser


def _emit(pairs, fmt: str) -> None:
    if fmt == "csv":
        sys.stdout.write(format_kv_csv(pairs))
    else:
        sys.stdout.write(format_kv_text(pairs))


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    manifest = simulate(cfg, out_dir=resolve_out_dir(args.out, cfg.out), parallelism=args.parallelism)
    pairs = [
        ("run_id", manifest.run_id),
        ("out_dir", manifest.root),
        ("seed", str(manifest.seed)),
        ("config_hash", manifest.config_hash),
        ("n_settings", str(len(manifest.series_items()))),
        ("n_trials", str(cfg.n_trials)),
    ]
    for sid, path in manifest.series_items():
        pairs.append((f"series.{sid}", path))
    _emit(pairs, args.format)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    options = {}
    if args.kind == "chsh":
        options["normalization"] = args.normalization
    elif args.kind == "purity":
        options.update(
            seed=args.seed, alpha=args.alpha, n_subsamples=args.subsamples, fraction=args.fraction
        )
    else:
        options["tol"] = args.tol
    result = analyze(args.kind, args.inputs, **options)
    sys.stdout.write(result.csv() if args.format == "csv" else result.text())
    if args.out:
        path = write_report(result, args.out, fmt=args.format)
        print(f"# report written to {path}", file=sys.stderr)
    return EXIT_REJECT if result.rejects else EXIT_OK


def _parse_grid(specs) -> list:
    grid = []
    for spec in specs:
        key, eq, values = spec.partition("=")
        if not eq or not key.strip():
            raise SpceLabError(f"--grid expects KEY=V1,V2,..., got {spec!r}")
        grid.append((key.strip(), [v.strip() for v in values.split(",") if v.strip()]))
    return grid


def _cmd_sweep(args) -> int:
    from .config import parse_flat_config

    with open(args.config, "r", encoding="utf-8") as fh:
        template = parse_flat_config(fh.read(), source=args.config)
    result = sweep(
        template,
        _parse_grid(args.grid),
        metric=args.metric,
        out_dir=resolve_out_dir(args.out, template.get("out")),
        master_seed=args.seed,
        parallelism=args.parallelism,
    )
    pairs = [
        ("metric", result.metric),
        ("master_seed", str(result.master_seed)),
        ("n_points", str(len(result.rows))),
        ("n_failed", str(len(result.failures))),
        ("table", result.csv_path),
    ]
    for row in result.failures:
        label = ";".join(f"{k}={v}" for k, v in row.overrides)
        pairs.append((f"failure.{row.index}", f"{label}: {row.detail}"))
    _emit(pairs, args.format)
    return EXIT_ERROR if result.failures else EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    pairs = [
        ("valid", "true"),
        ("model", cfg.model),
        ("n_trials", str(cfg.n_trials)),
        ("n_settings", str(len(cfg.settings))),
        ("seed", "unset" if cfg.seed is None else str(cfg.seed)),
        ("config_hash", cfg.config_hash()),
    ]
    _emit(pairs, args.format)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.backend_info:
        _emit([("backend", backend_name()), ("available", ",".join(available_backends()))], "text")
        return EXIT_OK
    if args.command is None:
        parser.print_help()
        return EXIT_ERROR
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_validate(args)
    except (SpceLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
