"""Command-line entry point: ``lifsel {benchmark,histogram,rates,tables}``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import harness, kernels
from .config import ConfigError, load_config

log = logging.getLogger("lifsel")


def _load(args):
    overrides = {}
    if args.replicates is not None:
        overrides["replicates"] = str(args.replicates)
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.seed is not None:
        overrides["master_seed"] = str(args.seed)
    if args.sigma_scale is not None:
        overrides["sigma_scale"] = args.sigma_scale
    return load_config(args.config, overrides)


def _cmd_benchmark(args) -> int:
    cfg = _load(args)
    t0 = time.perf_counter()
    rows = harness.run_benchmark(cfg, threads=args.threads)
    report = harness.write_report(rows, cfg.output_dir / "report.csv")
    table = cfg.output_dir / "table.md"
    harness.emit_table(rows, table)
    log.info("%d rows in %.1fs (kernels: %s)", len(rows), time.perf_counter() - t0, kernels.BACKEND)
    print(report)
    print(table)
    return 0


def _cmd_histogram(args) -> int:
    cfg = _load(args)
    hist = harness.level_histogram(cfg, threads=args.threads)
    for path in harness.write_levels(hist, cfg.output_dir):
        print(path)
    return 0


def _cmd_rates(args) -> int:
    cfg = _load(args)
    rc = cfg.rates
    if rc is None:
        raise ConfigError("rates: section missing")
    slope, se, curve = harness.rate_slope(
        rc.signal, rc.functional, rc.n_list, cfg.sigma, rc.replicates, cfg.master_seed, args.threads
    )
    path = harness.write_rates(curve, cfg.output_dir / "rates.csv")
    print(path)
    print(f"slope {slope:.4f} (se {se:.4f})")
    return 0


def _cmd_tables(args) -> int:
    rows = harness.read_report(args.report)
    out = Path(args.out) if args.out else Path(args.report).with_name("table.md")
    text = harness.emit_table(rows, out)
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lifsel", description="Adaptive linear-functional estimation experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("benchmark", _cmd_benchmark, "risk tables: report.csv and table.md"),
        ("histogram", _cmd_histogram, "selected-level counts: levels.csv"),
        ("rates", _cmd_rates, "risk against n and the fitted exponent: rates.csv"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", help="INI experiment file")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: LIFSEL_THREADS or all cores)")
        p.add_argument("--replicates", type=int, default=None, help="override N")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--output-dir", default=None, help="override output_dir")
        p.add_argument("--sigma-scale", choices=("definition-1", "paper-4.2"), default=None,
                       help="variance scale for integral functionals")
        p.set_defaults(func=fn)
    p = sub.add_parser("tables", help="re-render table.md from a report.csv")
    p.add_argument("report")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_tables)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"lifsel: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
