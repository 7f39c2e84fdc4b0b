"""Command line entry point: ``slabmhd <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Dict, List, Optional

from ..errors import SlabError
from .config import load_config
from .experiments import run_experiment, run_experiment_2d, run_sweep, validate_pressure
from .report import make_report

COMMANDS = {
    "run3d": run_experiment,
    "run2d": run_experiment_2d,
    "sweep-delta": run_sweep,
    "validate-pressure": validate_pressure,
}


def parse_overrides(items: List[str]) -> Dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise SlabError(f"--set expects section.key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slabmhd", description="Thin-slab Elsässer MHD experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="INI file; defaults are used when omitted")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override one key")
        sp.add_argument("--out", help="output directory (default: run.output_dir/run.name)")
        sp.add_argument("--check", action="store_true", help="exit with status 1 when a threshold fails")
        if name == "sweep-delta":
            sp.add_argument("--workers", type=int, help="concurrent sweep members")
    rp = sub.add_parser("report")
    rp.add_argument("path", help="artifact directory")
    rp.add_argument("--quantities", help="comma-separated series columns to plot")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            q = [s for s in args.quantities.split(",") if s] if args.quantities else None
            print(make_report(args.path, q))
            return 0
        cfg = load_config(args.config, parse_overrides(args.set))
        kwargs = {"workers": args.workers} if args.command == "sweep-delta" else {}
        summary = COMMANDS[args.command](cfg, args.out, **kwargs)
    except SlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    failed = [k for k, v in summary.get("checks", {}).items() if v is False]
    print(f"{args.command}: {'FAIL ' + ', '.join(failed) if failed else 'all checks passed'}")
    return 1 if (args.check and failed) else 0


if __name__ == "__main__":
    sys.exit(main())
