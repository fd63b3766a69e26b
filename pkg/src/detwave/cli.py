"""Command-line entry point: ``detwave {run,sync,analyze,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from detwave import io
from detwave.config import load_config, _parse_r
from detwave.errors import (
    AdmissibilityError,
    CFLError,
    ConfigError,
    LambdaInfiniteError,
    ResolutionError,
    SnapshotError,
)
from detwave.experiments import analyze_snapshot, report_series, run_simulation, run_sync
from detwave.wavenumber import TupleGrid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("detwave")


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _tuples_arg(text):
    """``rs=2,4,inf;deltas=0,0.5`` (either part optional)."""
    rs, deltas = None, None
    for part in text.split(";"):
        if not part.strip():
            continue
        key, _, val = part.partition("=")
        key = key.strip()
        try:
            if key == "rs":
                rs = [_parse_r(x) for x in val.split(",") if x.strip()]
            elif key == "deltas":
                deltas = _float_list(val)
            else:
                raise ConfigError(f"--tuples: unknown key {key!r}", key=f"tuples.{key}")
        except ValueError as e:
            raise ConfigError(f"--tuples: {e}", key=f"tuples.{key}") from None
    kw = {}
    if rs is not None:
        kw["rs"] = rs
    if deltas is not None:
        kw["deltas"] = deltas
    try:
        return TupleGrid.from_lists(**kw) if kw else TupleGrid.default()
    except (AdmissibilityError, ValueError) as e:
        raise ConfigError(f"--tuples: {e}", key="tuples") from None


def build_parser():
    p = argparse.ArgumentParser(prog="detwave", description="Determining-wavenumber experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="DNS with per-sample wavenumber diagnostics")
    r.add_argument("config")
    r.add_argument("--summary", default=None, help="JSON summary path (default <out>/run.json)")

    s = sub.add_parser("sync", help="twin synchronization experiment")
    s.add_argument("config")
    s.add_argument("--summary", default=None, help="DecayFit JSON path (default <out>/decay.json)")

    a = sub.add_parser("analyze", help="offline analysis of a snapshot")
    a.add_argument("snapshot")
    a.add_argument("--nu", type=float, default=None, help="viscosity (default: from the header)")
    a.add_argument("--tuples", type=str, default=None, help="e.g. 'rs=2,4,inf;deltas=0,0.5,1'")
    a.add_argument("-o", "--output", default="-")

    rep = sub.add_parser("report", help="bound report over a series window")
    rep.add_argument("series")
    rep.add_argument("--window", type=float, default=None, dest="T")
    rep.add_argument("--start", type=float, default=None)
    rep.add_argument("--convention", choices=("definition", "equality"), default="definition")
    rep.add_argument("-o", "--output", default="-")
    return p


def _cmd_run(args):
    cfg = load_config(args.config)
    res = run_simulation(cfg)
    summary = {k: v for k, v in res.items() if k not in ("final_state", "window")}
    if cfg.window_T is not None and res["samples"] >= 2:
        try:
            summary["report"] = report_series(res["series"], cfg.window_T, convention=cfg.convention)
        except ValueError as e:
            summary["report_error"] = str(e)
    path = args.summary or str(Path(cfg.output.dir) / "run.json")
    io.write_json(path, summary)
    return EXIT_OK


def _cmd_sync(args):
    cfg = load_config(args.config)
    summary, _ = run_sync(cfg)
    path = args.summary or str(Path(cfg.output.dir) / "decay.json")
    io.write_json(path, summary)
    return EXIT_OK


def _cmd_analyze(args):
    tuples = _tuples_arg(args.tuples) if args.tuples else None
    if args.nu is not None and not args.nu > 0:
        raise ConfigError(f"--nu must be positive, got {args.nu}", key="nu")
    io.write_json(args.output, analyze_snapshot(args.snapshot, args.nu, tuples))
    return EXIT_OK


def _cmd_report(args):
    if args.T is not None and not args.T > 0:
        raise ConfigError(f"--window must be positive, got {args.T}", key="window")
    io.write_json(args.output, report_series(args.series, args.T, args.start, args.convention))
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sync": _cmd_sync, "analyze": _cmd_analyze, "report": _cmd_report}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CFLError, LambdaInfiniteError, ResolutionError, FloatingPointError) as e:
        print(f"numeric abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SnapshotError, OSError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"numeric abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
