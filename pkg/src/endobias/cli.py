"""Command-line front end.

Exit codes: 0 success, 1 runtime error, 2 usage or configuration error,
3 when ``--fail-on-finding`` is set and a warning or critical finding exists.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from . import access as acc
from . import audits
from .config import AuditConfig
from .core import GridSpec, PointSchema, Rect, bounding_box, load_points_csv, rasterize
from .errors import AuditError, ParameterError
from .report import AuditReport, now_utc, write_report

log = logging.getLogger("endobias")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, EXIT_FINDING = 0, 1, 2, 3


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name, "message": record.getMessage()})


class UsageError(Exception):
    pass


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _pair(text: str) -> list[float]:
    return _floats(text, 2)


def _rect(text: str) -> Rect:
    v = _floats(text, 4)
    try:
        return Rect(*v)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="endobias", description="Audit spatial analyses for endogenous bias.")
    p.add_argument("--version", action="version", version=f"endobias {__version__}")
    p.add_argument("--json-logs", action="store_true", help="emit log records as JSON lines on stderr")
    p.add_argument("--threads", type=int, default=None, help="accepted for compatibility; audits run single-threaded")
    p.add_argument("-v", "--verbose", action="store_true")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--no-timestamp", action="store_true", help="omit created_at for reproducible reports")
    common.add_argument("--fail-on-finding", action="store_true", help="exit 3 on any warning or critical finding")

    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simpson", parents=[common], help="pooled vs grouped regression")
    s.add_argument("--input", required=True)
    s.add_argument("--x", required=True, help="predictor column")
    s.add_argument("--y", required=True, help="response column")
    s.add_argument("--group", default="group", help="group label column")
    s.add_argument("--coords", default="x,y", help="coordinate columns, default x,y")
    s.add_argument("--alpha", type=float)
    s.add_argument("--axes", help="comma-separated parallel-coordinate axes")

    g = sub.add_parser("gwr", parents=[common], help="GWR coefficient continuity")
    g.add_argument("--input", required=True)
    g.add_argument("--x1", default="x1")
    g.add_argument("--y", default="y_obs")
    g.add_argument("--coords", default="x,y")
    g.add_argument("--bandwidth", type=float)
    g.add_argument("--search", type=_pair, help="lo,hi for CV bandwidth search")
    g.add_argument("--tolerance", type=float)
    g.add_argument("--threshold-quantile", type=float)
    g.add_argument("--cell-size", type=float, help="evaluation grid cell size (default: sample lattice)")

    k = sub.add_parser("kde", parents=[common], help="KDE bandwidth sweep and false centers")
    k.add_argument("--input", required=True)
    k.add_argument("--coords", default="x,y")
    k.add_argument("--h-lo", type=float)
    k.add_argument("--h-hi", type=float)
    k.add_argument("--steps", type=int)
    k.add_argument("--cell-size", type=float)
    k.add_argument("--radius-factor", type=float)
    k.add_argument("--local-input", help="subset dataset for the gradient-direction comparison")
    k.add_argument("--window", type=_rect, help="min_x,min_y,max_x,max_y comparison window")

    m = sub.add_parser("maup", parents=[common], help="zonal grouping consistency")
    m.add_argument("--input", help="CSV of x,y,value points; omitted: seeded random surface")
    m.add_argument("--value", default="value")
    m.add_argument("--coords", default="x,y")
    m.add_argument("--q", type=float)
    m.add_argument("--block-sides", type=_ints)
    m.add_argument("--offset", type=_ints)
    m.add_argument("--ref-cell-side", type=float)
    m.add_argument("--cell-size", type=float)
    m.add_argument("--side", type=int)
    m.add_argument("--smoothness", type=int)

    a = sub.add_parser("access", parents=[common], help="3SFCA accessibility by population group")
    a.add_argument("--demand", required=True, help="CSV: x,y,pop_total,pop_<group>...")
    a.add_argument("--facilities", required=True, help="CSV: x,y,supply")
    a.add_argument("--d0", type=float)
    a.add_argument("--w-at-d0", type=float)
    a.add_argument("--threshold-ratio", type=float)
    a.add_argument("--cell-size", type=float)

    dm = sub.add_parser("demo", parents=[common], help="run one synthetic experiment end to end")
    dm.add_argument("--experiment", required=True, choices=audits.EXPERIMENTS)
    return p


def _config(args) -> AuditConfig:
    cfg = AuditConfig.load(args.config) if args.config else AuditConfig()
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be non-negative")
        cfg = AuditConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    return cfg


def _coords(text: str) -> tuple[str, str]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--coords expects two column names, got {text!r}")
    return parts[0], parts[1]


def _load(path: str, coords: str, attrs=None, group=None):
    cx, cy = _coords(coords)
    with open(path, "rb") as fh:
        d = load_points_csv(fh, PointSchema(cx, cy, attrs, group))
    return d


def _run(args) -> AuditReport:
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cmd = args.command
    stamp = None if args.no_timestamp else now_utc()

    if cmd == "demo":
        return audits.run_demo(args.experiment, out, cfg, timestamp=not args.no_timestamp)

    if cmd == "simpson":
        cfg = cfg.merged("simpson", alpha=args.alpha)
        if not 0 < cfg.simpson.alpha < 1:
            raise UsageError("--alpha must lie in (0, 1)")
        d = _load(args.input, args.coords, attrs=None, group=args.group)
        axes = args.axes.split(",") if args.axes else None
        findings = audits.run_simpson(d, args.x, args.y, out, cfg, None, axes)
        cfg.inputs["input"] = args.input
    elif cmd == "gwr":
        cfg = cfg.merged("gwr", bandwidth=args.bandwidth, search=tuple(args.search) if args.search else None,
                         tolerance=args.tolerance, threshold_quantile=args.threshold_quantile,
                         cell_size=args.cell_size)
        c = cfg.gwr
        if c.bandwidth is not None and c.bandwidth <= 0:
            raise UsageError("--bandwidth must be positive")
        if not 0 < c.search[0] < c.search[1]:
            raise UsageError("--search must satisfy 0 < lo < hi")
        d = _load(args.input, args.coords, attrs=[args.x1, args.y])
        findings = audits.run_gwr(d, out, cfg, args.x1, args.y)
        cfg.inputs["input"] = args.input
    elif cmd == "kde":
        cfg = cfg.merged("kde", h_lo=args.h_lo, h_hi=args.h_hi, steps=args.steps, cell_size=args.cell_size,
                         radius_factor=args.radius_factor)
        c = cfg.kde
        if not 0 < c.h_lo < c.h_hi:
            raise UsageError("--h-lo must be positive and smaller than --h-hi")
        if c.steps < 2:
            raise UsageError("--steps must be at least 2")
        if (args.local_input is None) != (args.window is None):
            raise UsageError("--local-input and --window go together")
        d = _load(args.input, args.coords, attrs=[])
        findings = audits.run_kde_sweep(d, out, cfg)
        cfg.inputs["input"] = args.input
        if args.local_input:
            local = _load(args.local_input, args.coords, attrs=[])
            findings += audits.run_kde_window(local, d, args.window, out, cfg)
            cfg.inputs["local_input"] = args.local_input
    elif cmd == "maup":
        cfg = cfg.merged("maup", q=args.q, block_sides=tuple(args.block_sides) if args.block_sides else None,
                         offset=tuple(args.offset) if args.offset else None, ref_cell_side=args.ref_cell_side,
                         cell_size=args.cell_size, side=args.side, smoothness=args.smoothness)
        c = cfg.maup
        if not 0 < c.q < 1:
            raise UsageError("--q must lie in (0, 1)")
        if not c.block_sides or any(b < 1 for b in c.block_sides):
            raise UsageError("--block-sides must be positive integers")
        if len(c.offset) != 2:
            raise UsageError("--offset expects col,row")
        if args.input:
            d = _load(args.input, args.coords, attrs=[args.value])
            grid = GridSpec.covering(bounding_box(d), c.cell_size)
            r = rasterize(d, args.value, grid, "mean")
            cfg.inputs["input"] = args.input
        else:
            r = audits.maup_demo_data(cfg)
        findings = audits.run_maup(r, out, cfg)
        cl = {k.split(".", 1)[1]: v for k, v in findings[0].metrics.items() if k.startswith("class.")}
        print("classes: " + " ".join(f"{k}={cl[k]:.4f}" for k in ("unanimous", "strong_majority", "split"))
              + f" sum={sum(cl.values()):.12f}")
    elif cmd == "access":
        cfg = cfg.merged("access", d0=args.d0, w_at_d0=args.w_at_d0, threshold_ratio=args.threshold_ratio,
                         cell_size=args.cell_size)
        c = cfg.access
        if not c.d0 > 0 or not 0 < c.w_at_d0 < 1:
            raise UsageError("--d0 must be positive and --w-at-d0 in (0, 1)")
        with open(args.demand, "rb") as fh:
            demand = acc.load_demand_csv(fh)
        with open(args.facilities, "rb") as fh:
            facilities = acc.load_facilities_csv(fh)
        findings = audits.run_access(demand, facilities, out, cfg)
        cfg.inputs.update(demand=args.demand, facilities=args.facilities)
    else:  # pragma: no cover - argparse rejects unknown commands
        raise UsageError(f"unknown command {cmd}")

    config = cfg.to_dict()
    config["command"] = cmd
    report = AuditReport(findings, config, cfg.seed, stamp)
    write_report(report, out)
    return report


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter() if args.json_logs else logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.INFO if args.verbose or args.json_logs else logging.WARNING)
    log.propagate = False

    try:
        report = _run(args)
    except (UsageError, ParameterError) as exc:
        # configuration problems surface before any analysis result exists
        parser.print_usage(sys.stderr)
        print(f"endobias: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AuditError, OSError) as exc:
        print(f"endobias: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    s = report.summary()
    print(f"report: {Path(args.out) / 'report.json'} findings={s['n_findings']} "
          + " ".join(f"{k}={v}" for k, v in s["by_severity"].items()))
    for f in report.sorted_findings():
        print(f"  [{f.severity}] {f.kind} ({f.id})")
    if args.fail_on_finding and (s["by_severity"]["warning"] or s["by_severity"]["critical"]):
        return EXIT_FINDING
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
