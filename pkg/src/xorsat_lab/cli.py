"""Command-line surface.

Subcommands: gen, solve-ucp, solve-bpgd, decimate, wp, thresholds, nullity,
success-curve, phase-diagram, marks, marginals.  Results are written
atomically; exit codes: 0 success, 1 invalid arguments, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import analytic, experiments
from .algorithms import run_bpgd, run_decimation, run_ucp, shared_bits
from .formula import generate_random
from .message_passing import WP_FROZEN, WP_NULL, WP_UNIFORM, WpEngine
from .xnf import read_xnf, write_xnf


class _ArgumentError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgumentError(message)


def _grid(text: str) -> list:
    """Parse 'lo:hi:steps' or a comma-separated list."""
    if ":" in text:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
        if steps < 1:
            raise ValueError("grid needs at least one step")
        if steps == 1:
            return [lo]
        return list(np.linspace(lo, hi, steps))
    return [float(x) for x in text.split(",") if x]


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _trace_json(trace) -> str:
    return json.dumps(trace.to_json_dict(), indent=2, sort_keys=True) + "\n"


def build_parser() -> _Parser:
    parser = _Parser(prog="xorlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=False):
        p.add_argument("--k", type=int, default=3)
        p.add_argument("--n", type=int, default=1000)
        p.add_argument("--trials", type=int, default=10)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if grid:
            p.add_argument("--d", type=float, default=None)
            p.add_argument("--d-grid", type=str, default=None)
            p.add_argument("--theta", type=float, default=None)
            p.add_argument("--theta-grid", type=str, default=None)

    p = sub.add_parser("gen", help="generate a random instance as XNF")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", type=str, required=True)

    for name in ("solve-ucp", "solve-bpgd"):
        p = sub.add_parser(name, help=f"run {name.split('-')[1]} on an XNF file")
        p.add_argument("--in", dest="infile", type=str, required=True)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--snapshots", type=int, default=0, help="snapshot stride")
        if name == "solve-bpgd":
            p.add_argument("--mode", choices=("fast", "strict"), default="fast")

    p = sub.add_parser("decimate", help="exact-marginal decimation on an XNF file")
    p.add_argument("--in", dest="infile", type=str, required=True)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--scale-cap", type=int, default=5000)

    p = sub.add_parser("wp", help="warning propagation trace on an XNF file")
    p.add_argument("--in", dest="infile", type=str, required=True)
    p.add_argument("--ell", type=int, default=None, help="stop after this many rounds")
    p.add_argument("--out", type=str, default=None)

    p = sub.add_parser("thresholds", help="threshold set as JSON")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=float, default=None)
    p.add_argument("--out", type=str, default=None)

    p = sub.add_parser("success-curve", help="guided-decimation success rate vs theory")
    common(p, grid=True)
    p.add_argument("--mode", choices=("fast", "strict"), default="fast")

    p = sub.add_parser("nullity", help="decimated-system nullity vs theory")
    common(p, grid=True)
    p.add_argument("--null-variables", action="store_true",
                   help="count frozen variables instead of the nullity")

    p = sub.add_parser("marks", help="warning-propagation mark fractions vs theory")
    common(p, grid=True)
    p.add_argument("--ell", type=int, default=60)

    p = sub.add_parser("marginals", help="BP vs exact marginal disagreement")
    common(p, grid=True)
    p.add_argument("--scale-cap", type=int, default=5000)

    p = sub.add_parser("phase-diagram", help="decimation-time phase boundaries")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d-grid", type=str, required=True)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")

    return parser


def _experiment_config(args, need_d_grid=False, need_theta_grid=False) -> experiments.ExperimentConfig:
    d_grid = _grid(args.d_grid) if getattr(args, "d_grid", None) else None
    theta_grid = _grid(args.theta_grid) if getattr(args, "theta_grid", None) else None
    if getattr(args, "theta", None) is not None:
        theta_grid = [args.theta]
    if need_d_grid and d_grid is None:
        if getattr(args, "d", None) is None:
            raise _ArgumentError("need --d or --d-grid")
        d_grid = [args.d]
    if need_theta_grid and theta_grid is None:
        raise _ArgumentError("need --theta or --theta-grid")
    return experiments.ExperimentConfig(
        k=args.k, n=args.n, trials=args.trials, seed=args.seed,
        d=getattr(args, "d", None), d_grid=d_grid, theta_grid=theta_grid,
        threads=args.threads, ell=getattr(args, "ell", 60) or 60,
        mode=getattr(args, "mode", "fast"),
        scale_cap=getattr(args, "scale_cap", 5000),
    )


def _emit_result(result, args) -> None:
    fmt = getattr(args, "format", "csv")
    if args.out is None:
        sys.stdout.write(result.to_csv_text() if fmt == "csv" else result.to_json_text())
    else:
        result.write(args.out, fmt)
    if result.wall_time_s is not None:
        print(f"[{result.name}] {len(result.rows)} rows in {result.wall_time_s:.1f}s",
              file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        return _dispatch(args)
    except (_ArgumentError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    cmd = args.command
    if cmd == "gen":
        formula = generate_random(args.n, args.d, args.k, args.seed)
        write_xnf(formula, args.out)
        return 0

    if cmd in ("solve-ucp", "solve-bpgd"):
        formula = read_xnf(args.infile)
        tau = shared_bits(formula.n, args.seed)
        if cmd == "solve-ucp":
            trace = run_ucp(formula, tau, snapshot_stride=args.snapshots)
        else:
            trace = run_bpgd(formula, tau, mode=args.mode)
        _write_text(args.out, _trace_json(trace))
        return 0

    if cmd == "decimate":
        formula = read_xnf(args.infile)
        trace = run_decimation(formula, seed=args.seed, scale_cap=args.scale_cap)
        _write_text(args.out, _trace_json(trace))
        return 0

    if cmd == "wp":
        formula = read_xnf(args.infile)
        engine = WpEngine(formula)
        lines = ["round,null_msgs,frozen_msgs,uniform_msgs,null_marks,frozen_marks,uniform_marks"]

        def emit(r):
            msgs = np.concatenate([engine.v2c, engine.c2v])
            marks = engine.marks_array()[1:]
            lines.append(",".join(str(int(x)) for x in (
                r,
                (msgs == WP_NULL).sum(), (msgs == WP_FROZEN).sum(),
                (msgs == WP_UNIFORM).sum(),
                (marks == WP_NULL).sum(), (marks == WP_FROZEN).sum(),
                (marks == WP_UNIFORM).sum())))

        emit(0)
        cap = engine.convergence_cap if args.ell is None else args.ell
        for r in range(1, cap + 1):
            if engine.step() == 0:
                emit(r)
                break
            emit(r)
        _write_text(args.out, "\n".join(lines) + "\n")
        return 0

    if cmd == "thresholds":
        if args.d is None:
            ths = analytic.thresholds(args.k)
            payload = {"k": args.k, "d_min": ths.d_min, "d_core": ths.d_core,
                       "d_sat": ths.d_sat}
        else:
            ths = analytic.thresholds_at(args.d, args.k)
            payload = {
                "k": args.k, "d": args.d,
                "d_min": ths.d_min, "d_core": ths.d_core, "d_sat": ths.d_sat,
                "z_lo": ths.z_lo, "z_hi": ths.z_hi,
                "lam_lo": ths.lam_lo, "lam_hi": ths.lam_hi,
                "theta_lo": ths.theta_lo, "theta_hi": ths.theta_hi,
                "lam_cond": ths.lam_cond, "theta_cond": ths.theta_cond,
            }
        _write_text(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return 0

    start = time.time()
    if cmd == "success-curve":
        cfg = _experiment_config(args, need_d_grid=True)
        result = experiments.run_success_curve(cfg)
    elif cmd == "nullity":
        cfg = _experiment_config(args, need_theta_grid=True)
        if cfg.d is None:
            raise _ArgumentError("need --d")
        if getattr(args, "null_variables", False):
            result = experiments.run_null_variable_experiment(cfg)
        else:
            result = experiments.run_nullity_experiment(cfg)
    elif cmd == "marks":
        cfg = _experiment_config(args, need_theta_grid=True)
        if cfg.d is None:
            raise _ArgumentError("need --d")
        result = experiments.run_wp_mark_experiment(cfg)
    elif cmd == "marginals":
        cfg = _experiment_config(args, need_theta_grid=True)
        if cfg.d is None:
            raise _ArgumentError("need --d")
        result = experiments.run_marginal_agreement(cfg)
    elif cmd == "phase-diagram":
        result = experiments.emit_phase_diagram(args.k, _grid(args.d_grid))
    else:  # pragma: no cover
        raise _ArgumentError(f"unknown command {cmd}")
    result.wall_time_s = time.time() - start
    _emit_result(result, args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
