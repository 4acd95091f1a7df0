"""Command-line front end for the experiment harness.

Exit codes: 0 on success, 2 on an invalid configuration, 3 when the solver fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import harness
from .integrator import StepFailure
from .oracle import (exact_1d, fourier_coefficients, pde_residual, traveling_wave)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_FLAG_FIELDS = {
    "problem": "problem", "eps": "eps", "N": "N", "M": "M", "theta": "theta", "K": "K",
    "dt": "dt", "tol": "tol", "tf": "t_f", "points": "report_points", "out": "output_dir",
}


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _points(text: str) -> list:
    """``0.1,0.5`` in 1D or ``0.1:0.2,0.5:0.5`` (x:y pairs) in 2D."""
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            parts = [float(v) for v in item.split(":")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad report point {item!r}")
        out.append(parts[0] if len(parts) == 1 else tuple(parts))
    return out


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields; overrides flags")
    p.add_argument("--problem", choices=harness.PROBLEMS)
    p.add_argument("--eps", type=float, help="viscosity")
    p.add_argument("--N", type=int, help="polynomial degree in x")
    p.add_argument("--M", type=int, help="polynomial degree in y (2D, default N)")
    p.add_argument("--theta", type=float, help="matching-point parameter in [0, 1]")
    p.add_argument("--K", type=int, help="transform order")
    p.add_argument("--dt", type=float, help="fixed step size")
    p.add_argument("--tol", type=float, help="local error tolerance (adaptive)")
    p.add_argument("--tf", type=float, help="final time")
    p.add_argument("--points", type=_points, help="report points, e.g. 0.1,0.5 or 0.2:0.3")
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ieldtm", description="Chebyshev collocation / IELDTM Burgers experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fixed-step run with error report")
    _add_config_flags(p)
    p = sub.add_parser("adaptive", help="adaptive run with error report")
    _add_config_flags(p)
    p = sub.add_parser("converge", help="step-size refinement study")
    _add_config_flags(p)
    p.add_argument("--dts", type=_float_list, required=True,
                   help="comma-separated decreasing step sizes")
    p.add_argument("--reference", choices=harness.REFERENCES, default="exact")
    p = sub.add_parser("profiles", help="dense solution profiles at given times")
    _add_config_flags(p)
    p.add_argument("--times", type=_float_list, required=True)
    p.add_argument("--samples", type=int, default=400, help="samples per axis")
    p = sub.add_parser("oracle-check", help="PDE residuals of the exact solutions")
    p.add_argument("--eps", type=float, action="append",
                   help="viscosity (repeatable, default 1 and 0.1)")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args, mode: str) -> harness.ExperimentConfig:
    values = {}
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    if args.config:
        try:
            with open(args.config) as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise harness.ConfigError(f"cannot read config {args.config}: {exc}") from None
    if mode == "fixed" and values.get("dt") is None:
        raise harness.ConfigError("this command needs --dt")
    if mode == "adaptive":
        if values.get("tol") is None:
            raise harness.ConfigError("adaptive needs --tol")
        values["dt"] = None
    if mode == "sweep":
        values.setdefault("dt", 1.0)
        values["tol"] = None
    return harness.ExperimentConfig.from_dict(values)


def _print_summary(summary: harness.ErrorSummary):
    print(f"linf_on_nodes {summary.linf_on_nodes:.6e}")
    print(f"steps {summary.step_count} (rejected {summary.rejected_count})")
    print(f"wall_time {summary.wall_time:.3f} s")
    for p, c, e in summary.values_at_points:
        print(f"  {p}: computed {c:.10f} exact {e:.10f} diff {c - e:.3e}")


def _oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    ok = True
    for eps in args.eps or [1.0, 0.1]:
        sol = fourier_coefficients(eps)
        u1 = lambda x, y, t: exact_1d(sol, x, t)
        pts = rng.uniform([1e-3, 0.0, 0.01], [1 - 1e-3, 1.0, 1.0], size=(args.samples, 3))
        r1 = max(abs(pde_residual(u1, p, eps)) for p in pts)
        tw = traveling_wave(eps, n_samples=args.samples, seed=args.seed)
        pts2 = rng.uniform([1e-3, 1e-3, 0.0], [1 - 1e-3, 1 - 1e-3, 1.0], size=(args.samples, 3))
        r2 = max(abs(pde_residual(tw, p, eps)) for p in pts2)
        passed = r1 <= 1e-5 and r2 <= 1e-5
        ok &= passed
        print(f"eps={eps:g} fourier residual {r1:.3e}  traveling-wave residual {r2:.3e} "
              f"(scale {tw.scale_label}) {'PASS' if passed else 'FAIL'}")
    return EXIT_OK if ok else EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "oracle-check":
            return _oracle_check(args)
        if args.command == "solve":
            _print_summary(harness.run(config_from_args(args, "fixed")))
        elif args.command == "adaptive":
            _print_summary(harness.run(config_from_args(args, "adaptive")))
        elif args.command == "converge":
            cfg = config_from_args(args, "sweep")
            table = harness.converge(cfg, args.dts, reference=args.reference)
            for dt, e, o in zip(table.dts, table.linf, table.local_orders()):
                print(f"dt {dt:.6g}  linf {e:.6e}  order {o:.3f}")
            print(f"order_estimate {table.order:.4f}" if math.isfinite(table.order)
                  else "order_estimate nan (unstable)")
            if not table.stable:
                return EXIT_SOLVER
        elif args.command == "profiles":
            cfg = config_from_args(args, "fixed" if args.tol is None else "adaptive")
            snaps = harness.profile_snapshots(cfg, args.times, points=args.samples)
            for s in snaps:
                print(f"t={s.t:g} min {np.min(s.values):.6f} max {np.max(s.values):.6f}"
                      + (f" -> {s.path}" if s.path else ""))
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        where = f" at t={exc.t:.6g}, dt={exc.dt:.3e}" if exc.t is not None else ""
        print(f"solver failure{where}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
