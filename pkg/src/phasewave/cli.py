"""Command-line entry point.

Subcommands: run, tr, sweep, snell, spreading, check.  Exit codes: 0 on
success, 1 on configuration/validation errors, 2 on runtime failures.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import ConfigError, parse_config, with_overrides
from .discretization import BlowUpError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasewave",
        description="DG spectral element solver for two-phase acoustics "
                    "with diffuse interfaces")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True):
        p.add_argument("--config", required=needs_config,
                       help="path to the experiment configuration")
        p.add_argument("--out", default=None,
                       help="output directory (overrides the config)")
        p.add_argument("--order", type=int, default=None)
        p.add_argument("--nel", type=int, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--frequency", type=float, default=None)
        p.add_argument("--theta", type=float, default=None,
                       help="incidence angle in degrees")
        p.add_argument("--flux", choices=("central", "ers"), default=None)

    add_common(sub.add_parser("run", help="run the configured case"))
    add_common(sub.add_parser(
        "tr", help="paired transmission/reflection measurement"))
    add_common(sub.add_parser("sweep", help="parameter sweep"))
    p_sweep = sub.choices["sweep"]
    p_sweep.add_argument("--vary", default=None,
                         choices=("order", "n_el", "epsilon", "frequency",
                                  "theta_i"))
    p_sweep.add_argument("--values", default=None,
                         help="comma-separated sweep values")
    add_common(sub.add_parser("snell", help="2D refraction angle"))
    add_common(sub.add_parser("spreading", help="3D spherical spreading"))
    sub.add_parser("check", help="fast operator-invariant suite")
    return parser


def _load(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    cfg = with_overrides(cfg, order=args.order, n_el=args.nel,
                         epsilon=args.epsilon, frequency=args.frequency,
                         theta=args.theta, flux=args.flux)
    outdir = args.out or cfg.outputs.directory
    return cfg, outdir


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "check":
        from .checks import run_checks
        return 0 if run_checks() else 2

    try:
        cfg, outdir = _load(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            from .experiments import run_single
            result = run_single(cfg, outdir)
            print(f"completed {result.n_steps} steps to t = "
                  f"{result.t_final:.6e} s; outputs in {outdir}")
        elif args.command == "tr":
            from .experiments import run_tr_pair
            res = run_tr_pair(cfg, outdir)
            r = res.report
            print(f"T_num = {r.t_num:.9f} (exact {r.t_exact:.9f}, "
                  f"|err| {r.e_mod_t:.3e})")
            print(f"R_num = {r.r_num:.9f} (exact {r.r_exact:.9f}, "
                  f"|err| {r.e_mod_r:.3e})")
            print(f"N_p = {res.n_points_interface:.2f}, DOFs = {res.dofs}, "
                  f"steps = {res.n_steps}; outputs in {outdir}")
        elif args.command == "sweep":
            from .config import SweepSpec
            from .experiments import run_sweep
            sweep = cfg.sweep
            if args.vary or args.values:
                values = tuple(float(v) for v in
                               (args.values or "").split(",") if v)
                sweep = SweepSpec(vary=args.vary or sweep.vary,
                                  values=values or sweep.values,
                                  reference=sweep.reference,
                                  reference_order=sweep.reference_order,
                                  reference_n_el=sweep.reference_n_el)
            rows = run_sweep(cfg, sweep, outdir)
            n_bad = sum(1 for r in rows if r.failed)
            print(f"sweep over {sweep.vary}: {len(rows)} rows "
                  f"({n_bad} failed); table in {outdir}/sweep.csv")
            if n_bad:
                return 2
        elif args.command == "snell":
            from .experiments import run_snell
            res = run_snell(cfg, outdir)
            print(f"theta_t measured {res.theta_t_measured:.6f} rad, exact "
                  f"{res.theta_t_exact:.6f} rad, |err| = "
                  f"{res.error_rad:.3e} rad "
                  f"({np.rad2deg(res.error_rad):.4f} deg)")
        elif args.command == "spreading":
            from .experiments import run_spreading
            rep = run_spreading(cfg, outdir)
            print(f"decay slopes: upper {rep.slope_upper:.3f}, lower "
                  f"{rep.slope_lower:.3f} (vs r_eff); interface jump "
                  f"{rep.interface_jump:.3f}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except BlowUpError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, FloatingPointError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
