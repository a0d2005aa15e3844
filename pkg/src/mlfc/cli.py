"""Command line entry point.

::

    mlfc run <config> [--out PATH] [--seed N] [--samples N] [--plot]
    mlfc validate <config>
    mlfc oracle {lp-fixed-power, apc-grid, ratio} [--instances N] [--seed N]

Failures print one JSON object ``{"error": ..., "field": ..., "message": ...}``
to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel import McConfig, min_over_self_ratio_closed_form
from .errors import ConfigError, MlfcError, ZeroRateSubgroup

EXIT_CONFIG = 2
EXIT_RUNTIME = 1


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["field"] = exc.field
        payload["message"] = exc.message
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load(args):
    from .experiments import load_config

    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None or getattr(args, "samples", None) is not None:
        try:
            mc = McConfig(args.samples if args.samples is not None else cfg.mc.samples,
                          args.seed if args.seed is not None else cfg.mc.seed)
        except ValueError as exc:
            raise ConfigError("--seed/--samples", str(exc)) from None
        cfg = replace(cfg, mc=mc)
    return cfg


def cmd_run(args):
    from .experiments import emit_csv, run

    if args.plot and args.out is None:
        raise ConfigError("--plot", "needs --out so the figure has somewhere to go")
    cfg = _load(args)
    rows = run(cfg)
    if args.out is None:
        emit_csv(rows, sys.stdout)
        return 0
    out = Path(args.out)
    emit_csv(rows, out)
    print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    if args.plot:
        from .plotting import plot_rows

        fig = plot_rows(rows, out.with_suffix(".png"), title=cfg.name)
        print(f"wrote figure {fig}", file=sys.stderr)
    return 0


def cmd_validate(args):
    cfg = _load(args)
    n_points = len(cfg.points())
    print(json.dumps({"ok": True, "name": cfg.name, "points": n_points,
                      "rows": n_points * len(cfg.schemes)}))
    return 0


def _oracle_lp(rng, n):
    from .allocation import solve_fixed_power
    from .oracles import lp_fixed_power, random_fixed_power_instance

    worst = 0.0
    for _ in range(n):
        r = random_fixed_power_instance(rng)
        sol = solve_fixed_power(list(r))
        t_lp, _ = lp_fixed_power(r)
        worst = max(worst, abs(sol.t - t_lp))
    return {"case": "lp-fixed-power", "instances": n, "max_abs_gap": worst}


def _oracle_apc(rng, n):
    from .allocation import SubgroupParams, kkt_check, solve_apc
    from .oracles import apc_grid_search, random_apc_instance

    worst_gap, worst_kkt, beaten = 0.0, 0.0, 0
    for _ in range(n):
        eps, sizes = random_apc_instance(rng)
        params = [SubgroupParams(c, K, eps=e) for c, (e, K) in enumerate(zip(eps, sizes))]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ZeroRateSubgroup)
            sol = solve_apc(params)
        best, _, _ = apc_grid_search(eps, sizes)
        worst_gap = max(worst_gap, best - sol.t)
        beaten += best > sol.t
        if sol.t > 0:
            worst_kkt = max(worst_kkt, kkt_check(sol, params)["max"])
    return {"case": "apc-grid", "instances": n, "max_grid_excess": worst_gap,
            "grid_beats_solver": int(beaten), "max_kkt_residual": worst_kkt}


def _oracle_ratio(args):
    from .oracles import ORACLE_SEED, pinned_ratio

    out = []
    for K in (2, 4, 8, 16):
        est = pinned_ratio(K, samples=args.samples or 10_000_000,
                           seed=ORACLE_SEED if args.seed is None else args.seed)
        exact = min_over_self_ratio_closed_form(K)
        out.append({"K": K, "value": est.value, "std_error": est.std_error,
                    "closed_form": exact, "z": (est.value - exact) / est.std_error})
    return {"case": "ratio", "estimates": out}


def cmd_oracle(args):
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    if args.case == "lp-fixed-power":
        result = _oracle_lp(rng, args.instances or 50)
    elif args.case == "apc-grid":
        result = _oracle_apc(rng, args.instances or 10)
    else:
        result = _oracle_ratio(args)
    print(json.dumps(result, default=lambda v: None if not math.isfinite(v) else v))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mlfc", description="Multi-layer function computation rates.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config and write CSV")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--plot", action="store_true", help="also write a PNG next to the CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("oracle", help="run a brute-force cross-check")
    p.add_argument("case", choices=["lp-fixed-power", "apc-grid", "ratio"])
    p.add_argument("--instances", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except FileNotFoundError as exc:
        return _fail(exc, EXIT_CONFIG)
    except (MlfcError, OSError, ValueError) as exc:
        return _fail(exc, EXIT_RUNTIME)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
