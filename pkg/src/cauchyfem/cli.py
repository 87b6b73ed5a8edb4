"""Command-line entry point for the experiment harness.

Subcommands: solve, convergence, sweep-gamma, perturb, verify-oswald.
Flags mirror a flat key=value config file (--config); explicit flags win.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .harness import ExperimentConfig


def _parse_config_file(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, val = (t.strip() for t in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _add_common(p):
    p.add_argument("--config", help="flat key=value file mirroring the flags")
    p.add_argument("--problem", choices=sorted(harness.PROBLEMS))
    p.add_argument("--degree", type=int, choices=[1, 2])
    p.add_argument("--stab", choices=["gals", "cip", "h1adj"])
    p.add_argument("--gamma-s", type=float, dest="gamma_s")
    p.add_argument("--gamma-d", type=float, dest="gamma_d")
    p.add_argument("--levels", help="comma-separated mesh levels, e.g. 8,16,32")
    p.add_argument("--jitter", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float, help="relative perturbation strength")
    p.add_argument("--pert-seed", type=int, dest="pert_seed",
                   help="perturbation seed (defaults to --seed)")
    p.add_argument("--out", help="output CSV path")


_CASTS = {
    "degree": int,
    "seed": int,
    "pert_seed": int,
    "gamma_s": float,
    "gamma_d": float,
    "jitter": float,
    "sigma": float,
    "levels": lambda s: [int(t) for t in str(s).split(",") if t],
}


def _build_config(args):
    values = {}
    if args.config:
        values.update(_parse_config_file(args.config))
    for key in ("problem", "degree", "stab", "gamma_s", "gamma_d", "levels",
                "jitter", "seed", "sigma", "pert_seed", "out"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    kwargs = {}
    for key, val in values.items():
        cast = _CASTS.get(key)
        if cast is not None and isinstance(val, str):
            val = cast(val)
        kwargs[key] = val
    return ExperimentConfig(**kwargs)


def _print_report(rep):
    print(
        f"n={rep.level} h={rep.h:.6g} dof={rep.dof} "
        f"l2={rep.l2_global:.6e} l2_loc={rep.l2_local:.6e} h1={rep.h1:.6e} "
        f"sV={rep.s_v:.6e} sW={rep.s_w:.6e} triple={rep.triple:.6e} "
        f"etaV={rep.eta_v:.6e} eta={rep.eta:.6e}"
    )


def main(argv=None):
    parser = argparse.ArgumentParser(prog="cauchyfem",
                                     description="stabilised FEM experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="single solve at the finest level")
    _add_common(p)
    p.add_argument("--snapshot", help="prefix for mesh/field text snapshots")

    p = sub.add_parser("convergence", help="run the mesh-refinement study")
    _add_common(p)

    p = sub.add_parser("sweep-gamma", help="vary gamma_S on a fixed mesh")
    _add_common(p)
    p.add_argument("--gammas", required=True, help="comma-separated gamma_S values")

    p = sub.add_parser("perturb", help="perturbation study (sigma or h sweep)")
    _add_common(p)
    p.add_argument("--sigmas", help="comma-separated strengths; omit for an h sweep")

    p = sub.add_parser("verify-oswald", help="nodal-averaging inequality check")
    p.add_argument("--levels", default="4,8,16,32")
    p.add_argument("--fields", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jitter", type=float, default=0.2)
    p.add_argument("--out")

    args = parser.parse_args(argv)

    if args.command == "verify-oswald":
        levels = [int(t) for t in args.levels.split(",") if t]
        rows = harness.verify_oswald(levels=levels, n_fields=args.fields,
                                     seed=args.seed, jitter=args.jitter, out=args.out)
        for n, hmax, r1, r2 in rows:
            print(f"n={n} h_max={hmax:.4f} interp_ratio={r1:.4f} stability_ratio={r2:.4f}")
        return 0

    cfg = _build_config(args)
    if args.command == "solve":
        result = harness.run_case_full(cfg)
        _print_report(result.report)
        if args.snapshot:
            harness.save_snapshots(result, args.snapshot)
    elif args.command == "convergence":
        from .analysis import eoc

        table = harness.run_convergence(cfg)
        for _, rep in table.rows:
            _print_report(rep)
        for name in ("l2_global", "l2_local"):
            print(f"EOC {name}: {table.eoc_column(name)}")
        print(f"EOC monitor: {eoc(table.hs, table.monitors())}")
    elif args.command == "sweep-gamma":
        gammas = [float(t) for t in args.gammas.split(",") if t]
        for g, l2, rel, mon in harness.run_gamma_sweep(cfg, gammas):
            print(f"gamma_s={g:.6g} l2={l2:.6e} rel={rel:.4f} monitor={mon:.6e}")
    elif args.command == "perturb":
        sigmas = None
        if args.sigmas:
            sigmas = [float(t) for t in args.sigmas.split(",") if t]
        for row in harness.run_perturbation_study(cfg, sigmas=sigmas):
            print(f"{row[0]}={row[1]:.6g} l2={row[5]:.6e} monitor={row[-1]:.6e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
