"""Command-line front end: ``hybridpilot {sweep,optimize,validate,compare}``."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import (BASELINES, MODES, OPT_COLUMNS, SWEEP_AXES, ExperimentSpec, run_compare, run_optimize,
                    run_sweep, run_validate, write_outputs)

__all__ = ["main", "build_parser"]


def _parse_values(text: str) -> tuple:
    """``"0.1,0.2,0.5"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(f"{start + i * step:.12g}") for i in range(max(n, 0)))
    return tuple(float(x) for x in text.split(","))


def _design_value(text: str):
    return "opt" if text == "opt" else float(text)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value scenario file (default: 7 cells, 10 users, M=256)")
    p.add_argument("--trials", type=int, default=200, help="Monte Carlo trials per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV output path; metadata goes next to it as .json")
    p.add_argument("--mode", choices=MODES, default="closed_form")
    p.add_argument("--baselines", default="hybrid",
                   help=f"comma list from {','.join(BASELINES)}")
    p.add_argument("--workers", type=int, default=1)
    for key in ("alpha", "lam", "tau"):
        p.add_argument(f"--{key}", type=_design_value, default="opt", help="value or 'opt'")
    for key, typ in (("M", int), ("T", int), ("L", int), ("K", int), ("snr-db", float)):
        p.add_argument(f"--{key}", type=typ, default=None, help="override the config value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridpilot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="rates along one axis")
    _common(p)
    p.add_argument("--axis", choices=SWEEP_AXES, required=True)
    p.add_argument("--values", default="", help="comma list or start:stop:step")

    p = sub.add_parser("optimize", help="max-min design and pure baselines")
    _common(p)

    p = sub.add_parser("validate", help="run the invariant suite; exit 1 on any failure")
    _common(p)
    p.add_argument("--corrupt-pilots", action="store_true", help="negative control")

    p = sub.add_parser("compare", help="hybrid vs baselines over frame length")
    _common(p)
    p.add_argument("--values", default="", help="frame lengths (default 2,4,6,10,20 x KL)")
    return parser


def _spec(args, axis=None) -> ExperimentSpec:
    overrides = {k: v for k, v in (("M", args.M), ("T", args.T), ("L", args.L), ("K", args.K),
                                   ("snr_db", args.snr_db)) if v is not None}
    return ExperimentSpec(
        config=args.config, axis=axis, values=_parse_values(getattr(args, "values", "") or ""),
        mode=args.mode, trials=args.trials, seed=args.seed,
        baselines=tuple(b.strip() for b in args.baselines.split(",") if b.strip()),
        out=args.out, design={"alpha": args.alpha, "lam": args.lam, "tau": args.tau},
        overrides=overrides, workers=args.workers,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sweep":
        spec = _spec(args, axis=args.axis)
        text = write_outputs(run_sweep(spec), spec, "sweep")
    elif args.command == "compare":
        spec = _spec(args)
        text = write_outputs(run_compare(spec), spec, "compare")
    elif args.command == "optimize":
        spec = _spec(args)
        text = write_outputs(run_optimize(spec), spec, "optimize", OPT_COLUMNS)
    else:
        spec = _spec(args)
        checks = run_validate(spec, corrupt_pilots=args.corrupt_pilots)
        rows = [{"check": c.name, "status": "PASS" if c.passed else "FAIL", "detail": c.detail} for c in checks]
        text = write_outputs(rows, spec, "validate", ["check", "status", "detail"])
        if not args.out:
            sys.stdout.write(text)
        return 0 if all(c.passed for c in checks) else 1
    if not args.out:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
