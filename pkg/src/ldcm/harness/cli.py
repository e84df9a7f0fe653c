"""Command-line entry point (``ldcm``)."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..grid import ConfigurationError
from .checks import kernel_report, selftest
from .config import PRESETS, RunConfig, config_from_dict, load_config, preset
from .run import RunError, converge, run


def _config(args) -> RunConfig:
    base = preset(args.preset, args.scale) if args.preset else None
    if args.config:
        cfg = load_config(args.config, base)
    elif base is not None:
        cfg = base
    else:
        raise ConfigurationError("give --config or --preset")
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    return config_from_dict(overrides, cfg)


def _common(p):
    p.add_argument("--config", help="YAML run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS), help="named setup")
    p.add_argument("--scale", type=int, default=1, help="divide the preset's N-1 by this factor")
    p.add_argument("--out", default="ldcm_out", help="output directory")
    p.add_argument("--workers", type=int, default=None, help="patch worker threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ldcm", description="Compact-kernel Maxwell solver on nested grids")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    p = sub.add_parser("run", help="single run; writes timeseries.csv and slices")
    _common(p)
    p = sub.add_parser("converge", help="three-resolution study; writes rates.csv")
    _common(p)
    p.add_argument("--N", type=int, nargs="+", help="coarse resolutions (each doubling)")
    p = sub.add_parser("kernel-check", help="kernel symbol oracle report")
    p.add_argument("--radius", type=float, default=1.0, help="shell radius in coarse cells")
    p.add_argument("--h", type=float, default=1 / 16, help="coarsest spacing")
    p.add_argument("--levels", type=int, default=3)
    p = sub.add_parser("selftest", help="property checks")
    p.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "run":
            cfg = _config(args)
            res = run(cfg, args.out)
            print(f"{cfg.n_steps} steps in {res.wall_time:.1f} s; outputs in {Path(args.out)}")
        elif args.cmd == "converge":
            cfg = _config(args)
            rows, _ = converge(cfg, args.N, args.out)
            last = rows[-1]
            print(", ".join(f"{k}={v:.4g}" for k, v in last.items()))
        elif args.cmd == "kernel-check":
            text, _, _ = kernel_report(args.radius, args.h, args.levels)
            print(text)
        elif args.cmd == "selftest":
            results = selftest(args.seed)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
            return 0 if all(r.passed for r in results) else 1
    except (ConfigurationError, RunError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
