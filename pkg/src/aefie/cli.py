"""Command line interface.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import drivers
from .io import ConfigError, RunConfig, bundled_geometry, parse_config, parse_geometry
from .system import SingularSystemError


def _load_geometry(arg: str):
    try:
        return parse_geometry(arg)
    except FileNotFoundError:
        if "/" not in arg and not arg.endswith(".geo"):
            return parse_geometry(bundled_geometry(arg))
        raise


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="aefie", description="A-EFIE solver on multipatch NURBS surfaces")
    sub = ap.add_subparsers(dest="command", required=True)
    info = sub.add_parser("geominfo", help="summarise a geometry file")
    info.add_argument("geo", help="geometry file or bundled fixture name")
    for name, text in (("solve", "solve at one frequency"), ("sweep", "frequency sweep"),
                       ("convergence", "refinement study")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--geometry", required=True, help="geometry file or bundled fixture name")
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--workers", type=int, help="assembly worker threads")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "geominfo":
            print("\n".join(drivers.geometry_info(_load_geometry(args.geo))))
            return 0
        geometry = _load_geometry(args.geometry)
        config = parse_config(args.config) if args.config else RunConfig()
        if args.workers is not None:
            config.assembly_workers = args.workers
            config.validate()
        if args.command == "solve":
            summary = drivers.run_solve(config, geometry, args.output)
            print(f"N_j={summary['N_j']} N_phi={summary['N_phi']} residual={summary['residual']:.3e} "
                  f"max_pw_error={summary['max_pw_error']:.6e}")
        elif args.command == "sweep":
            rows = drivers.run_sweep(config, geometry, args.output)
            print(f"{len(rows)} frequencies written")
        else:
            _, fits = drivers.run_convergence(config, geometry, args.output)
            for fit in fits:
                print(f"degree {fit['degree']}: fitted order {fit['fitted_order']:.4f}")
        return 0
    except (SingularSystemError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
