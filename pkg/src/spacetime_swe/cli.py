"""Command-line front end: ``spacetime-swe <case> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import io
from .bench import CASES, BenchmarkCase, run_case
from .errors import InvalidArgument, SWEError
from .solver import NewtonConfig

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def build_parser():
    ap = argparse.ArgumentParser(
        prog="spacetime-swe",
        description="Space-time minimum-residual solver for the 1-D viscous shallow water "
                    "equations.")
    ap.add_argument("case", choices=CASES, help="benchmark to run")
    ap.add_argument("--p", type=int, help="polynomial degree of elevation and velocity")
    ap.add_argument("--refinements", type=int,
                    help="uniform refinements (converge, lake, tidal, dambreak, slices-compare) "
                         "or adaptive steps (adapt)")
    ap.add_argument("--theta", type=float, help="Dorfler bulk parameter in (0, 1]")
    ap.add_argument("--slices", type=int, help="number of equal time slices")
    ap.add_argument("--mesh", help="initial structured mesh NXxNT (2 NX NT triangles)")
    ap.add_argument("--T", type=float, help="final time in seconds")
    ap.add_argument("--out", help="output directory (default out/<case>)")
    ap.add_argument("--paper-mesh", action="store_true", default=None,
                    help="use the full-resolution mesh where a coarser default exists")
    ap.add_argument("--config", help="key = value config file; flags override it")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress")
    return ap


def _settings(args):
    """Merge config-file values with command-line flags (flags win)."""
    cfg = io.read_config(args.config) if args.config else {}
    flat = {}
    for section in cfg.values():
        flat.update(section)
    for key in ("p", "refinements", "theta", "slices", "mesh", "T", "out", "paper_mesh"):
        val = getattr(args, key)
        if val is not None:
            flat[key] = val
    newton = {k: flat.pop(k) for k in ("abs_tol", "rel_tol", "max_iter", "linear_solver", "method")
              if k in flat}
    for unused in ("r", "sigma_degree", "tol", "max_dofs"):
        if unused in flat:
            raise InvalidArgument(f"config key {unused!r} is not supported by the CLI")
    return flat, newton


def make_case(args):
    flat, newton = _settings(args)
    mesh = io.parse_mesh(flat["mesh"]) if "mesh" in flat else None
    if "theta" in flat and not 0 < flat["theta"] <= 1:
        raise InvalidArgument("theta must lie in (0, 1]")
    return BenchmarkCase(
        name=args.case, p=flat.get("p", 2), refinements=flat.get("refinements"),
        theta=flat.get("theta", 0.5), slices=flat.get("slices", 8), mesh=mesh,
        paper_mesh=bool(flat.get("paper_mesh", False)), out=flat.get("out", f"out/{args.case}"),
        T=flat.get("T"), newton=NewtonConfig(**newton))


def cli(argv=None):
    """Run one case; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        case = make_case(args)
    except (InvalidArgument, ValueError, TypeError) as exc:
        print(f"spacetime-swe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_case(case)
    except SWEError as exc:
        print(f"spacetime-swe: {case.name} failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except OSError as exc:
        print(f"spacetime-swe: cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(result.summary_line())
    return EXIT_OK


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
