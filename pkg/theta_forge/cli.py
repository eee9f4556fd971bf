import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from . import __version__
from . import extensions, io, lattice as lat, profile, prolim, siegel, thermo, verify
from . import theta as th
from .accel import BuildOptions, build_kernels, find_ccache, kernels_compiled
from .errors import LatticeFormatError, ThetaForgeError, ViolationDetected
from .parallel import ENV_THREADS

logger = logging.getLogger("theta_forge")

COMMANDS = ("invariants", "theta", "profile", "gext", "gext-average", "legendre",
            "prolim", "hardy", "siegel", "verify", "build-kernels")


@dataclass
class RunConfig:
    command: str
    lattice: Optional[str] = None
    sub: Optional[str] = None
    quotient: Optional[str] = None
    system: Optional[str] = None
    twist: Optional[str] = None
    t_grid: str = "1"
    delta_grid: str = "0"
    radius: float = 2.0
    max_r2: float = 4.0
    grid: int = 256
    depth: Optional[int] = None
    eps: float = 0.0
    samples: int = 100000
    blocks: int = siegel.DEFAULT_BLOCKS
    suite: str = "all"
    trials: int = 100
    tolerance: float = th.DEFAULT_TOL
    seed: int = 0
    output_format: str = "json"
    threads: Optional[int] = None
    quiet: bool = False
    verbose: bool = False
    build: BuildOptions = field(default_factory=BuildOptions)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if not 0 < self.tolerance < 0.5:
            raise ValueError("tolerance must lie in (0, 0.5)")
        if self.output_format not in ("json", "csv"):
            raise ValueError("output format must be json or csv")


def parse_grid(spec: str) -> list:
    """``a:b:k`` is k evenly spaced points from a to b; otherwise a comma list."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {spec!r} must read a:b:k")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 1:
            raise ValueError("grid needs at least one point")
        return np.linspace(a, b, k).tolist()
    return [float(x) for x in spec.split(",") if x.strip()]


def _require(value, flag: str):
    if value is None:
        raise ValueError(f"{flag} is required")
    return value


def _emit(config: RunConfig, out: TextIO, payload, header=None, rows=None):
    if config.output_format == "csv" and header is not None:
        io.write_csv(out, header, rows)
    else:
        out.write(io.dumps(payload))
        out.write("\n")


def _invariants(config: RunConfig, out: TextIO):
    l = io.read_lattice(_require(config.lattice, "--lattice"))
    tol = config.tolerance
    h0 = th.theta(l, 1.0, tol)
    h1 = th.theta(lat.dual(l), 1.0, tol)
    deg = lat.degree(l)
    payload = {"label": l.label, "rank": l.rank, "deg": deg, "covol": lat.covolume(l),
               "h0_theta": h0.log_value, "h1_theta": h1.log_value,
               "h0_theta_error": h0.log_error, "h1_theta_error": h1.log_error,
               "poisson_residual": h0.log_value - h1.log_value - deg,
               "riemann_lower": max(deg, 0.0), "riemann_holds": h0.log_value >= max(deg, 0.0) - h0.log_error}
    if l.rank:
        m = profile.lambda1(l)
        payload.update({"lambda1": m.length, "nu": m.multiplicity, "h0_ar": profile.h0_ar(l, 1.0)})
    _emit(config, out, payload, list(payload), [list(payload.values())])


def _theta(config: RunConfig, out: TextIO):
    l = io.read_lattice(_require(config.lattice, "--lattice"))
    results = [th.theta(l, t, config.tolerance) for t in parse_grid(config.t_grid)]
    rows = [[r.t, r.log_value, r.rel_error] for r in results]
    payload = [r.as_dict() for r in results]
    _emit(config, out, payload if len(payload) > 1 else payload[0], ["t", "log_theta", "rel_error"], rows)


def _profile(config: RunConfig, out: TextIO):
    l = io.read_lattice(_require(config.lattice, "--lattice"))
    prof = profile.counting_profile(l, config.max_r2)
    rows = prof.rows()
    payload = {"thresholds": list(prof.thresholds), "counts": list(prof.counts)}
    _emit(config, out, payload, ["t", "N", "h0_ar"], rows)


def _read_pair(config: RunConfig):
    return io.read_lattice(_require(config.sub, "--E")), io.read_lattice(_require(config.quotient, "--G"))


def _gext(config: RunConfig, out: TextIO):
    e, g = _read_pair(config)
    t = np.array(json.loads(_require(config.twist, "--T")), dtype=float).reshape(e.rank, g.rank)
    res = extensions.gext(e, g, t, config.tolerance)
    base = extensions.gext(e, g, np.zeros_like(t), config.tolerance)
    payload = {"log_gext": res.log_value, "rel_error": res.rel_error, "log_gext0": base.log_value,
               "h_theta": base.log_value - res.log_value}
    _emit(config, out, payload, list(payload), [list(payload.values())])


def _gext_average(config: RunConfig, out: TextIO):
    e, g = _read_pair(config)
    avg = extensions.gext_average(e, g, config.grid, config.tolerance, config.threads)
    payload = {"grid": avg.grid, "points": avg.points, "average": avg.average, "target": avg.target,
               "error": avg.error}
    _emit(config, out, payload, list(payload), [list(payload.values())])


def _legendre(config: RunConfig, out: TextIO):
    l = io.read_lattice(_require(config.lattice, "--lattice"))
    rows = []
    for t in parse_grid(config.t_grid):
        res = thermo.htilde0_ar(l, t, config.tolerance)
        rows.append([t, res.value, res.beta, math.log1p(res.tail_rel), profile.h0_ar(l, t) if l.rank else 0.0])
    header = ["t", "htilde0_ar", "beta", "tail_log_error", "h0_ar"]
    _emit(config, out, [dict(zip(header, r)) for r in rows], header, rows)


def _prolim(config: RunConfig, out: TextIO):
    system = io.read_system(_require(config.system, "--system"))
    if config.depth is not None:
        system = system.truncate(min(config.depth, system.depth))
    summ = prolim.summability_report(system, config.eps, config.tolerance)
    payload = {"depth": system.depth, "ranks": [x.rank for x in system.levels],
               "kernel_h0": summ.kernel_h0, "partial_sums": summ.partial_sums, "tail": summ.tail,
               "summable": summ.summable, "strong_summability": summ.strong}
    if summ.summable:
        lim = prolim.limit_h0(system, config.tolerance)
        payload.update({"estimate": lim.estimate, "upper": lim.upper, "lower": lim.lower})
    levels = prolim.level_checks(system, config.tolerance)
    payload["level_h0"] = levels.level_h0
    rows = [[i, x, k] for i, (x, k) in enumerate(zip(levels.level_h0, summ.kernel_h0 + [""]))]
    _emit(config, out, payload, ["level", "h0_theta", "kernel_h0"], rows)


def _hardy(config: RunConfig, out: TextIO):
    rows = [[d, prolim.hardy_invariant(config.radius, d)] for d in parse_grid(config.delta_grid)]
    _emit(config, out, [{"delta": d, "h": h} for d, h in rows], ["delta", "h"], rows)


def _siegel(config: RunConfig, out: TextIO):
    grid = parse_grid(config.t_grid)
    report = siegel.siegel_run(float(parse_grid(config.delta_grid)[0]), grid[0], config.samples, config.seed,
                               config.blocks, threads=config.threads)
    payload = report.as_dict()
    rows = [[name, e.estimate, e.spread, e.target] for name, e in
            (("theta", report.theta), ("dual_theta", report.dual_theta), ("count", report.count))]
    _emit(config, out, payload, ["quantity", "estimate", "spread", "target"], rows)


def _verify(config: RunConfig, out: TextIO):
    suites = None if config.suite == "all" else config.suite.split(",")
    results = verify.run_all(config.trials, config.seed, config.tolerance, suites)
    payload = {r.name: {"checks": r.checks, "failures": r.failures} for r in results}
    _emit(config, out, payload, ["suite", "checks", "failures"], [[r.name, r.checks, len(r.failures)] for r in results])
    failed = [f for r in results for f in r.failures]
    if failed:
        raise ViolationDetected(f"{len(failed)} check(s) failed", failed[0])


def _build_kernels(config: RunConfig, out: TextIO):
    path = build_kernels(config.build)
    if not config.quiet:
        out.write(f"Compiled kernels in: {path}\n")


HANDLERS = {
    "invariants": _invariants,
    "theta": _theta,
    "profile": _profile,
    "gext": _gext,
    "gext-average": _gext_average,
    "legendre": _legendre,
    "prolim": _prolim,
    "hardy": _hardy,
    "siegel": _siegel,
    "verify": _verify,
    "build-kernels": _build_kernels,
}


def configure_logging(quiet: bool = False, verbose: bool = False):
    handler = logging.StreamHandler(sys.stderr)
    fmt = "%(levelname)s:%(name)s: %(message)s" if verbose else "%(message)s"
    handler.setFormatter(logging.Formatter(fmt))
    logger.handlers[:] = [handler]
    logger.propagate = False
    logger.setLevel(logging.WARNING if quiet else logging.DEBUG if verbose else logging.INFO)


def run(config: RunConfig, out: Optional[TextIO] = None) -> int:
    """Execute one command; returns the process exit code."""
    out = out or sys.stdout
    logger.debug("kernels compiled: %s", kernels_compiled())
    try:
        HANDLERS[config.command](config, out)
    except (LatticeFormatError, OSError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except ViolationDetected as e:
        print(f"Error: {e}", file=sys.stderr)
        print(io.dumps(e.witness), file=sys.stderr)
        return 1
    except (ThetaForgeError, ValueError, RuntimeError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tolerance", type=float, default=th.DEFAULT_TOL, help="Relative tolerance on theta values")
    common.add_argument("--seed", type=int, default=0, help="Seed of every random stream (default: 0)")
    common.add_argument("--threads", type=int, default=None, help=f"Worker threads (fallback: ${ENV_THREADS})")
    common.add_argument("--format", dest="output_format", choices=("json", "csv"), default="json")
    common.add_argument("--csv", dest="output_format", action="store_const", const="csv", help="Same as --format csv")
    common.add_argument("-q", "--quiet", action="store_true", help="Quiet mode")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="theta-forge",
                                     description="Theta invariants of euclidean lattices and their cross-checks")
    parser.add_argument("-v", "--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def command(name, help_text):
        return sub.add_parser(name, parents=[common], help=help_text)

    p = command("invariants", "deg, covol, h0/h1_theta, lambda1 of a lattice")
    p.add_argument("--lattice", required=True)
    p = command("theta", "log theta_E(t) on a grid of t")
    p.add_argument("--lattice", required=True)
    p.add_argument("--t", dest="t_grid", default="1", help="t values: a:b:k or a comma list")
    p = command("profile", "counting profile (t, N_E, h0_Ar)")
    p.add_argument("--lattice", required=True)
    p.add_argument("--max-r2", type=float, default=4.0)
    for name, text in (("gext", "Gext at one extension point"), ("gext-average", "torus average of Gext")):
        p = command(name, text)
        p.add_argument("--E", dest="sub", required=True)
        p.add_argument("--G", dest="quotient", required=True)
        if name == "gext":
            p.add_argument("--T", dest="twist", required=True, help="JSON matrix, rank(E) x rank(G)")
        else:
            p.add_argument("--grid", type=int, default=256)
    p = command("legendre", "h~0_Ar(E, t) by Legendre transform")
    p.add_argument("--lattice", required=True)
    p.add_argument("--t-grid", default="0.25:2:8")
    p = command("prolim", "summability and limit invariants of a projective system")
    p.add_argument("--system", required=True)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--eps", type=float, default=0.0)
    p = command("hardy", "h(R, delta) of the arithmetic Hardy space")
    p.add_argument("--R", dest="radius", type=float, default=2.0)
    p.add_argument("--delta", dest="delta_grid", default="0")
    p = command("siegel", "Monte Carlo Siegel averages in rank 2")
    p.add_argument("--delta", dest="delta_grid", default="0")
    p.add_argument("--t", dest="t_grid", default="1")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--blocks", type=int, default=siegel.DEFAULT_BLOCKS)
    p = command("verify", "randomized property suites")
    p.add_argument("--suite", default="all", help=f"all or a comma list of {', '.join(verify.SUITES)}")
    p.add_argument("--trials", type=int, default=100)
    p = command("build-kernels", "compile the enumeration kernels with Cython")
    p.add_argument("-x", "--nthread", type=int, default=1, help="Number of parallel threads")
    p.add_argument("-r", "--release", action="store_true", help="Release mode (clean tmp files)")
    p.add_argument("--debug", action="store_true", help="Include debug symbols in compiled extensions")
    p.add_argument("-c", "--ccache", dest="ccache", nargs="?", const="auto", default=None,
                   help="Use ccache (auto-detect or specify path)")
    return parser


def resolve_ccache(value: Optional[str], quiet: bool = False) -> Optional[str]:
    if not value:
        return None
    if value == "auto":
        path = find_ccache()
        if not path and not quiet:
            logger.warning("Warning: ccache not found, compiling without it")
        return path
    if os.path.isfile(value) and os.access(value, os.X_OK):
        return value
    raise ValueError(f"ccache not found at {value}")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values = {k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__ and v is not None}
    if args.command == "build-kernels":
        ccache = resolve_ccache(args.ccache, args.quiet)
        values["build"] = BuildOptions(nthread=args.nthread, quiet=args.quiet, release=args.release,
                                       debug=args.debug, ccache=ccache)
    return RunConfig(**values)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        sys.exit(1)
    try:
        config = config_from_args(args)
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)
    configure_logging(config.quiet, config.verbose)
    sys.exit(run(config))


if __name__ == "__main__":
    main()
