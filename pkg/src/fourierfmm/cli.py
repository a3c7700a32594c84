"""fourierfmm command line: experiment reproductions, benchmarks and the
production ``apply`` entry point."""

import argparse
import csv
import logging
import math
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import bench, engine, experiments, oracle
from .particles import ParticleFileError, read_particles, write_values
from .series import LowFrequencyBreakdownWarning

log = logging.getLogger("fourierfmm")


class ConfigError(ValueError):
    pass


# --- output ------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(rows, dest, columns=None):
    if not rows:
        return
    columns = columns or list(rows[0])
    own = dest is None or dest == "-"
    fh = sys.stdout if own else open(dest, "w", newline="")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    finally:
        if not own:
            fh.close()


def _sibling(path, suffix):
    """``out.csv`` -> ``out<suffix>``; None when writing to stdout."""
    if path is None or path == "-":
        return None
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _plot(args, fn, *a):
    png = _sibling(args.output, ".png")
    if png is not None and not args.no_plot:
        fn(*a, png)
        log.info("wrote %s", png)


# --- validation ----------------------------------------------------------------------

def _positive(name, v):
    if v is None or not (v > 0) or not math.isfinite(v):
        raise ConfigError(f"--{name} must be a positive number (got {v})")


def _kappas(args):
    _positive("kmin", args.kmin)
    _positive("kmax", args.kmax)
    if args.kmax < args.kmin:
        raise ConfigError("--kmax must be >= --kmin")
    if args.kcount < 1:
        raise ConfigError("--kcount must be >= 1")
    if args.kcount == 1:
        return [args.kmin]
    return [float(k) for k in np.geomspace(args.kmin, args.kmax, args.kcount)]


def _eps_list(args):
    eps = args.eps or [1e-4]
    for e in eps:
        _positive("eps", e)
        if e >= 1:
            raise ConfigError("--eps must be < 1")
    return eps


def _alpha(args):
    _positive("alpha", args.alpha)
    if args.alpha > 1:
        raise ConfigError("--alpha must lie in (0, 1]")


def _threads(args):
    if args.threads is not None and args.threads < 0:
        raise ConfigError("--threads must be >= 0")
    if args.threads:
        import numba
        numba.set_num_threads(args.threads)


# --- subcommands -------------------------------------------------------------------

def cmd_toy_integral(args):
    if args.nmin < 1 or args.nmax < args.nmin:
        raise ConfigError("need 1 <= --nmin <= --nmax")
    rows = experiments.toy_integral(range(int(args.nmin), int(args.nmax) + 1))
    spec = experiments.toy_spectrum(256)
    write_csv(rows, args.output)
    side = _sibling(args.output, "_spectrum.csv")
    if side is not None:
        write_csv(spec, side)
    from .plotting import plot_toy
    _plot(args, plot_toy, rows, spec)
    return rows


def cmd_single_level(args):
    kappas = _kappas(args)
    eps = _eps_list(args)
    _alpha(args)
    _positive("box-size", args.box_size)
    axes = ("z", "x") if args.axis == "both" else (args.axis,)
    if args.dirs < 6:
        raise ConfigError("--dirs must be >= 6")
    rows = []
    for e in eps:
        rows += experiments.single_level_sweep(kappas, e, axes, args.alpha, args.box_size,
                                               args.dirs, ebf=not args.no_ebf)
    write_csv(rows, args.output)
    from .plotting import plot_single_level
    _plot(args, plot_single_level, rows)
    return rows


def cmd_multilevel(args):
    _positive("kappa", args.kappa)
    _alpha(args)
    eps = _eps_list(args)
    lmax = args.levels or 8
    if lmax < 2:
        raise ConfigError("--levels must be >= 2")
    if args.ell:
        if any(l < 1 for l in args.ell):
            raise ConfigError("--ell values must be positive")
        rows = experiments.fixed_ell_sweep(args.kappa, args.ell, eps, args.levels or 3,
                                           args.alpha)
        from .plotting import plot_fixed_ell
        write_csv(rows, args.output)
        _plot(args, plot_fixed_ell, rows)
        return rows
    rows = experiments.multilevel_sweep(args.kappa, eps, range(2, lmax + 1), args.alpha)
    write_csv(rows, args.output)
    from .plotting import plot_multilevel
    _plot(args, plot_multilevel, rows)
    return rows


def cmd_bench(args):
    _alpha(args)
    eps = _eps_list(args)[0]
    if args.interp:
        if not args.ell or any(l < 2 for l in args.ell):
            ells = bench.INTERP_ELLS
        else:
            ells = args.ell
        rows = bench.interpolation_bench(ells)
        write_csv(rows, args.output)
        s_fft, s_sn = bench.interpolation_slopes(rows)
        print(f"# slope in ell: fft {s_fft:.2f}, semi-naive {s_sn:.2f}", file=sys.stderr)
        from .plotting import plot_interp
        _plot(args, plot_interp, rows)
        return rows
    if args.nmin < 2 or args.nmax < args.nmin:
        raise ConfigError("need 2 <= --nmin <= --nmax")
    if args.nmax > 2_000_000:
        raise ConfigError("--nmax above 2e6 exceeds desk-scale memory")
    ns = np.unique(np.geomspace(args.nmin, args.nmax, args.ncount).round().astype(int))
    levels = [args.levels] if args.levels else None
    rows = bench.scaling_sweep(ns, eps, args.alpha, levels, args.seed)
    write_csv(rows, args.output)
    best = bench.best_by_n(rows)
    if len(best) > 1:
        slope = experiments.loglog_slope([r["N"] for r in best], [r["fmm_time"] for r in best])
        print(f"# best-level time slope in N: {slope:.3f}", file=sys.stderr)
    from .plotting import plot_scaling
    _plot(args, plot_scaling, rows, best)
    return rows


def auto_levels(n, kappa, root_size):
    """Deepest level with ~60+ particles per leaf that stays clear of the
    low-frequency regime (kappa * leaf size >= 5)."""
    L = 2
    while L < 8 and n / 8 ** (L + 1) >= 60 and kappa * root_size / 2 ** (L + 1) >= 5:
        L += 1
    return L


def cmd_apply(args):
    if args.input is None:
        raise ConfigError("--input is required")
    if args.output is None:
        raise ConfigError("--output is required")
    _positive("kappa", args.kappa)
    eps = _eps_list(args)[0]
    _alpha(args)
    if args.levels is not None and args.levels < 2:
        raise ConfigError("--levels must be >= 2")
    _threads(args)
    pts, w = read_particles(args.input)
    t0 = time.perf_counter()
    if args.direct:
        sigma = oracle.direct_sum(pts, w, args.kappa)
        print(f"direct sum: N={len(pts)} time={time.perf_counter() - t0:.3f}s")
    else:
        from .octree import bounding_cube
        L = args.levels or auto_levels(len(pts), args.kappa, bounding_cube(pts)[1])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", LowFrequencyBreakdownWarning)
            res = engine.run_fmm(pts, w, args.kappa, eps, L, args.alpha, full_result=True)
        sigma = res.sigma
        print(f"fmm: N={len(pts)} levels={L} kappa={args.kappa:g} eps={eps:g} "
              f"alpha={args.alpha:g}")
        for r in res.plan.summary():
            print(f"  level {r['level']}: box={r['box_size']:.6g} ell={r['ell']} "
                  f"n_theta={r['n_theta']} quad={r['quad_size']} quad_eps={r['quad_eps']:.3g}")
        print("  timings: " + " ".join(f"{k}={v:.3f}s" for k, v in res.timings.items()))
        for c in caught:
            print(f"  warning: {c.message}")
    write_values(args.output, sigma)
    return sigma


# --- parser --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="fourierfmm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, kappa=None, eps=True):
        sp.add_argument("--output", "-o", help="CSV output path ('-' for stdout)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None, help="0 = numba default")
        sp.add_argument("--no-plot", action="store_true", help="skip the PNG next to the CSV")
        if kappa is not None:
            sp.add_argument("--kappa", type=float, default=kappa)
        if eps:
            sp.add_argument("--eps", type=float, action="append",
                            help="target error; repeat for a sweep")

    sp = sub.add_parser("toy-integral", help="filtered vs trapezoid rule on the toy integral")
    common(sp, eps=False)
    sp.add_argument("--nmin", type=int, default=4)
    sp.add_argument("--nmax", type=int, default=200)
    sp.set_defaults(func=cmd_toy_integral)

    sp = sub.add_parser("single-level", help="single-pair error scan over kappa")
    common(sp)
    sp.add_argument("--alpha", type=float, default=0.8)
    sp.add_argument("--box-size", type=float, default=1.0)
    sp.add_argument("--axis", choices=("z", "x", "both"), default="both")
    sp.add_argument("--kmin", type=float, default=1.0)
    sp.add_argument("--kmax", type=float, default=1000.0)
    sp.add_argument("--kcount", type=int, default=10)
    sp.add_argument("--dirs", type=int, default=642, help="minimum scan directions")
    sp.add_argument("--no-ebf", action="store_true", help="skip the EBF comparator")
    sp.set_defaults(func=cmd_single_level)

    sp = sub.add_parser("multilevel", help="corner-to-corner pair through L levels")
    common(sp, kappa=100.0)
    sp.add_argument("--alpha", type=float, default=0.8)
    sp.add_argument("--levels", type=int, default=None, help="deepest L (sweep 2..L)")
    sp.add_argument("--ell", type=int, nargs="+",
                    help="fixed truncation(s); --eps then sets quadrature targets")
    sp.set_defaults(func=cmd_multilevel)

    sp = sub.add_parser("bench", help="FMM vs direct timing sweep or interpolation bench")
    common(sp)
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--levels", type=int, default=None, help="fix L instead of trying several")
    sp.add_argument("--nmin", type=int, default=1000)
    sp.add_argument("--nmax", type=int, default=100000)
    sp.add_argument("--ncount", type=int, default=5)
    sp.add_argument("--interp", action="store_true", help="run the interpolation micro-bench")
    sp.add_argument("--ell", type=int, nargs="+", help="ell values for --interp")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("apply", help="evaluate sigma for a particle file")
    sp.add_argument("--input", "-i", required=False)
    sp.add_argument("--output", "-o", required=False)
    sp.add_argument("--kappa", type=float, required=False)
    sp.add_argument("--eps", type=float, action="append")
    sp.add_argument("--alpha", type=float, default=0.8)
    sp.add_argument("--levels", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--seed", type=int, default=0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--direct", action="store_true")
    g.add_argument("--fmm", action="store_true", help="default")
    sp.set_defaults(func=cmd_apply)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    try:
        if args.command != "apply":
            _threads(args)
        args.func(args)
    except (ConfigError, ParticleFileError) as e:
        print(f"fourierfmm {args.command}: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
