"""Command-line front end: ``cubespline {derivs,interp,bench,fit,compare,report}``.

Every subcommand reads and writes TSV. Exit status is 0 on success, 1 when
the work itself fails and 2 for bad input; failures print one line starting
with ``error:`` on stderr.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench, model, oracle
from .spline import (
    ControlCurve,
    DivisionStrategy,
    KnotOrderError,
    SplineError,
    boundary_from_legacy,
    evaluate_curve,
    second_derivatives,
)

__all__ = ["main", "read_curve", "parse_points", "UsageError"]

log = logging.getLogger("cubespline")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    """Bad flags or input files; maps to exit status 2."""


# -- file helpers -------------------------------------------------------------

def _read_rows(path, ncols):
    """Numeric rows of a whitespace/tab separated file, skipping '#' lines.

    Returns the rows and the line number each came from.
    """
    rows, lines = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) < ncols:
                raise UsageError(f"{path}:{lineno}: expected {ncols} columns, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields[:ncols]])
            except ValueError:
                raise UsageError(f"{path}:{lineno}: not a number in {text!r}") from None
            lines.append(lineno)
    return rows, lines


def read_curve(path) -> ControlCurve:
    """Two-column curve file (x, y), optional '#' header and comment lines."""
    rows, lines = _read_rows(path, 2)
    if not rows:
        return ControlCurve(np.empty(0), np.empty(0))
    arr = np.array(rows)
    try:
        return ControlCurve(arr[:, 0], arr[:, 1])
    except KnotOrderError as exc:
        raise UsageError(f"{path}:{lines[exc.index]}: {exc}") from exc


def parse_points(spec: str, domain):
    """``--points`` value: a count of uniform points, or a comma list of x values."""
    spec = spec.strip()
    if not spec:
        return np.empty(0)
    if "," not in spec:
        try:
            count = int(spec)
        except ValueError:
            pass
        else:
            if count < 0:
                raise UsageError(f"point count must be >= 0, got {count}")
            lo, hi = domain
            if count == 1:
                return np.array([lo])
            xs = lo + (hi - lo) * (np.arange(count) / (count - 1))
            if count:
                xs[-1] = hi
            return xs
    try:
        return np.array([float(v) for v in spec.split(",") if v.strip()])
    except ValueError:
        raise UsageError(f"--points must be a count or comma-separated numbers, got {spec!r}") from None


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_table(path, header, columns, fmt="%.17g"):
    fh, own = _open_out(path)
    try:
        fh.write("#" + "\t".join(header) + "\n")
        if len(columns) and len(columns[0]):
            np.savetxt(fh, np.column_stack(columns), delimiter="\t", fmt=fmt)
        fh.flush()
    finally:
        if own:
            fh.close()


def _boundary(text, flag):
    try:
        return boundary_from_legacy(text)
    except (ValueError, SplineError):
        raise UsageError(f"{flag} must be a number or 'natural', got {text!r}") from None


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CUBESPLINE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"CUBESPLINE_SEED must be an integer, got {env!r}") from None


def _check_paths(args):
    for name in ("curve", "ypp", "bench_file", "posterior"):
        p = getattr(args, name, None)
        if p is not None and not Path(p).is_file():
            raise UsageError(f"no such file: {p}")
    out = getattr(args, "out", None)
    if out not in (None, "-"):
        parent = Path(out).parent
        if not parent.is_dir():
            raise UsageError(f"output directory does not exist: {parent}")


# -- subcommands ----------------------------------------------------------------

def cmd_derivs(args):
    curve = read_curve(args.curve)
    ypp = second_derivatives(curve, _boundary(args.start_deriv, "--start-deriv"),
                             _boundary(args.end_deriv, "--end-deriv"))
    _write_table(args.out, ["x", "y", "ypp"], [curve.knots, curve.values, ypp])


def cmd_interp(args):
    curve = read_curve(args.curve)
    if args.ypp is not None:
        rows, _ = _read_rows(args.ypp, 3)
        ypp = np.array([r[2] for r in rows])
    else:
        ypp = second_derivatives(curve, _boundary(args.start_deriv, "--start-deriv"),
                                 _boundary(args.end_deriv, "--end-deriv"))
    xs = parse_points(args.points, curve.domain)
    method = {"inverse": DivisionStrategy.PRECOMPUTED_INVERSE,
              "divide": DivisionStrategy.DEFERRED_DIVISION,
              "reference": "reference"}[args.method]
    ys = evaluate_curve(curve, ypp, xs, method)
    _write_table(args.out, ["x", "y"], [xs, ys])


def cmd_compare(args):
    """Binary64 against the extended-precision oracle: y'' per knot, MSE of a sweep."""
    curve = read_curve(args.curve)
    start = _boundary(args.start_deriv, "--start-deriv")
    end = _boundary(args.end_deriv, "--end-deriv")
    cfg = oracle.PrecisionConfig(args.precision)
    ypp = second_derivatives(curve, start, end)
    ypp_hp = oracle.hp_second_derivatives(curve, start, end, cfg)
    diff = [abs(float(p - q)) for p, q in zip(ypp_hp, ypp)]
    xs = parse_points(args.points, curve.domain)
    ys = evaluate_curve(curve, ypp, xs)
    ys_hp = oracle.hp_evaluate_curve(curve, ypp_hp, xs, cfg)
    _write_table(args.out, ["x", "ypp", "ypp_oracle", "abs_diff"],
                 [curve.knots, ypp, [float(v) for v in ypp_hp], diff])
    print(f"# max |ypp - oracle| = {max(diff):.6g}", file=sys.stderr)
    if len(xs):
        print(f"# interpolation MSE over {len(xs)} points = {oracle.mse(ys_hp, ys):.6g}",
              file=sys.stderr)


def cmd_bench(args):
    cfg = bench.BenchConfig(n_min=args.n_min, n_max=args.n_max,
                            schedule_len=args.schedule_len, seed=_seed(args))
    if args.quiet_check:
        q = bench.quiet_check()
        print(f"# timer resolution {q.resolution_ns:.0f} ns, overhead {q.overhead_ns:.0f} ns, "
              f"jitter {q.jitter:.1%}", file=sys.stderr)
    fh, own = _open_out(args.out)
    try:
        rows = bench.run_benchmark(cfg, fh)
    finally:
        if own:
            fh.close()
    log.info("wrote %d rows", rows)


def _bench_column(args):
    table = bench.read_bench_tsv(args.bench_file)
    if args.algorithm not in table:
        raise UsageError(f"{args.bench_file}: missing column {args.algorithm!r}")
    if args.round is not None and not 1 <= args.round <= len(bench.HEADER) - 2:
        raise UsageError(f"--round must lie in 1..{len(bench.HEADER) - 2}")
    return bench.select_timings(table, args.algorithm, args.round)


def cmd_fit(args):
    n, times = _bench_column(args)
    if not len(n):
        raise UsageError("no rows left after filtering")
    cfg = model.FitConfig(walkers=args.walkers, steps=args.steps, burn_in=args.burn_in,
                          seed=_seed(args), t_bounds=(args.t_min, args.t_max))
    post = model.fit_posterior(n, times, cfg)
    fh, own = _open_out(args.out)
    try:
        model.write_posterior(fh, post, rng=np.random.default_rng(cfg.seed))
    finally:
        if own:
            fh.close()
    for name, (p16, p50, p84) in model.summarize_posterior(post).items():
        print(f"# {name:<9s} {model.format_summary(p16, p50, p84)}", file=sys.stderr)
    print(f"# acceptance fraction {post.acceptance_fraction:.3f}", file=sys.stderr)


def _small_n_table(rows, algorithms):
    header = ["n", "count"] + list(algorithms)
    lines = ["\t".join(header)]
    for r in rows:
        cells = [str(r["n"]), str(r["count"])]
        for a in algorithms:
            p16, p50, p84 = r[a]
            cells.append(f"{p50:.2f} +{p84 - p50:.2f} -{p50 - p16:.2f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def cmd_report(args):
    table = bench.read_bench_tsv(args.bench_file)
    algorithms = [c for c in table if c not in ("n", "order", "noop")]
    if args.algorithm is not None:
        if args.algorithm not in table:
            raise UsageError(f"{args.bench_file}: missing column {args.algorithm!r}")
        algorithms = [args.algorithm]
    if args.round is not None:
        if len(algorithms) != 1:
            raise UsageError("--round needs --algorithm")
        slot = (table["order"] >> (3 * (args.round - 1))) & 7
        keep = slot == bench.ALGORITHMS.index(algorithms[0]) + 1
        table = {k: v[keep] for k, v in table.items()}
    ns = [int(v) for v in args.n.split(",")] if args.n else None
    rows = bench.per_n_percentiles(table, algorithms, ns)

    if args.out is None or args.out == "-":
        sys.stdout.write(_small_n_table(rows, algorithms))
    else:
        prefix = args.out
        header = ["n", "count"] + [f"{a}_p{q}" for a in algorithms for q in (16, 50, 84)]
        cols = [[r["n"] for r in rows], [r["count"] for r in rows]]
        for a in algorithms:
            for k in range(3):
                cols.append([r[a][k] for r in rows])
        _write_table(prefix + ".percentiles.tsv", header, cols)
        with open(prefix + ".table.tsv", "w", encoding="utf-8") as fh:
            fh.write(_small_n_table(rows, algorithms))

    if args.posterior is not None:
        post = model.read_posterior(args.posterior)
        grid = np.unique(table["n"]) if len(table["n"]) else np.geomspace(4, 1 << 20, 200)
        band = model.model_band(post, grid)
        dest = None if args.out in (None, "-") else args.out + ".band.tsv"
        _write_table(dest, ["n", "low", "mode", "high"], list(band.T))


# -- argument parsing ---------------------------------------------------------------

def _build_parser():
    p = argparse.ArgumentParser(prog="cubespline", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def bc(sp):
        sp.add_argument("--start-deriv", default="natural",
                        help="first derivative at x_1, or 'natural' (values > 0.99e30 also mean natural)")
        sp.add_argument("--end-deriv", default="natural", help="first derivative at x_n, or 'natural'")

    def out(sp):
        sp.add_argument("--out", default=None, help="output path (default: stdout)")

    def seed(sp):
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (fallback: $CUBESPLINE_SEED, then 0)")

    sp = sub.add_parser("derivs", help="second derivatives of a curve")
    sp.add_argument("curve")
    bc(sp); out(sp)
    sp.set_defaults(func=cmd_derivs)

    sp = sub.add_parser("interp", help="interpolate a curve at ascending points")
    sp.add_argument("curve")
    sp.add_argument("--ypp", default=None, help="x/y/ypp file from 'derivs' (else solve here)")
    sp.add_argument("--points", default="1024", help="count of uniform points or comma list of x")
    sp.add_argument("--method", choices=("inverse", "divide", "reference"), default="inverse")
    bc(sp); out(sp)
    sp.set_defaults(func=cmd_interp)

    sp = sub.add_parser("compare", help="binary64 against the extended-precision oracle")
    sp.add_argument("curve")
    sp.add_argument("--precision", type=int, default=30, help="oracle decimal digits")
    sp.add_argument("--points", default="2048")
    bc(sp); out(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("bench", help="time the interpolation variants")
    sp.add_argument("--n-min", type=int, default=4)
    sp.add_argument("--n-max", type=int, default=1 << 20)
    sp.add_argument("--schedule-len", type=int, default=1 << 19)
    sp.add_argument("--quiet-check", action="store_true", help="measure timer and machine noise first")
    seed(sp); out(sp)
    sp.set_defaults(func=cmd_bench)

    def column(sp):
        sp.add_argument("--round", type=int, default=None,
                        help="only trials where the algorithm ran in this slot (1 = first)")

    sp = sub.add_parser("fit", help="fit the execution-time model to one benchmark column")
    sp.add_argument("bench_file")
    sp.add_argument("--algorithm", default="newint__orig")
    column(sp)
    sp.add_argument("--walkers", type=int, default=32)
    sp.add_argument("--steps", type=int, default=2000)
    sp.add_argument("--burn-in", type=int, default=None)
    sp.add_argument("--t-min", type=float, default=model.DEFAULT_T_BOUNDS[0])
    sp.add_argument("--t-max", type=float, default=model.DEFAULT_T_BOUNDS[1])
    seed(sp); out(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("report", help="per-n percentile tables and model bands")
    sp.add_argument("bench_file")
    sp.add_argument("--posterior", default=None, help="posterior TSV from 'fit'")
    sp.add_argument("--algorithm", default=None)
    sp.add_argument("--n", default="4,8,16,32,64,128",
                    help="comma list of n for the table ('' for every n)")
    column(sp)
    sp.add_argument("--out", default=None,
                    help="file prefix; writes PREFIX.percentiles.tsv, PREFIX.table.tsv, PREFIX.band.tsv")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        _check_paths(args)
        args.func(args)
    except (UsageError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
