"""Randomised timing of the interpolation variants across curve lengths.

Each trial draws a random curve, solves its second derivatives once, then
times one sweep per loop (the five interpolation variants plus a loop that
only generates points and brackets them) in a shuffled order. Results are
written as TSV rows, one per trial, in the column layout::

    n  noop  splint_one__div  splint_one__mul  newint__orig  newint__noinv  newint__vol  order

``order`` packs the execution order three bits per slot, first loop in the
lowest bits. Loop IDs: 0 is the no-op loop, 1..5 the variants above in
column order.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numba
import numpy as np

from .spline import (
    NATURAL,
    ControlCurve,
    _newint_inv,
    CurveSizeError,
    newint_div_kernel,
    newint_inv_kernel,
    second_derivatives,
    splint_div_kernel,
    splint_mul_kernel,
)

__all__ = [
    "ALGORITHMS",
    "NOOP_ID",
    "HEADER",
    "BenchConfig",
    "DESK_CONFIG",
    "BenchRecord",
    "Variant",
    "default_registry",
    "OrderError",
    "BenchIOError",
    "schedule_n",
    "build_n_schedule",
    "gen_control_points",
    "encode_order",
    "decode_order",
    "run_trial",
    "iter_benchmark",
    "run_benchmark",
    "quiet_check",
    "read_bench_tsv",
    "select_timings",
    "per_n_percentiles",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("splint_one__div", "splint_one__mul", "newint__orig", "newint__noinv", "newint__vol")
NOOP_ID = 0
HEADER = ("n", "noop") + ALGORITHMS + ("order",)

_BITS = 3
_MASK = (1 << _BITS) - 1


@dataclass(frozen=True)
class BenchConfig:
    n_min: int = 4
    n_max: int = 1_048_576
    schedule_len: int = 524_288
    seed: int = 0
    algorithms: tuple = ALGORITHMS

    def __post_init__(self):
        if not 3 <= self.n_min <= self.n_max:
            raise ValueError(f"need 3 <= n_min <= n_max, got n_min={self.n_min}, n_max={self.n_max}")
        if self.schedule_len < 1:
            raise ValueError(f"schedule_len must be >= 1, got {self.schedule_len}")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")


DESK_CONFIG = BenchConfig(n_max=65_536, schedule_len=4_096)


class OrderError(ValueError):
    pass


class BenchIOError(OSError):
    def __init__(self, rows_written, cause):
        self.rows_written = rows_written
        super().__init__(f"writing benchmark output failed after {rows_written} rows: {cause}")


def schedule_n(r, n_min=4, n_max=1_048_576):
    """Curve length for interpolation fraction ``r`` in [0, 1] (square-root spacing)."""
    r = np.asarray(r, dtype=np.float64)
    lo, hi = math.sqrt(n_min), math.sqrt(n_max)
    return np.rint((r * (hi - lo) + lo) ** 2).astype(np.int64)


def build_n_schedule(cfg: BenchConfig, rng=None) -> np.ndarray:
    """Shuffled list of ``cfg.schedule_len`` curve lengths, duplicates kept."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    r = np.linspace(0.0, 1.0, cfg.schedule_len)
    ns = schedule_n(r, cfg.n_min, cfg.n_max)
    rng.shuffle(ns)
    return ns


def gen_control_points(n: int, rng) -> ControlCurve:
    """Random curve: ``x_0 = 0``, ``x_i = x_{i-1} + eps``, ``y_i ~ U(0,1)``.

    A zero ``eps`` becomes 0.0001. Knot steps are drawn first, then values.
    """
    if n < 3:
        raise CurveSizeError(f"a curve needs at least 3 control points, got {n}")
    eps = rng.random(n - 1)
    eps[eps == 0.0] = 0.0001
    x = np.empty(n)
    x[0] = 0.0
    np.cumsum(eps, out=x[1:])
    # a step far below the ulp of a large x can round away
    stuck = np.flatnonzero(np.diff(x) <= 0)
    for i in stuck:
        for k in range(i + 1, n):
            if x[k] > x[k - 1]:
                break
            x[k] = np.nextafter(x[k - 1], np.inf)
    y = rng.random(n)
    return ControlCurve(x, y)


def encode_order(perm: Sequence[int]) -> int:
    """Pack loop IDs three bits each, first-run loop in the lowest bits."""
    perm = [int(p) for p in perm]
    if len(set(perm)) != len(perm):
        raise OrderError(f"order {perm} repeats a loop ID")
    if any(not 0 <= p <= _MASK for p in perm):
        raise OrderError(f"order {perm} has IDs outside 0..{_MASK}")
    return sum(p << (_BITS * k) for k, p in enumerate(perm))


def decode_order(code: int, length: int = len(ALGORITHMS) + 1) -> list:
    code = int(code)
    if not 0 <= code < 1 << (_BITS * length):
        raise OrderError(f"order code {code} does not fit {length} slots")
    perm = [(code >> (_BITS * k)) & _MASK for k in range(length)]
    if len(set(perm)) != length:
        raise OrderError(f"order code {code} decodes to {perm}, not a permutation")
    return perm


# Timed loops. Each walks m evenly spaced points over [x_1, x_n], bracketing
# by forward scan, and returns a running sum so the work cannot be elided.
# One compiled loop per kernel keeps the call inlined, as in a hand-written
# benchmark. Closures share a qualified name, so they are not disk-cached
# (entries would collide); each process compiles them once.

def _make_loop(kernel):
    @numba.njit
    def loop(knots, values, ypp, m):
        n = len(knots)
        x1 = knots[0]
        xn = knots[n - 1]
        step = (xn - x1) / (m - 1) if m > 1 else 0.0
        i = 0
        acc = 0.0
        for k in range(m):
            x = min(x1 + k * step, xn)
            while i < n - 2 and knots[i + 1] <= x:
                i += 1
            acc += kernel(x, knots[i], knots[i + 1], values[i], values[i + 1], ypp[i], ypp[i + 1])
        return acc
    return loop


@numba.njit(cache=True)
def _noop_kernel(x, a, b, u, v, upp, vpp):
    return x - a


_loop_noop = _make_loop(_noop_kernel)
_loop_splint_div = _make_loop(splint_div_kernel)
_loop_splint_mul = _make_loop(splint_mul_kernel)
_loop_newint_orig = _make_loop(newint_inv_kernel)
_loop_newint_noinv = _make_loop(newint_div_kernel)
# no volatile in this toolchain: same arithmetic as newint__orig, own compiled copy
_loop_newint_vol = _make_loop(numba.njit(cache=True)(_newint_inv))


@dataclass(frozen=True)
class Variant:
    name: str
    id: int
    loop: Callable
    synthetic: bool = False


def default_registry(algorithms: Sequence[str] = ALGORITHMS) -> list:
    """No-op loop plus the requested variants, compiled and warmed up."""
    loops = {
        "splint_one__div": _loop_splint_div,
        "splint_one__mul": _loop_splint_mul,
        "newint__orig": _loop_newint_orig,
        "newint__noinv": _loop_newint_noinv,
        "newint__vol": _loop_newint_vol,
    }
    registry = [Variant("noop", NOOP_ID, _loop_noop)]
    for name in algorithms:
        registry.append(Variant(name, ALGORITHMS.index(name) + 1, loops[name],
                                synthetic=(name == "newint__vol")))
    # warm up with the array types a trial passes (read-only knots and values)
    k = np.array([0.0, 1.0, 2.0])
    k.flags.writeable = False
    for v in registry:
        v.loop(k, k, np.zeros(3), 3)
    return registry


@dataclass(frozen=True)
class BenchRecord:
    n: int
    noop_ns: int
    alg_ns: tuple          # aligned with ``algorithms``
    order: int
    algorithms: tuple = field(default=ALGORITHMS, compare=False)

    def __post_init__(self):
        if self.noop_ns < 0 or any(t < 0 for t in self.alg_ns):
            raise ValueError("timings must be non-negative")
        if len(self.alg_ns) != len(self.algorithms):
            raise ValueError(f"{len(self.alg_ns)} timings for {len(self.algorithms)} algorithms")

    def row(self) -> list:
        return [str(self.n), str(self.noop_ns)] + [str(t) for t in self.alg_ns] + [str(self.order)]

    def time_of(self, name) -> int:
        if name == "noop":
            return self.noop_ns
        return self.alg_ns[self.algorithms.index(name)]


def run_trial(n: int, rng, registry: Sequence[Variant] | None = None) -> BenchRecord:
    """Time every registered loop once on a fresh random curve of ``n`` points."""
    if registry is None:
        registry = default_registry()
    curve = gen_control_points(int(n), rng)
    ypp = second_derivatives(curve, NATURAL, NATURAL)
    knots, values = curve.knots, curve.values
    m = int(n)
    order = [registry[i] for i in rng.permutation(len(registry))]
    elapsed = {}
    clock = time.perf_counter_ns
    for v in order:
        t0 = clock()
        v.loop(knots, values, ypp, m)
        t1 = clock()
        elapsed[v.id] = t1 - t0
    algs = tuple(v.name for v in registry if v.id != NOOP_ID)
    return BenchRecord(
        n=int(n),
        noop_ns=elapsed.get(NOOP_ID, 0),
        alg_ns=tuple(elapsed[v.id] for v in registry if v.id != NOOP_ID),
        order=encode_order([v.id for v in order]),
        algorithms=algs,
    )


def _check_timer():
    res = time.get_clock_info("perf_counter").resolution
    if res > 100e-9:
        log.warning("timer resolution %.0f ns is coarser than 100 ns", res * 1e9)
    return res


def iter_benchmark(cfg: BenchConfig, registry=None) -> Iterator[BenchRecord]:
    _check_timer()
    if registry is None:
        registry = default_registry(cfg.algorithms)
    for v in registry:
        if v.synthetic:
            log.warning("%s is synthetic: it duplicates newint__orig's arithmetic", v.name)
    rng = np.random.default_rng(cfg.seed)
    for n in build_n_schedule(cfg, rng):
        yield run_trial(int(n), rng, registry)


def run_benchmark(cfg: BenchConfig, sink, registry=None, progress=None) -> int:
    """Run the whole schedule, writing a TSV row after every trial.

    ``sink`` is a text file object. Returns the number of data rows written.
    """
    header = ("n", "noop") + tuple(cfg.algorithms) + ("order",)
    rows = 0
    try:
        sink.write("\t".join(header) + "\n")
        sink.flush()
        for rec in iter_benchmark(cfg, registry):
            sink.write("\t".join(rec.row()) + "\n")
            sink.flush()
            rows += 1
            if progress is not None:
                progress(rows, rec)
    except OSError as exc:
        raise BenchIOError(rows, exc) from exc
    return rows


@dataclass
class QuietReport:
    resolution_ns: float
    overhead_ns: float
    jitter: float             # relative spread of a fixed workload
    load_average: float | None
    warnings: list


def quiet_check(repeats: int = 51) -> QuietReport:
    """Measure timer overhead and run-to-run jitter before a benchmark."""
    res = _check_timer() * 1e9
    clock = time.perf_counter_ns
    overhead = statistics.median(-(clock() - clock()) for _ in range(1001))
    k = np.linspace(0.0, 1.0, 4096)
    _loop_newint_orig(k, k, k, len(k))
    samples = []
    for _ in range(repeats):
        t0 = clock()
        _loop_newint_orig(k, k, k, len(k))
        samples.append(clock() - t0)
    med = statistics.median(samples)
    q1, _, q3 = statistics.quantiles(samples, n=4)
    jitter = (q3 - q1) / med if med else float("inf")
    try:
        load = os.getloadavg()[0]
    except (AttributeError, OSError):
        load = None
    warn = []
    if res > 100:
        warn.append(f"timer resolution {res:.0f} ns exceeds 100 ns")
    if jitter > 0.10:
        warn.append(f"fixed workload varies by {jitter:.0%} (interquartile/median); machine looks busy")
    if load is not None and load > 0.5 * (os.cpu_count() or 1):
        warn.append(f"load average {load:.2f} is high for {os.cpu_count()} CPUs")
    for w in warn:
        log.warning(w)
    return QuietReport(res, float(overhead), jitter, load, warn)


def read_bench_tsv(path_or_file) -> dict:
    """Columns of a benchmark TSV as int64 arrays, keyed by header name."""
    own = isinstance(path_or_file, (str, os.PathLike))
    fh = open(path_or_file, newline="", encoding="utf-8") if own else path_or_file
    try:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("benchmark file is empty") from None
        cols = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            for c, v in zip(cols, row):
                c.append(int(v))
    finally:
        if own:
            fh.close()
    table = {h: np.array(c, dtype=np.int64) for h, c in zip(header, cols)}
    missing = [c for c in ("n", "order") if c not in table]
    if missing:
        raise KeyError(f"benchmark file lacks column(s): {', '.join(missing)}")
    return table


def select_timings(table: dict, algorithm: str, round: int | None = None):
    """``(n, times)`` for one column, optionally only trials where it ran ``round``-th.

    ``round`` counts from 1 (first loop executed).
    """
    if algorithm not in table:
        raise KeyError(f"benchmark file lacks column: {algorithm}")
    n, times = table["n"], table[algorithm]
    if round is not None:
        ident = NOOP_ID if algorithm == "noop" else ALGORITHMS.index(algorithm) + 1
        slot = (table["order"] >> (_BITS * (round - 1))) & _MASK
        keep = slot == ident
        n, times = n[keep], times[keep]
    return n.astype(np.float64), times.astype(np.float64)


def per_n_percentiles(table: dict, algorithms: Sequence[str] | None = None,
                      ns: Sequence[int] | None = None) -> list:
    """Rows of ``n, count`` then 16/50/84th percentiles of ns/point per algorithm."""
    if algorithms is None:
        algorithms = [c for c in table if c not in ("n", "order")]
    for a in algorithms:
        if a not in table:
            raise KeyError(f"benchmark file lacks column: {a}")
    all_n = table["n"]
    ns = np.unique(all_n) if ns is None else ns
    rows = []
    for n in ns:
        mask = all_n == n
        count = int(mask.sum())
        if not count:
            continue
        row = {"n": int(n), "count": count}
        for a in algorithms:
            p16, p50, p84 = np.percentile(table[a][mask] / n, [16, 50, 84])
            row[a] = (float(p16), float(p50), float(p84))
        rows.append(row)
    return rows
