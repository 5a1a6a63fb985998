"""Extended-precision references for checking the binary64 spline.

Everything here runs in a private :class:`mpmath.MPContext` created per call,
so concurrent callers never share precision state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from .spline import (
    NATURAL,
    BoundaryCondition,
    ControlCurve,
    CurveSizeError,
    DomainError,
    KnotOrderError,
    Segment,
    ShapeError,
    SplineError,
    _boundary_args,
    _thomas_sweep,
    interp_segment_reference,
)

__all__ = [
    "HAND_KNOTS",
    "HAND_VALUES",
    "hand_curve",
    "PrecisionConfig",
    "TridiagonalSystem",
    "SingularSystemError",
    "assemble_system",
    "dense_tridiag_solve",
    "hp_second_derivatives",
    "hp_interpolate",
    "hp_evaluate_curve",
    "max_disagreement",
    "mse",
]

# Hand-built curve mixing close and distant knots, sharp and smooth turns.
HAND_KNOTS = ("0", "0.5", "1", "1.01", "1.25", "1.5", "1.58", "1.79", "2.12", "2.30",
              "2.402", "2.451", "2.5")
HAND_VALUES = ("1", "1.2", "2", "0.25", "0.25", "0.25", "0.63", "0.96", "1.17", "1.23",
               "1.245", "1.249", "1.25")


def hand_curve() -> ControlCurve:
    return ControlCurve([float(s) for s in HAND_KNOTS], [float(s) for s in HAND_VALUES])


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PrecisionConfig:
    decimal_digits: int = 30

    def __post_init__(self):
        if int(self.decimal_digits) != self.decimal_digits or self.decimal_digits < 10:
            raise ValueError(f"decimal_digits must be an integer >= 10, got {self.decimal_digits!r}")

    def context(self) -> mpmath.ctx_mp.MPContext:
        ctx = mpmath.MPContext()
        ctx.dps = int(self.decimal_digits)
        return ctx


DEFAULT_PRECISION = PrecisionConfig(30)


@dataclass(frozen=True)
class TridiagonalSystem:
    """``sub`` holds a_2..a_n, ``diag`` b_1..b_n, ``sup`` c_1..c_{n-1}, ``rhs`` d_1..d_n."""

    sub: Sequence
    diag: Sequence
    sup: Sequence
    rhs: Sequence

    def __post_init__(self):
        n = len(self.diag)
        if n < 1 or len(self.sub) != n - 1 or len(self.sup) != n - 1 or len(self.rhs) != n:
            raise ShapeError(
                f"tridiagonal shapes disagree: sub={len(self.sub)}, diag={n}, "
                f"sup={len(self.sup)}, rhs={len(self.rhs)}"
            )
        for j in range(n):
            off = (abs(self.sub[j - 1]) if j > 0 else 0) + (abs(self.sup[j]) if j < n - 1 else 0)
            if abs(self.diag[j]) < off:
                raise SplineError(f"row {j} is not diagonally dominant")

    def __len__(self):
        return len(self.diag)

    def dense(self):
        n = len(self)
        rows = [[0] * n for _ in range(n)]
        for j in range(n):
            rows[j][j] = self.diag[j]
            if j > 0:
                rows[j][j - 1] = self.sub[j - 1]
            if j < n - 1:
                rows[j][j + 1] = self.sup[j]
        return rows


def _as_numbers(curve, ctx):
    """Knots and values as ``ctx`` numbers (or floats when ``ctx`` is None).

    ``curve`` is a :class:`ControlCurve` (its binary64 entries convert exactly)
    or a ``(knots, values)`` pair whose entries may be decimal strings.
    """
    if isinstance(curve, ControlCurve):
        xs, ys = list(curve.knots), list(curve.values)
    else:
        xs, ys = curve
        xs, ys = list(xs), list(ys)
        if len(xs) != len(ys):
            raise ShapeError(f"{len(xs)} knots but {len(ys)} values")
    if len(xs) < 3:
        raise CurveSizeError(f"a curve needs at least 3 control points, got {len(xs)}")
    if ctx is None:
        xs, ys = [float(v) for v in xs], [float(v) for v in ys]
    else:
        xs, ys = [_to_mpf(ctx, v) for v in xs], [_to_mpf(ctx, v) for v in ys]
    for i in range(1, len(xs)):
        if not xs[i] > xs[i - 1]:
            raise KnotOrderError(i, xs[i - 1], xs[i])
    return xs, ys


def _to_mpf(ctx, v):
    if isinstance(v, str) or hasattr(v, "_mpf_"):
        return ctx.mpf(v)
    return ctx.mpf(float(v))


def assemble_system(curve, start: BoundaryCondition = NATURAL, end: BoundaryCondition = NATURAL,
                    *, simple: bool = False, cfg: PrecisionConfig | None = None) -> TridiagonalSystem:
    """Build a, b, c, d of the spline system explicitly, row by row.

    With ``cfg`` the entries are extended-precision numbers, otherwise floats.
    ``simple=True`` gives the collapsed-end-point rows instead of ``start``/``end``.
    """
    ctx = cfg.context() if cfg is not None else None
    x, y = _as_numbers(curve, ctx)
    s, e, natural_start, natural_end = _boundary_args(start, end)
    n = len(x)
    zero = 0 if ctx is None else ctx.mpf(0)
    one = 1 if ctx is None else ctx.mpf(1)
    sub, diag, sup, rhs = [], [], [], []

    h0 = x[1] - x[0]
    slope0 = (y[1] - y[0]) / h0
    if simple:
        diag.append(2 * h0); sup.append(h0); rhs.append(6 * slope0)
    elif natural_start:
        diag.append(one); sup.append(zero); rhs.append(zero)
    else:
        diag.append(2 * h0); sup.append(h0); rhs.append(6 * (slope0 - s))

    for j in range(1, n - 1):
        a = x[j] - x[j - 1]
        c = x[j + 1] - x[j]
        sub.append(a)
        diag.append(2 * (x[j + 1] - x[j - 1]))
        sup.append(c)
        rhs.append(6 * ((y[j + 1] - y[j]) / c - (y[j] - y[j - 1]) / a))

    hn = x[-1] - x[-2]
    slope_n = (y[-1] - y[-2]) / hn
    if simple:
        sub.append(hn); diag.append(2 * hn); rhs.append(-6 * slope_n)
    elif natural_end:
        sub.append(zero); diag.append(one); rhs.append(zero)
    else:
        sub.append(hn); diag.append(2 * hn); rhs.append(6 * (e - slope_n))
    return TridiagonalSystem(sub, diag, sup, rhs)


def dense_tridiag_solve(system: TridiagonalSystem, cfg: PrecisionConfig | None = None):
    """Solve the full n-by-n matrix with pivoted LU, ignoring its band structure.

    Float systems go through LAPACK; with ``cfg`` the solve runs in mpmath at
    that precision and a list of mpf is returned.
    """
    if cfg is None:
        A = np.array(system.dense(), dtype=np.float64)
        d = np.array([float(v) for v in system.rhs], dtype=np.float64)
        try:
            return np.linalg.solve(A, d)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(str(exc)) from exc
    ctx = cfg.context()
    A = ctx.matrix([[_to_mpf(ctx, v) for v in row] for row in system.dense()])
    d = ctx.matrix([_to_mpf(ctx, v) for v in system.rhs])
    try:
        sol = ctx.lu_solve(A, d)
    except ZeroDivisionError as exc:
        raise SingularSystemError("matrix is singular") from exc
    return [sol[i] for i in range(len(system))]


def hp_second_derivatives(curve, start: BoundaryCondition = NATURAL,
                          end: BoundaryCondition = NATURAL,
                          cfg: PrecisionConfig = DEFAULT_PRECISION, *, simple: bool = False):
    """The binary64 solver's exact sweep, run in extended precision.

    Returns a list of mpf. Decimal-string inputs are parsed at working
    precision, so e.g. ``"1.01"`` is not first rounded to binary64.
    """
    ctx = cfg.context()
    x, y = _as_numbers(curve, ctx)
    s, e, ns, ne = _boundary_args(start, end)
    n = len(x)
    c_p = [None] * n
    ypp = [None] * n
    return _thomas_sweep(x, y, ctx.mpf(s), ctx.mpf(e), ns, ne, simple, c_p, ypp)


def hp_interpolate(x, seg: Segment, cfg: PrecisionConfig = DEFAULT_PRECISION):
    ctx = cfg.context()
    vals = [_to_mpf(ctx, v) for v in seg]
    return interp_segment_reference(_to_mpf(ctx, x), Segment(*vals))


def hp_evaluate_curve(curve, ypp, xs, cfg: PrecisionConfig = DEFAULT_PRECISION):
    """Reference-formula sweep over ascending ``xs`` at extended precision."""
    ctx = cfg.context()
    k, v = _as_numbers(curve, ctx)
    ypp = [_to_mpf(ctx, t) for t in ypp]
    if len(ypp) != len(k):
        raise ShapeError(f"{len(ypp)} second derivatives for {len(k)} knots")
    out = []
    i = 0
    prev = None
    for x in xs:
        x = _to_mpf(ctx, x)
        if x < k[0] or x > k[-1] or (prev is not None and x < prev):
            raise DomainError(float(x), float(k[0]), float(k[-1]))
        prev = x
        while i < len(k) - 2 and k[i + 1] <= x:
            i += 1
        out.append(interp_segment_reference(x, Segment(k[i], k[i + 1], v[i], v[i + 1],
                                                       ypp[i], ypp[i + 1])))
    return out


def _pairs(a, b):
    a, b = list(a), list(b)
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")
    return a, b


def max_disagreement(a, b) -> float:
    a, b = _pairs(a, b)
    if not a:
        return 0.0
    return float(max(abs(p - q) for p, q in zip(a, b)))


def mse(a, b) -> float:
    a, b = _pairs(a, b)
    if not a:
        raise CurveSizeError("mean square error of empty sequences")
    total = 0
    for p, q in zip(a, b):
        total = total + (p - q) ** 2
    return float(total / len(a))
