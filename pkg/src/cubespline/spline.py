"""Cubic spline interpolation from knot values and second derivatives.

Two pieces make up the spline:

* :func:`second_derivatives` solves the tridiagonal system for y'' with
  Thomas' algorithm, fusing matrix assembly into the forward sweep and
  reusing the output buffer for d'.
* :func:`interp_segment_reference` / :func:`interp_segment_fast` evaluate the
  cubic on one bracketing segment.

All floating-point work is IEEE binary64.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numba
import numpy as np

__all__ = [
    "SplineError",
    "KnotOrderError",
    "CurveSizeError",
    "ShapeError",
    "DomainError",
    "DegenerateSegmentError",
    "ControlCurve",
    "Natural",
    "Clamped",
    "NATURAL",
    "BoundaryCondition",
    "boundary_from_legacy",
    "Segment",
    "DivisionStrategy",
    "bracket",
    "segment",
    "interp_segment_reference",
    "interp_segment_fast",
    "second_derivatives",
    "second_derivatives_simple",
    "evaluate_curve",
    "LEGACY_NATURAL_THRESHOLD",
]

# Numerical Recipes convention: any end slope above this means "natural".
LEGACY_NATURAL_THRESHOLD = 0.99e30


class SplineError(ValueError):
    """Base class for invalid spline input."""


class KnotOrderError(SplineError):
    def __init__(self, index, left, right):
        self.index = index
        super().__init__(
            f"knots must be strictly increasing: knot {index} ({right!r}) "
            f"does not exceed knot {index - 1} ({left!r})"
        )


class CurveSizeError(SplineError):
    pass


class ShapeError(SplineError):
    pass


class DomainError(SplineError):
    """Evaluation point outside the curve's knot range."""

    def __init__(self, x, lo, hi, message=None):
        self.x = x
        self.domain = (lo, hi)
        super().__init__(message or f"x={x!r} lies outside the curve domain [{lo!r}, {hi!r}]")


class DegenerateSegmentError(SplineError):
    pass


@dataclass(frozen=True)
class ControlCurve:
    """Strictly increasing knots with paired values, at least three of them."""

    knots: np.ndarray
    values: np.ndarray

    def __init__(self, knots, values):
        x = np.array(knots, dtype=np.float64)
        y = np.array(values, dtype=np.float64)
        if x.ndim != 1 or y.ndim != 1:
            raise ShapeError("knots and values must be one-dimensional")
        if len(x) != len(y):
            raise ShapeError(f"{len(x)} knots but {len(y)} values")
        if len(x) < 3:
            raise CurveSizeError(f"a curve needs at least 3 control points, got {len(x)}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise SplineError("knots and values must be finite")
        bad = np.flatnonzero(np.diff(x) <= 0)
        if len(bad):
            i = int(bad[0]) + 1
            raise KnotOrderError(i, float(x[i - 1]), float(x[i]))
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "knots", x)
        object.__setattr__(self, "values", y)

    def __len__(self):
        return len(self.knots)

    @property
    def domain(self):
        return float(self.knots[0]), float(self.knots[-1])


@dataclass(frozen=True)
class Natural:
    """Zero curvature at the end point."""


@dataclass(frozen=True)
class Clamped:
    """Prescribed first derivative at the end point."""

    slope: float

    def __post_init__(self):
        if not math.isfinite(self.slope):
            raise SplineError(f"clamped slope must be finite, got {self.slope!r}")


BoundaryCondition = Union[Natural, Clamped]
NATURAL = Natural()


def boundary_from_legacy(value) -> BoundaryCondition:
    """Map a legacy numeric end slope (or the word ``natural``) to a boundary.

    Values above 0.99e30 select the natural condition, as in the original
    ``spline`` calling convention.
    """
    if isinstance(value, (Natural, Clamped)):
        return value
    if isinstance(value, str):
        if value.strip().lower() == "natural":
            return NATURAL
        value = float(value)
    value = float(value)
    if value > LEGACY_NATURAL_THRESHOLD:
        return NATURAL
    return Clamped(value)


class Segment:
    """One cubic piece: knots ``a < b``, values ``u, v``, second derivatives ``upp, vpp``."""

    __slots__ = ("a", "b", "u", "v", "upp", "vpp")

    def __init__(self, a, b, u, v, upp, vpp):
        if not b > a:
            raise DegenerateSegmentError(f"segment needs b > a, got a={a!r}, b={b!r}")
        self.a, self.b, self.u, self.v, self.upp, self.vpp = a, b, u, v, upp, vpp

    def __iter__(self):
        return iter((self.a, self.b, self.u, self.v, self.upp, self.vpp))

    def __repr__(self):
        return "Segment(a={!r}, b={!r}, u={!r}, v={!r}, upp={!r}, vpp={!r})".format(*self)


class DivisionStrategy(enum.Enum):
    #: compute 1/(b-a) up front and multiply the sum by it
    PRECOMPUTED_INVERSE = "precomputed_inverse"
    #: divide the final sum by (b-a)
    DEFERRED_DIVISION = "deferred_division"


def bracket(curve: ControlCurve, x: float) -> int:
    """Index ``j`` (0-based) of the segment ``[knots[j], knots[j+1]]`` holding ``x``.

    A point sitting exactly on an interior knot belongs to the segment that
    starts at that knot. The last knot belongs to the last segment.
    """
    lo, hi = curve.domain
    if not lo <= x <= hi:
        raise DomainError(x, lo, hi)
    j = int(np.searchsorted(curve.knots, x, side="right")) - 1
    return min(j, len(curve) - 2)


def segment(curve: ControlCurve, ypp, j: int) -> Segment:
    k, v = curve.knots, curve.values
    return Segment(float(k[j]), float(k[j + 1]), float(v[j]), float(v[j + 1]),
                   float(ypp[j]), float(ypp[j + 1]))


def interp_segment_reference(x, seg: Segment):
    """``A*u + B*v + C*upp + D*vpp`` with the textbook weights."""
    a, b, u, v, upp, vpp = seg
    if not b > a:
        raise DegenerateSegmentError(f"segment needs b > a, got a={a!r}, b={b!r}")
    h = b - a
    A = (b - x) / h
    B = (x - a) / h
    C = (A * A * A - A) * (h * h) / 6.0
    D = (B * B * B - B) * (h * h) / 6.0
    return A * u + B * v + C * upp + D * vpp


def interp_segment_fast(x, seg: Segment,
                        strategy: DivisionStrategy = DivisionStrategy.PRECOMPUTED_INVERSE):
    """Rearranged cubic that needs a single division per call.

    Mathematically identical to :func:`interp_segment_reference`.
    """
    a, b, u, v, upp, vpp = seg
    if not b > a:
        raise DegenerateSegmentError(f"segment needs b > a, got a={a!r}, b={b!r}")
    if strategy is DivisionStrategy.PRECOMPUTED_INVERSE:
        return _newint_inv(x, a, b, u, v, upp, vpp)
    if strategy is DivisionStrategy.DEFERRED_DIVISION:
        return _newint_div(x, a, b, u, v, upp, vpp)
    raise ValueError(f"unknown division strategy {strategy!r}")


# Plain-arithmetic kernels. These are jitted below for the array loops and the
# benchmark; the undecorated versions also serve scalar calls.

def _splint_div(x, a, b, u, v, upp, vpp):
    h = b - a
    A = (b - x) / h
    B = (x - a) / h
    return A * u + B * v + ((A * A * A - A) * upp + (B * B * B - B) * vpp) * (h * h) / 6.0


def _splint_mul(x, a, b, u, v, upp, vpp):
    h = b - a
    A = (b - x) / h
    B = (x - a) / h
    return A * u + B * v + ((A * A * A - A) * upp + (B * B * B - B) * vpp) * (h * h) * (1.0 / 6.0)


def _newint_inv(x, a, b, u, v, upp, vpp):
    ba = b - a
    xa = x - a
    inv_ba = 1.0 / ba
    bx = b - x
    ba2 = ba * ba

    lower = xa * v + bx * u
    C = (xa * xa - ba2) * xa * vpp
    D = (bx * bx - ba2) * bx * upp
    return (lower + 0.16666666666666666666 * (C + D)) * inv_ba


def _newint_div(x, a, b, u, v, upp, vpp):
    ba = b - a
    xa = x - a
    bx = b - x
    ba2 = ba * ba

    lower = xa * v + bx * u
    C = (xa * xa - ba2) * xa * vpp
    D = (bx * bx - ba2) * bx * upp
    return (lower + 0.16666666666666666666 * (C + D)) / ba


def _thomas_sweep(knots, values, start_slope, end_slope, natural_start, natural_end,
                  simple, c_p, ypp):
    """Fused assembly + Thomas solve, writing y'' into ``ypp``.

    ``c_p`` is the single scratch list; d'_j is parked in ``ypp[j]`` until
    back substitution overwrites it. Works on floats and on any number type
    that supports the four basic operations (used by the extended-precision
    oracle).
    """
    n = len(knots)

    new_x = knots[1]
    new_y = values[1]
    cj = knots[1] - knots[0]
    new_dj = (values[1] - values[0]) / cj

    if simple:
        c_p[0] = 0.5 + 0.0 * cj
        ypp[0] = 3 * new_dj / cj
    elif natural_start:
        c_p[0] = 0.0 * cj
        ypp[0] = 0.0 * cj
    else:
        c_p[0] = 0.5 + 0.0 * cj
        ypp[0] = 3 * (new_dj - start_slope) / cj

    j = 1
    while j < n - 1:
        old_x = new_x
        old_y = new_y
        aj = cj
        old_dj = new_dj

        new_x = knots[j + 1]
        new_y = values[j + 1]

        cj = new_x - old_x
        new_dj = (new_y - old_y) / cj
        bj = 2 * (cj + aj)
        inv_denom = 1.0 / (bj - aj * c_p[j - 1])
        dj = 6 * (new_dj - old_dj)

        ypp[j] = (dj - aj * ypp[j - 1]) * inv_denom
        c_p[j] = cj * inv_denom
        j += 1

    if natural_end and not simple:
        c_p[j] = 0.0 * cj
        ypp[j] = 0.0 * cj
    else:
        aj = cj
        old_dj = new_dj
        # c_n does not exist; a zero keeps the row's shape
        cj = 0.0 * aj
        if simple:
            new_dj = 0.0 * aj
        else:
            new_dj = end_slope
        bj = 2 * (cj + aj)
        inv_denom = 1.0 / (bj - aj * c_p[j - 1])
        dj = 6 * (new_dj - old_dj)

        ypp[j] = (dj - aj * ypp[j - 1]) * inv_denom
        c_p[j] = cj * inv_denom

    # y''_n = d'_n already sits in ypp[n-1]
    while j > 0:
        j -= 1
        ypp[j] = ypp[j] - c_p[j] * ypp[j + 1]
    return ypp


_jit = numba.njit(cache=True, fastmath=False)
splint_div_kernel = _jit(_splint_div)
splint_mul_kernel = _jit(_splint_mul)
newint_inv_kernel = _jit(_newint_inv)
newint_div_kernel = _jit(_newint_div)
_thomas_sweep_f64 = _jit(_thomas_sweep)


def _boundary_args(start, end):
    for bc in (start, end):
        if not isinstance(bc, (Natural, Clamped)):
            raise TypeError(f"boundary condition must be Natural or Clamped, got {bc!r}")
    natural_start = isinstance(start, Natural)
    natural_end = isinstance(end, Natural)
    s = 0.0 if natural_start else float(start.slope)
    e = 0.0 if natural_end else float(end.slope)
    return s, e, natural_start, natural_end


def _check_diagonal_dominance(knots):
    # interior rows: |b_j| = 2(x_{j+1} - x_{j-1}) >= a_j + c_j
    h = np.diff(knots)
    assert np.all(2 * (h[1:] + h[:-1]) >= h[1:] + h[:-1]), "tridiagonal system lost diagonal dominance"


def second_derivatives(curve: ControlCurve, start: BoundaryCondition = NATURAL,
                       end: BoundaryCondition = NATURAL) -> np.ndarray:
    """Second derivatives y''_j of the cubic spline through ``curve``.

    ``start`` and ``end`` are :class:`Natural` (y'' = 0 at that end) or
    :class:`Clamped` (given first derivative at that end).
    """
    if not isinstance(curve, ControlCurve):
        curve = ControlCurve(*curve)
    s, e, ns, ne = _boundary_args(start, end)
    if __debug__:
        _check_diagonal_dominance(curve.knots)
    n = len(curve)
    c_p = np.empty(n)
    ypp = np.empty(n)
    return _thomas_sweep_f64(curve.knots, curve.values, s, e, ns, ne, False, c_p, ypp)


def second_derivatives_simple(curve: ControlCurve) -> np.ndarray:
    """Second derivatives with the end points collapsed onto their neighbours.

    The rows at both ends come from treating ``x_0 = x_1, y_0 = y_1`` (and the
    mirror at the far end), which reduces continuity at the end points. This is
    *not* the natural spline; it is kept as the simpler benchmark variant.
    """
    if not isinstance(curve, ControlCurve):
        curve = ControlCurve(*curve)
    n = len(curve)
    c_p = np.empty(n)
    ypp = np.empty(n)
    return _thomas_sweep_f64(curve.knots, curve.values, 0.0, 0.0, False, False, True, c_p, ypp)


@_jit
def _evaluate_sorted(knots, values, ypp, xs, out, kind):
    n = len(knots)
    i = 0
    for k in range(len(xs)):
        x = xs[k]
        while i < n - 2 and knots[i + 1] <= x:
            i += 1
        a = knots[i]
        b = knots[i + 1]
        u = values[i]
        v = values[i + 1]
        if kind == 0:
            out[k] = _newint_inv_j(x, a, b, u, v, ypp[i], ypp[i + 1])
        elif kind == 1:
            out[k] = _newint_div_j(x, a, b, u, v, ypp[i], ypp[i + 1])
        else:
            out[k] = _splint_div_j(x, a, b, u, v, ypp[i], ypp[i + 1])
    return out


_newint_inv_j = newint_inv_kernel
_newint_div_j = newint_div_kernel
_splint_div_j = splint_div_kernel

_EVAL_KIND = {
    DivisionStrategy.PRECOMPUTED_INVERSE: 0,
    DivisionStrategy.DEFERRED_DIVISION: 1,
    "reference": 2,
}


def evaluate_curve(curve: ControlCurve, ypp, xs,
                   method: Union[DivisionStrategy, str] = DivisionStrategy.PRECOMPUTED_INVERSE
                   ) -> np.ndarray:
    """Interpolate the spline at ascending points ``xs``.

    Bracketing scans forward through the knots, so ``xs`` must be sorted and
    inside ``[knots[0], knots[-1]]``. ``method`` picks the segment formula:
    a :class:`DivisionStrategy` for the rearranged form or ``"reference"``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 1:
        raise ShapeError("evaluation points must be one-dimensional")
    ypp = np.asarray(ypp, dtype=np.float64)
    if len(ypp) != len(curve):
        raise ShapeError(f"{len(ypp)} second derivatives for {len(curve)} knots")
    out = np.empty(len(xs))
    if len(xs) == 0:
        return out
    lo, hi = curve.domain
    if np.any(np.isnan(xs)):
        raise DomainError(float("nan"), lo, hi)
    if np.any(np.diff(xs) < 0):
        k = int(np.flatnonzero(np.diff(xs) < 0)[0]) + 1
        raise DomainError(float(xs[k]), lo, hi,
                          f"evaluation points must be ascending; point {k} ({xs[k]!r}) "
                          f"is below its predecessor")
    if xs[0] < lo or xs[-1] > hi:
        bad = xs[0] if xs[0] < lo else xs[-1]
        raise DomainError(float(bad), lo, hi)
    try:
        kind = _EVAL_KIND[method]
    except KeyError:
        raise ValueError(f"unknown evaluation method {method!r}") from None
    return _evaluate_sorted(curve.knots, curve.values, ypp, xs, out, kind)
