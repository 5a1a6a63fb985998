"""Cubic spline interpolation with an extended-precision oracle, a timing
harness for the interpolation variants and a Bayesian execution-time model."""

from .spline import (
    NATURAL,
    Clamped,
    ControlCurve,
    CurveSizeError,
    DegenerateSegmentError,
    DivisionStrategy,
    DomainError,
    KnotOrderError,
    Natural,
    Segment,
    ShapeError,
    SplineError,
    boundary_from_legacy,
    bracket,
    evaluate_curve,
    interp_segment_fast,
    interp_segment_reference,
    second_derivatives,
    second_derivatives_simple,
    segment,
)

__version__ = "0.1.0"
