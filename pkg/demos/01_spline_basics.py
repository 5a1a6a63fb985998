"""
Cubic splines from a handful of control points
==============================================

Build a curve, solve for its second derivatives under different end
conditions, and evaluate it with the reference and rearranged formulas.
"""

import numpy as np

from cubespline import (NATURAL, Clamped, ControlCurve, DivisionStrategy, bracket,
                        boundary_from_legacy, evaluate_curve, second_derivatives,
                        second_derivatives_simple, segment)
from cubespline.oracle import hand_curve

# the small hand-checked curve used throughout the tests
curve = hand_curve()
print("knots ", curve.knots)
print("values", curve.values)

# natural ends: y'' = 0 at both endpoints
ypp = second_derivatives(curve, NATURAL, NATURAL)
print("natural y''", np.round(ypp, 6))

# clamped ends pin the first derivative instead
ypp_c = second_derivatives(curve, Clamped(-1.0), Clamped(1.0))
print("clamped y''", np.round(ypp_c, 6))

# old-style call sites pass 1e30 to mean "natural"
print(boundary_from_legacy(1e30), boundary_from_legacy(0.5))

# The simple variant hard-wires its end rows. Note it does not return zeros
# for a straight line.
line = ControlCurve([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 2.0, 3.0])
print("simple variant on a line:", second_derivatives_simple(line))

# Evaluate on a grid. All three evaluation paths agree to rounding.
xs = np.linspace(*curve.domain, 9)
ref = evaluate_curve(curve, ypp, xs, "reference")
for strategy in DivisionStrategy:
    got = evaluate_curve(curve, ypp, xs, strategy)
    print(f"{strategy.value:>20}: max |diff| vs reference = {np.max(np.abs(got - ref)):.1e}")

# Bracketing is 0-based; a knot belongs to the segment on its right,
# except the last knot which stays in the final segment.
for x in (curve.knots[0], curve.knots[2], curve.knots[-1]):
    j = bracket(curve, x)
    print(f"x={x:<6} -> segment {j}: {segment(curve, ypp, j)}")
