"""
How accurate is double precision here?
======================================

Solve the same tridiagonal system at 30 and 50 significant digits and
compare against the binary64 solver. Inputs are taken as exact binary64
values, so the only difference is arithmetic.
"""

import numpy as np

from cubespline import Clamped, evaluate_curve, second_derivatives
from cubespline.oracle import (PrecisionConfig, assemble_system, dense_tridiag_solve, hand_curve,
                               hp_evaluate_curve, hp_second_derivatives, max_disagreement, mse)

curve = hand_curve()
start, end = Clamped(-1.0), Clamped(1.0)

fast = second_derivatives(curve, start, end)
r30 = hp_second_derivatives(curve, start, end, PrecisionConfig(30))
r50 = hp_second_derivatives(curve, start, end, PrecisionConfig(50))
print("double vs 30 digits:", max_disagreement(r30, fast))
print("30 vs 50 digits:    ", max_disagreement(r30, r50))

# a plain dense solve of the same system is another independent check
system = assemble_system(curve, start, end)
print("dense (float) vs Thomas:", np.max(np.abs(dense_tridiag_solve(system) - fast)))

# sweep the whole domain and measure the mean squared interpolation error
xs = np.linspace(*curve.domain, 2048)
cfg = PrecisionConfig(30)
truth = hp_evaluate_curve(curve, r30, xs, cfg)
print(f"2048-point MSE: {mse(truth, evaluate_curve(curve, fast, xs)):.2e}")
