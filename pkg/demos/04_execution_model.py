"""
Fitting the execution-time model
================================

Simulate timings from known parameters, fit the posterior with an ensemble
sampler, and check the recovered cache-level costs. Takes about half a minute.
"""

import numpy as np

from cubespline.model import (PARAM_NAMES, FitConfig, ModelParams, baseline, credible_interval,
                              fit_posterior, format_summary, gamma_from_mode_sigma, model_band,
                              simulate, summarize_posterior)

truth = ModelParams(5.28, 5.49, 3.05e-3, 2.37e5, 5.53e-6, 0.685, 0.753, 590.0, 0.0768)

# the noise is a Gamma offset above the baseline, described by mode and sigma
k, theta = gamma_from_mode_sigma(0.685, 0.1)
print(f"shape {k:.3f}, scale {theta:.4f}, mode back {(k - 1) * theta:.3f}")

# below t the L3 term dominates; far above it only main memory remains
for n in (100, 1e5, 2.37e5, 1e6, 1e7):
    lo, hi = credible_interval(truth, n)
    print(f"n={n:>9.0f}  baseline {baseline(truth, n):.4f}  2/3 interval ({lo:.3f}, {hi:.3f})")

rng = np.random.default_rng(7)
n = np.rint(np.exp(rng.uniform(np.log(100), np.log(500_000), 3000)))
times = simulate(truth, n, rng)

post = fit_posterior(n, times, FitConfig(walkers=32, steps=1500, seed=7))
print(f"acceptance fraction {post.acceptance_fraction:.2f}")
summary = summarize_posterior(post)
# b_l3 only matters for the smallest n, where the noise is widest, so the
# data barely constrain it; m_l3 and m_mm are the numbers worth reading
for name in PARAM_NAMES:
    print(f"{name:>7}: {format_summary(*summary[name])}   (true {getattr(truth, name):.3g})")

# columns: n, low edge, baseline + mode, high edge. At small n the Gamma is
# so skewed that its mode falls below the central 2/3 interval.
band = model_band(post, [1e2, 1e4, 1e6], rng=np.random.default_rng(0))
print(band)
