"""Acceptance checks, one test per criterion.

Each test prints a single ``[PASS]``/``[FAIL]`` line with the measured value
and the threshold, then asserts. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import io
import math
import time

import numpy as np
import pytest

from cubespline import (
    NATURAL,
    Clamped,
    DivisionStrategy,
    Segment,
    evaluate_curve,
    interp_segment_fast,
    interp_segment_reference,
    second_derivatives,
    second_derivatives_simple,
)
from cubespline.bench import DESK_CONFIG, build_n_schedule, gen_control_points, read_bench_tsv, run_benchmark
from cubespline.model import (
    FitConfig,
    ModelParams,
    baseline,
    fit_posterior,
    gamma_from_mode_sigma,
    log_likelihood,
    simulate,
    summarize_posterior,
)
from cubespline.oracle import (
    PrecisionConfig,
    assemble_system,
    dense_tridiag_solve,
    hand_curve,
    hp_evaluate_curve,
    hp_second_derivatives,
    max_disagreement,
    mse,
)

from conftest import HAND_YPP_TABLE, random_curve

EXPECTED_HEADER = "n\tnoop\tsplint_one__div\tsplint_one__mul\tnewint__orig\tnewint__noinv\tnewint__vol\torder"


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}")
        assert ok, detail
    return emit


def test_c01_golden_second_derivatives(report):
    t0 = time.perf_counter()
    ypp = second_derivatives(hand_curve(), NATURAL, NATURAL)
    worst = float(np.max(np.abs(ypp - HAND_YPP_TABLE)))
    elapsed = time.perf_counter() - t0
    report(1, "golden second derivatives", worst <= 5e-6 and elapsed < 1.0,
           f"max|d|={worst:.2e} (<= 5e-6), {elapsed:.3f} s (< 1 s)")


def test_c02_formula_equivalence(report):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    segs = []
    while len(segs) < 100_000:
        c = gen_control_points(1000, rng)
        ypp = second_derivatives(c)
        k, v = c.knots, c.values
        segs.extend(zip(k[:-1], k[1:], v[:-1], v[1:], ypp[:-1], ypp[1:]))
    segs = segs[:100_000]
    t = rng.random(len(segs))
    worst = {s: 0.0 for s in DivisionStrategy}
    for frac, raw in zip(t, segs):
        seg = Segment(*raw)
        x = min(seg.a + frac * (seg.b - seg.a), seg.b)
        ref = interp_segment_reference(x, seg)
        for s in DivisionStrategy:
            err = abs(interp_segment_fast(x, seg, s) - ref) / max(1.0, abs(ref))
            worst[s] = max(worst[s], err)
    elapsed = time.perf_counter() - t0
    ok = all(w <= 1e-12 for w in worst.values()) and elapsed < 5.0
    detail = ", ".join(f"{s.value} {w:.2e}" for s, w in worst.items())
    report(2, "formula equivalence (1e5 segments)", ok, f"{detail} (<= 1e-12), {elapsed:.2f} s (< 5 s)")


def test_c03_dense_oracle(report):
    rng = np.random.default_rng(3)
    bcs = [(NATURAL, NATURAL), (Clamped(0.0), Clamped(0.0)), (NATURAL, Clamped(0.0)), (Clamped(0.0), NATURAL)]
    worst = 0.0
    for n in (3, 4, 8, 16, 64):
        for _ in range(100):
            # unit-scale curves: an absolute bound is sub-ulp once |y''| passes ~1e6,
            # which the benchmark generator's tiny knot gaps routinely produce
            c = random_curve(rng, n)
            for start, end in bcs:
                # fresh random slopes for each clamped end
                start = Clamped(rng.normal()) if isinstance(start, Clamped) else start
                end = Clamped(rng.normal()) if isinstance(end, Clamped) else end
                dense = dense_tridiag_solve(assemble_system(c, start, end))
                worst = max(worst, float(np.max(np.abs(second_derivatives(c, start, end) - dense))))
            dense = dense_tridiag_solve(assemble_system(c, simple=True))
            worst = max(worst, float(np.max(np.abs(second_derivatives_simple(c) - dense))))
    report(3, "Thomas vs dense solve", worst <= 1e-10, f"max|d|={worst:.2e} (<= 1e-10)")


def test_c04_clamped_slopes(report):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        c = gen_control_points(int(rng.integers(3, 40)), rng)
        # slopes bounded away from zero so the relative test is meaningful
        want = rng.choice([-1, 1], 2) * rng.uniform(0.5, 3.0, 2)
        ypp = second_derivatives(c, Clamped(want[0]), Clamped(want[1]))
        k = c.knots
        h0 = 1e-6 * (k[1] - k[0])
        y = evaluate_curve(c, ypp, [k[0], k[0] + h0, k[0] + 2 * h0], "reference")
        d0 = (-3 * y[0] + 4 * y[1] - y[2]) / (2 * h0)
        hn = 1e-6 * (k[-1] - k[-2])
        y = evaluate_curve(c, ypp, [k[-1] - 2 * hn, k[-1] - hn, k[-1]], "reference")
        dn = (3 * y[2] - 4 * y[1] + y[0]) / (2 * hn)
        worst = max(worst, abs(d0 / want[0] - 1), abs(dn / want[1] - 1))
    report(4, "clamped end slopes", worst <= 1e-4, f"max relative error {worst:.2e} (<= 1e-4)")


def test_c05_precision_scaling(report):
    t0 = time.perf_counter()
    c = hand_curve()
    r30 = hp_second_derivatives(c, cfg=PrecisionConfig(30))
    r50 = hp_second_derivatives(c, cfg=PrecisionConfig(50))
    vs_double = max_disagreement(r30, second_derivatives(c))
    vs_50 = max_disagreement(r30, r50)
    elapsed = time.perf_counter() - t0
    ok = vs_double <= 1e-12 and vs_50 <= 1e-25 and elapsed < 30
    report(5, "precision scaling", ok,
           f"double vs 30 digits {vs_double:.2e} (<= 1e-12), 30 vs 50 digits {vs_50:.2e} (<= 1e-25), "
           f"{elapsed:.2f} s (< 30 s)")


def test_c06_mse(report):
    c = hand_curve()
    start, end = Clamped(-1.0), Clamped(1.0)
    cfg = PrecisionConfig(30)
    xs = np.linspace(*c.domain, 2048)
    ys = evaluate_curve(c, second_derivatives(c, start, end), xs)
    truth = hp_evaluate_curve(c, hp_second_derivatives(c, start, end, cfg), xs, cfg)
    err = mse(truth, ys)
    report(6, "2048-point sweep MSE", err < 1e-24, f"MSE {err:.3e} (< 1e-24)")


def test_c07_bench_schema_and_determinism(report):
    t0 = time.perf_counter()
    outs = []
    for _ in range(2):
        buf = io.StringIO()
        rows = run_benchmark(DESK_CONFIG, buf)
        outs.append(buf.getvalue())
    per_run = (time.perf_counter() - t0) / 2
    a, b = (read_bench_tsv(io.StringIO(o)) for o in outs)
    header = outs[0].split("\n", 1)[0]
    same = (np.array_equal(a["n"], b["n"]) and np.array_equal(a["order"], b["order"])
            and [r.split("\t")[0] + r.split("\t")[-1] for r in outs[0].splitlines()]
            == [r.split("\t")[0] + r.split("\t")[-1] for r in outs[1].splitlines()])
    ok = (header == EXPECTED_HEADER and same and rows == 4096 and per_run < 600
          and np.array_equal(a["n"], build_n_schedule(DESK_CONFIG)))
    report(7, "bench schema and determinism", ok,
           f"header {'matches' if header == EXPECTED_HEADER else 'differs'}, n/order columns "
           f"{'identical' if same else 'differ'} across runs, {rows} rows, {per_run:.1f} s per desk run (< 600 s)")


def test_c08_gamma_round_trip(report):
    mo = np.concatenate([[0.0], np.linspace(0, 10, 401)[1:], np.geomspace(1e-9, 10, 200)])
    sigma = np.concatenate([np.linspace(0, 10, 401)[1:], np.geomspace(1e-9, 10, 200)])
    M, S = np.meshgrid(mo, sigma)
    k, t = gamma_from_mode_sigma(M.ravel(), S.ravel())
    e_mode = float(np.max(np.abs((k - 1) * t - M.ravel())))
    e_sigma = float(np.max(np.abs(np.sqrt(k) * t - S.ravel())))
    ok = e_mode <= 1e-12 and e_sigma <= 1e-12
    report(8, "Gamma mode/sigma round trip", ok,
           f"{M.size} points, mode error {e_mode:.2e}, sigma error {e_sigma:.2e} (<= 1e-12)")


TRUTH = ModelParams(5.28, 5.49, 3.05e-3, 2.37e5, 5.53e-6, 0.685, 0.753, 590.0, 0.0768)


def test_c09_synthetic_recovery(report):
    t0 = time.perf_counter()
    errs = {"m_l3": [], "m_mm": [], "mode": []}
    cover = {"m_l3": 0, "m_mm": 0, "mode": 0}
    reps = 20
    for rep in range(reps):
        rng = np.random.default_rng(1000 + rep)
        n = np.rint(np.exp(rng.uniform(math.log(100), math.log(500_000), 5000)))
        y = simulate(TRUTH, n, rng)
        post = fit_posterior(n, y, FitConfig(walkers=32, steps=2000, seed=rep))
        s = summarize_posterior(post)
        for name in errs:
            lo, med, hi = s[name]
            want = getattr(TRUTH, name)
            errs[name].append(abs(med / want - 1))
            cover[name] += lo <= want <= hi
    elapsed = time.perf_counter() - t0
    med = {k: float(np.median(v)) for k, v in errs.items()}
    ok = (med["m_l3"] <= 0.02 and med["m_mm"] <= 0.02 and med["mode"] <= 0.10
          and cover["m_l3"] >= 0.8 * reps and cover["m_mm"] >= 0.8 * reps and elapsed <= 600)
    report(9, "synthetic model recovery", ok,
           f"median error m_l3 {med['m_l3']:.2%}, m_mm {med['m_mm']:.2%} (<= 2%), mode {med['mode']:.2%} "
           f"(<= 10%); 16/84 coverage m_l3 {cover['m_l3']}/{reps}, m_mm {cover['m_mm']}/{reps} "
           f"(>= {int(0.8 * reps)}/{reps}), mode {cover['mode']}/{reps} (reported); {elapsed:.0f} s (<= 600 s)")


def test_c10_likelihood_support(report):
    rng = np.random.default_rng(10)
    failures = 0
    trials = 0
    for _ in range(50):
        n = np.rint(np.exp(rng.uniform(math.log(100), math.log(500_000), 200)))
        y = simulate(TRUTH, n, rng)
        base_ok = math.isfinite(log_likelihood(TRUTH, n, y))
        for bump in (0.0, -1e-9, -1.0):
            i = int(rng.integers(len(n)))
            bad = y.copy()
            floor = baseline(TRUTH, n[i]) + bump
            bad[i] = n[i] * floor
            # n * floor can round so that the quotient sits one ulp above the floor
            while bad[i] / n[i] > floor:
                bad[i] = np.nextafter(bad[i], -np.inf)
            trials += 1
            dropped = np.delete(np.arange(len(n)), i)
            if not (base_ok and log_likelihood(TRUTH, n, bad) == -math.inf
                    and math.isfinite(log_likelihood(TRUTH, n[dropped], bad[dropped]))):
                failures += 1
    report(10, "likelihood support", failures == 0,
           f"{trials - failures}/{trials} cases go to -inf at or below the baseline and recover on removal")
