"""
A small interpolation benchmark
===============================

Sizes are drawn so their square roots are uniform, shuffled, and each trial
times every variant in a random order. The order is stored as a base-8 code.
"""

import io

import numpy as np

from cubespline.bench import (ALGORITHMS, BenchConfig, decode_order, encode_order, per_n_percentiles,
                              quiet_check, read_bench_tsv, run_benchmark)

report = quiet_check()
print(f"timer resolution {report.resolution_ns:.0f} ns, call overhead {report.overhead_ns:.0f} ns")
for w in report.warnings:
    print("warning:", w)

# order codes round-trip; ID 0 is the no-op loop
perm = [0, 4, 1, 5, 3, 2]
code = encode_order(perm)
print(code, decode_order(code))

# keep this quick: a few hundred trials on modest sizes
cfg = BenchConfig(n_min=4, n_max=4096, schedule_len=512, seed=3)
buf = io.StringIO()
rows = run_benchmark(cfg, buf)
print(f"{rows} rows written")

table = read_bench_tsv(io.StringIO(buf.getvalue()))
print("n     " + "  ".join(f"{a:>16}" for a in ALGORITHMS))
for row in per_n_percentiles(table, ALGORITHMS, [4, 64, 1024, 4096]):
    cells = "  ".join(f"{row[a][1]:>13.2f} ns" if row["count"] else f"{'-':>16}" for a in ALGORITHMS)
    print(f"{row['n']:<6}{cells}")

# per-point cost falls with n as the fixed call overhead is amortised
print("noop median ns/point:", np.median(table["noop"] / table["n"]))
