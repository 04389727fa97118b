"""Monte Carlo reference for the well-separated frequency of slab samples.

A sample draws one uniform integer point from each of s = floor(beta^(i-1))
vertical slabs [ceil(h n / s), ceil((h+1) n / s)) x [0, n). A query is
well-separated when |dx|*|dy| >= n^2 / beta^(i - 1/2) against every other
query; the sample counts when at least half its queries are.

Usage: python3 well_separated_oracle.py [trials]
"""

import math
import sys

import numpy as np

CONFIGS = [
    # (n, beta, i)
    (440, 55 ** (1 / 3), 3),
    (1024, 2.0, 2),
    (1024, 3.0, 2),
    (1024, 4.0, 2),
    (4096, 64.0, 2),
    (4096, 256.0, 2),
]


def frequency(n, beta, i, trials, rng):
    s = math.floor(beta ** (i - 1) + 1e-9)
    threshold = n * n / beta ** (i - 0.5)
    lo = np.array([-(-h * n // s) for h in range(s)])
    hi = np.array([-(-(h + 1) * n // s) for h in range(s)])
    hits = 0
    fraction = 0.0
    for _ in range(trials):
        x = rng.integers(lo, hi)
        y = rng.integers(0, n, size=s)
        area = np.abs(x[:, None] - x[None, :]) * np.abs(y[:, None] - y[None, :])
        np.fill_diagonal(area, np.iinfo(np.int64).max)
        kept = np.all(area >= threshold, axis=1).sum()
        hits += 2 * kept >= s
        fraction += kept / s
    return hits / trials, fraction / trials, s, threshold


def main():
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20000
    rng = np.random.default_rng(20240611)
    for n, beta, i in CONFIGS:
        f, frac, s, t = frequency(n, beta, i, trials, rng)
        print(
            f"n={n} beta={beta:.6f} i={i} slabs={s} threshold={t:.3f} "
            f"trials={trials} flag_freq={f:.4f} mean_fraction={frac:.4f}"
        )


if __name__ == "__main__":
    main()
