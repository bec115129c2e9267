"""Time the numba kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--n 2000] [--k-max 10] [--repeat 3]

Each row reports the best of ``--repeat`` runs after one warm-up call (the
warm-up also pays the JIT compile), plus the largest difference between the
two backends' outputs.
"""

import argparse
import time

import numpy as np

from nmlclust._accel import HAVE_NUMBA
from nmlclust.complexity import c2_table, log_J_vector
from nmlclust.harness import generate_gmm_data, generate_true_model
from nmlclust.selection import EMConfig, restart_rng, run_em


def best_of(fn, repeat):
    out = fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def finite_gap(a, b):
    a, b = np.asarray(a), np.asarray(b)
    mask = np.isfinite(a) & np.isfinite(b)
    if not np.array_equal(np.isfinite(a), np.isfinite(b)):
        return float("inf")
    return float(np.max(np.abs(a[mask] - b[mask]), initial=0.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--k-max", type=int, default=10)
    ap.add_argument("--m", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; only the numpy path can run")
        return

    log_j = log_J_vector(args.n, args.m)
    model = generate_true_model(args.m, 3, 4.0, 0)
    x, _ = generate_gmm_data(model, args.n, 1)
    mu0 = x[restart_rng(0, 3, 0).choice(args.n, size=3, replace=False)]
    cfg = EMConfig(seed=0, tol=1e-10, max_iter=200)

    cases = [
        (f"C2 table n={args.n} K<={args.k_max}", lambda fast: c2_table(args.k_max, args.n, log_j, use_numba=fast)),
        (f"EM n={args.n} m={args.m} K=3", lambda fast: run_em(x, mu0, cfg, use_numba=fast).log_likelihoods),
    ]
    print(f"{'kernel':<28}{'numba s':>12}{'numpy s':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases:
        t_fast, a = best_of(lambda: fn(True), args.repeat)
        t_slow, b = best_of(lambda: fn(False), args.repeat)
        print(f"{name:<28}{t_fast:>12.4f}{t_slow:>12.4f}{t_slow / t_fast:>10.1f}{finite_gap(a, b):>12.2e}")


if __name__ == "__main__":
    main()
