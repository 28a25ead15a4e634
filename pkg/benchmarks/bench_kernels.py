"""Time the numba kernels against their pure-numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]

Both backends are imported side by side, so no environment flag is needed
here; ``CUEPAIR_PURE_NUMPY=1`` only changes which one the package uses.
"""
import argparse
import time

import numpy as np

from cuepair.kernels import numba_backend as nb, numpy_backend as npb


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))


def best_of(fn, repeat):
    fn()  # warm-up (compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(quick):
    n_dpp = 32 if quick else 128
    n_mc = 16 if quick else 64
    angles = rng(1).random(64) * 2 * np.pi
    c = np.r_[0.0, 1.0 / np.arange(1, 4097) ** 1.5]
    theta0 = (2 * np.pi * np.arange(n_mc) / n_mc + 0.1) % (2 * np.pi)
    return [
        (f"cue_dpp N={n_dpp}", lambda be: be.cue_dpp(n_dpp, rng(2), 10**6, 1e-12)),
        (f"cbe_mcmc_run N={n_mc} x 20 sweeps", lambda be: be.cbe_mcmc_run(theta0.copy(), 2.0, 0.3, 20, rng(3), False)),
        ("power_traces N=64 K=4096", lambda be: be.power_traces(angles, 4096)),
        ("pair_sum_direct N=64 K=256", lambda be: be.pair_sum_direct(angles, c[:257])),
        ("variance_terms N=512 K=4096", lambda be: be.variance_terms(c, 512)),
        ("limit_law_draws K=128 x 2000", lambda be: be.limit_law_draws(c[1:129], 2000, rng(4))),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions per case (best is reported)")
    ap.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = ap.parse_args()
    print(f"{'kernel':38s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speed-up':>9s}")
    for name, call in cases(args.quick):
        t_nb = best_of(lambda: call(nb), args.repeat)
        t_np = best_of(lambda: call(npb), args.repeat)
        print(f"{name:38s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
