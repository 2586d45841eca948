"""Time each inner-loop kernel under the numpy and numba backends.

Usage::

    python benchmarks/bench_kernels.py [--n 20000] [--l 512] [--rank 5] [--c 1000] [--repeat 7]

Also times one full-sample FPCA and one pilot-driven randomized FPCA with
whichever backend is active, since those totals are dominated by BLAS.
"""
from __future__ import annotations

import argparse
import time
import warnings

import numpy as np

from funss import _kernels
from funss.fda import center
from funss.rfpca import fpca_full, fpca_randomized
from funss.sampling import estimate_funprinss, prob_impo
from funss.simgen import SimDesign, synth_dataset


def best_of(fn, repeat: int) -> float:
    fn()  # warm-up also triggers JIT compilation
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--l", type=int, default=512)
    ap.add_argument("--rank", type=int, default=5)
    ap.add_argument("--c", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1, help="BLAS threads (needs threadpoolctl)")
    args = ap.parse_args(argv)

    data = center(synth_dataset(SimDesign("ed", "nu", N=args.n, L=args.l, seed=0)))
    xw = data.whitened
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.standard_normal((args.l, args.rank)))[0]
    p = prob_impo(data).probs
    u = rng.random((2, args.c))
    idx = rng.integers(0, args.n, args.c)
    scale = rng.random(args.c)

    backends = [b for b in (_kernels.NUMPY, _kernels.NUMBA) if b is not None]
    cases = {
        "alias_build": lambda b: b.alias_build(p),
        "alias_lookup": lambda b, t=_kernels.NUMPY.alias_build(p): b.alias_lookup(*t, *u),
        "project": lambda b: b.project(xw, basis),
        "gather_scaled": lambda b: b.gather_scaled(xw, idx, scale),
    }
    print(f"N={args.n} L={args.l} R={args.rank} C={args.c}; active backend: {_kernels.BACKEND}")
    print(f"{'kernel':16s}" + "".join(f"{b.name:>12s}" for b in backends) + "     speed-up")
    for name, fn in cases.items():
        times = [best_of(lambda b=b: fn(b), args.repeat) for b in backends]
        ratio = f"{times[0] / times[1]:10.2f}x" if len(times) == 2 else ""
        print(f"{name:16s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times) + ratio)

    def randomized():
        dist = estimate_funprinss(data, args.c, args.rank, 0.5, 1)
        fpca_randomized(data, dist, args.c, args.rank, 2)

    try:
        from threadpoolctl import threadpool_limits
        limit = threadpool_limits(args.threads)
    except ImportError:
        limit = None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        t_full = best_of(lambda: fpca_full(data, args.rank), args.repeat)
        t_rand = best_of(randomized, args.repeat)
    if limit is not None:
        limit.restore_original_limits()
    print(f"\nfull FPCA            {t_full * 1e3:10.1f}ms")
    print(f"randomized + pilot   {t_rand * 1e3:10.1f}ms   ({t_full / t_rand:.1f}x)")


if __name__ == "__main__":
    main()
