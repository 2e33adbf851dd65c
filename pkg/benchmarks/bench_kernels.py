"""Compare the numba and pure-numpy hot kernels.

Run with ``python3 benchmarks/bench_kernels.py``. Each kernel is warmed up once
(so numba compilation is excluded), then timed as the best of several repeats.
Outputs of both backends are checked for agreement before timing.
"""
import argparse
import math
import timeit

import numpy as np

from mzapprox import kernels


def _sphere_points(count, rng):
    x = rng.standard_normal((count, 3))
    return x / np.linalg.norm(x, axis=1)[:, None]


def _best(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def cases(rng):
    pts = _sphere_points(20_000, rng)
    yield ("real_sph_harm L=32, 20k points",
           lambda: kernels.real_sph_harm_numba(pts, 32),
           lambda: kernels.real_sph_harm_numpy(pts, 32),
           lambda a, b: float(np.max(np.abs(a - b))))
    cands = rng.random((200_000, 1))
    yield ("greedy torus1 eps=1e-4, 200k candidates",
           lambda: kernels.greedy_separated_torus_numba(cands, 1e-4),
           lambda: kernels.greedy_separated_torus_numpy(cands, 1e-4),
           lambda a, b: float(np.sum(a != b)))
    cands2 = rng.random((200_000, 2))
    yield ("greedy torus2 eps=0.01, 200k candidates",
           lambda: kernels.greedy_separated_torus_numba(cands2, 0.01),
           lambda: kernels.greedy_separated_torus_numpy(cands2, 0.01),
           lambda a, b: float(np.sum(a != b)))
    sph = _sphere_points(300_000, rng)
    eps = 0.6 / math.sqrt(32 * 33)
    yield (f"greedy sphere2 eps={eps:.4f}, 300k candidates",
           lambda: kernels.greedy_separated_sphere_numba(sph, eps),
           lambda: kernels.greedy_separated_sphere_numpy(sph, eps),
           lambda a, b: float(np.sum(a != b)))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':45s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s} {'mismatch':>9s}")
    for name, fast, slow, diff in cases(rng):
        mismatch = diff(fast(), slow())
        tf = _best(fast, args.repeat)
        ts = _best(slow, args.repeat)
        print(f"{name:45s} {tf:10.4f} {ts:10.4f} {ts / tf:8.1f} {mismatch:9.2g}")


if __name__ == "__main__":
    main()
