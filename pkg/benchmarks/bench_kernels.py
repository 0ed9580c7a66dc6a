"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N] [--scale K]

Sizes default to the run grid (1024 time x 512 depth samples); ``--scale``
multiplies both. The first numba call (compilation) is excluded.
"""
import argparse
import timeit

import numpy as np

from ramanmem import kernels
from ramanmem._accel import HAVE_NUMBA


def cases(n_t, n_z):
    rng = np.random.default_rng(0)
    omega = np.sort(rng.uniform(0, 1, n_t))
    z = np.linspace(0, 1, n_z)
    v = rng.normal(size=n_t) + 1j * rng.normal(size=n_t)
    edge = rng.normal(size=n_z // 4 + 1) + 0j
    return {
        "bessel_matrix": (z, omega, 2.0),
        "bessel_matvec": (z, omega, 2.0, v),
        "volterra": (omega, 2.0, v, 1.0 / n_t),
        "cn_march": (edge, 2.0, n_z // 4 + 1, False),
        "rk4_march": (edge, 2.0, n_z // 4 + 1, False),
    }


def best_of(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=int, default=1)
    args = ap.parse_args(argv)
    n_t, n_z = 1024 * args.scale, 512 * args.scale

    print(f"grid {n_t} x {n_z}, best of {args.repeat}")
    print(f"{'kernel':<15}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, kargs in cases(n_t, n_z).items():
        fast, slow = kernels.IMPLEMENTATIONS[name]
        t_np = best_of(slow, kargs, args.repeat)
        if HAVE_NUMBA:
            fast(*kargs)  # compile
            t_nb = best_of(fast, kargs, args.repeat)
            print(f"{name:<15}{t_np * 1e3:>12.2f}{t_nb * 1e3:>12.2f}{t_np / t_nb:>9.1f}x")
        else:
            print(f"{name:<15}{t_np * 1e3:>12.2f}{'n/a':>12}{'':>10}")


if __name__ == "__main__":
    main()
