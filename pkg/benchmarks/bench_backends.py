"""Compare the numba kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_backends.py [--n 20000] [--steps 50]

Both implementations consume identical pre-drawn randoms, so besides
timing, the script verifies that the trajectories agree.
"""
import argparse
import time

import numpy as np

from hrsim import rng_stream
from hrsim import kernels
from hrsim.backend import HAVE_NUMBA


def _time(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_ergodic(n, steps):
    rng = rng_stream(0, 0)
    drift = np.array([0.1, 0.0, 0.0])
    state = {}
    for name in ("numpy", "numba"):
        pos = rng_stream(1, 0).uniform(-50, 50, (n, 3))
        vel = np.zeros((n, 3))
        state[name] = (pos, vel)
    draws = [(rng.random(n), rng.standard_normal((n, 3)), rng.random(n))
             for _ in range(steps)]

    def run(impl, pos, vel):
        for tu, g, ru in draws:
            impl(pos, vel, tu, g, ru, drift, 0.125, 1.0, 100.0)

    t_np = _time(lambda: run(kernels.ergodic_update_numpy, *state["numpy"]))
    t_nb = _time(lambda: run(kernels.ergodic_update_numba, *state["numba"]))
    agree = np.allclose(state["numpy"][0], state["numba"][0], atol=1e-12)
    return t_np, t_nb, agree


def bench_residual(n):
    rng = rng_stream(2, 0)
    wa = rng.uniform(0.05, 1.0, (n, 2))
    pa = rng.uniform(-3, 3, (n, 2))
    wb = rng.uniform(0.05, 1.0, (n, 2))
    pb = rng.uniform(-3, 3, (n, 2))
    t_np = _time(lambda: kernels.residual_matrix_numpy(wa, pa, wb, pb))
    t_nb = _time(lambda: kernels.residual_matrix_numba(wa, pa, wb, pb))
    agree = np.allclose(kernels.residual_matrix_numpy(wa, pa, wb, pb),
                        kernels.residual_matrix_numba(wa, pa, wb, pb),
                        atol=1e-12)
    return t_np, t_nb, agree


def bench_cross_hits(n):
    rng = rng_stream(3, 0)
    pa = rng.uniform(-100, 100, (n, 3))
    pb = rng.uniform(-100, 100, (n, 3))
    t_np = _time(lambda: kernels.cross_hits_numpy(pa, pb, 4.0))
    t_nb = _time(lambda: kernels.cross_hits_numba(pa, pb, 4.0))
    a = kernels.cross_hits_numpy(pa, pb, 4.0)
    b = kernels.cross_hits_numba(pa, pb, 4.0)
    agree = np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    return t_np, t_nb, agree


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=50)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rows = [
        ("ergodic_update", *bench_ergodic(args.n, args.steps)),
        ("residual_matrix", *bench_residual(min(args.n, 3000))),
        ("cross_hits", *bench_cross_hits(args.n)),
    ]
    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}"
          f"{'speedup':>10}{'agree':>8}")
    for name, t_np, t_nb, agree in rows:
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}"
              f"{t_np / t_nb:>10.2f}{str(agree):>8}")


if __name__ == "__main__":
    main()
