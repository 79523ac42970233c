"""Time the numba and numpy paths of every kernel on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import time

import numpy as np

from ifshadow import _kernels
from ifshadow.ifs_core import CircleAffine, IFSystem, ShiftMap
from ifshadow.shadowing.checks import _prefixes, _step_images
from ifshadow.shadowing.solver import pullback_radii
from ifshadow.spaces import TAU, BinaryShift, Circle


def doubling():
    return IFSystem(Circle(), (CircleAffine(2, 0.0), CircleAffine(2, 1 / 3)))


def pullback_case(rng):
    sys_ = doubling()
    a, b = sys_.affine_params()
    R, n, delta = 1000, 200, 1e-3
    syms = rng.integers(0, 2, size=(R, n - 1))
    xs = np.empty((R, n))
    xs[:, 0] = rng.random(R)
    for k in range(n - 1):
        xs[:, k + 1] = (a[syms[:, k]] * xs[:, k] + b[syms[:, k]] + rng.uniform(-delta, delta, R)) % 1.0
    radii = pullback_radii(n, delta, 2.0)
    return lambda backend: _kernels.circle_pullback(xs, syms, a, b, radii, TAU, backend)


def oracle_case(rng):
    sys_ = doubling()
    a, b = sys_.affine_params()
    n = 20
    syms = rng.integers(0, 2, size=n - 1)
    xs = np.empty(n)
    xs[0] = rng.random()
    for k in range(n - 1):
        xs[k + 1] = (a[syms[k]] * xs[k] + b[syms[k]]) % 1.0
    grid = Circle().grid(100_000)
    return lambda backend: _kernels.circle_cell_oracle(grid.points, grid.resolution, xs, syms, a, b, 4e-3, TAU, backend)


def survival_case(rng):
    sys_ = doubling()
    a, b = sys_.affine_params()
    x = rng.random(10_000)
    y = (x + np.exp(rng.uniform(np.log(0.2) - 20 * np.log(2), np.log(0.2), 10_000))) % 1.0
    pref = _prefixes(2, 4, False)
    return lambda backend: _kernels.circle_pair_survival(x, y, pref, a, b, 0.2, 40, False, backend)


def pair_step_case(rng):
    sys_ = IFSystem(BinaryShift(5), (ShiftMap(False), ShiftMap(True)))
    imgs = np.array(_step_images(sys_, False))
    idx = np.arange(sys_.space.size)
    S = sys_.space.distance_array(idx[:, None], idx[None, :]) <= 0.5
    return lambda backend: _kernels.pair_step(S, imgs, imgs, backend)


CASES = {
    "pullback 1000x200": pullback_case,
    "cell oracle 1e5 x 20": oracle_case,
    "pair survival 1e4 x 16 x 40": survival_case,
    "pair step W=5": pair_step_case,
}


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        print("numba is not importable; only the numpy path can be timed")
    print(f"{'kernel':32s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for name, make in CASES.items():
        run = make(np.random.default_rng(args.seed))
        run("numba")  # compile (or load from cache) outside the timing
        t_nb = best_of(lambda: run("numba"), args.repeat)
        t_np = best_of(lambda: run("numpy"), args.repeat)
        print(f"{name:32s} {t_nb:10.4f} {t_np:10.4f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
