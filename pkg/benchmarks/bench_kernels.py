"""Compare the numba kernels with their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat N]

Prints the per-call time of each kernel on both backends and the time of a
full 30x30 solve.
"""
import argparse
import timeit

import numpy as np

from congestopt import Grid, SourceConfig, _accel, build_source, kernels, minimize, quadratic_pair
from congestopt import dilation as dl


def cases():
    e = quadratic_pair(1.0, 4.0, 0.06)
    rng = np.random.default_rng(0)
    u = rng.normal(scale=0.02, size=(129, 129))
    wx, wy = rng.normal(size=(2, 128, 128))
    mask = dl.random_union(0, 512).mask
    D = dl.distance_field(dl.RasterSet(mask, 1 / 512))
    F = np.pad(-D, 1, constant_values=-1e300)
    g = Grid(30, 30)
    f = build_source(g, SourceConfig(0.02))
    return {
        "dual_terms 128x128 (smoothed)": lambda: kernels.dual_terms(u, 1 / 128, 1 / 128, e.params, 1e-3, 0),
        "cell_gradient_adjoint 128x128": lambda: kernels.cell_gradient_adjoint(wx, wy, 1 / 128, 1 / 128),
        "distance_to_set 512x512": lambda: kernels.distance_to_set(mask, 1 / 512),
        "contour_length 512x512": lambda: kernels.contour_length(F, -0.05, 1 / 512, 1 / 512),
        "solve 30x30 (fig1b)": lambda: minimize(f, e),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        print("numba is not installed; only the numpy path can run")
    backends = [True, False] if _accel.NUMBA_AVAILABLE else [False]
    table = {}
    for name, fn in cases().items():
        for use in backends:
            _accel.USE_NUMBA = use
            fn()  # warm up, includes compilation
            n = 1 if name.startswith("solve") else args.repeat
            best = min(timeit.repeat(fn, number=1, repeat=n))
            table.setdefault(name, {})["numba" if use else "numpy"] = best
    print(f"{'kernel':34s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speed-up':>9s}")
    for name, row in table.items():
        nb, npy = row.get("numba"), row["numpy"]
        if nb is None:
            print(f"{name:34s} {'-':>12s} {1e3 * npy:12.2f}")
        else:
            print(f"{name:34s} {1e3 * nb:12.2f} {1e3 * npy:12.2f} {npy / nb:8.1f}x")


if __name__ == "__main__":
    main()
