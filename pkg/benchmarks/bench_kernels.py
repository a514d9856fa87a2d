"""Time the compiled kernels against the numpy fallback on identical inputs.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from jlmedoids import _backend
from jlmedoids.geometry import distance_matrix
from jlmedoids.instances import gen_doubling


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases():
    rng = np.random.default_rng(0)
    X = gen_doubling(2000, 2, seed=0).P.points
    yield "greedy_net n=2000", lambda: _backend.greedy_net(X, 0.5)
    Y = gen_doubling(300, 2, seed=1).P.points
    D = distance_matrix(Y, Y)
    centers = np.repeat(np.arange(0, 300, 10), 8)
    radii = np.tile(np.geomspace(0.5, 20, 8), 30)
    yield "cover_sizes n=300 q=240", lambda: _backend.cover_sizes(D, centers, radii)
    M = rng.random((256, 60))
    w = rng.integers(1, 5, 256).astype(np.float64)
    yield "subset_costs n=256 s=60 k=3", lambda: _backend.subset_costs(M, w, 3)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = sorted(_backend.BACKENDS)
    if "cython" not in names:
        print("compiled extension not built; only the python backend is available")
    prev = _backend.NAME
    print(f"{'kernel':<30}" + "".join(f"{n:>12}" for n in names) + f"{'speedup':>10}")
    try:
        for label, fn in cases():
            times, outs = {}, {}
            for n in names:
                _backend.use(n)
                times[n], outs[n] = best_of(fn, args.repeat)
            ref = outs[names[0]]
            for n in names[1:]:
                # sums may differ in the last ulps (BLAS dot vs a sequential loop)
                assert np.allclose(outs[n], ref, rtol=1e-12, atol=0), f"{label}: backends disagree"
            speed = times["python"] / times["cython"] if "cython" in times else float("nan")
            print(f"{label:<30}" + "".join(f"{times[n] * 1e3:>10.2f}ms" for n in names) + f"{speed:>9.1f}x")
    finally:
        _backend.use(prev)


if __name__ == "__main__":
    main()
