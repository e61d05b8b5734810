"""Compare the numba and pure-numpy kernels.

    python benchmarks/bench_kernels.py [--repeat 5]

The numba timings exclude the first (compiling) call.  Results from both
backends are checked for agreement before timing is reported.
"""

import argparse
import time

import numpy as np

from collabtwin import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bfs_case(n, m, seed=0):
    rng = np.random.default_rng(seed)
    src = rng.integers(0, n, m)
    dst = rng.integers(0, n, m)
    indptr, indices = _kernels.to_csr(n, src, dst)
    return lambda b: _kernels.bfs_all(indptr, indices, n, backend=b)


def support_case(n_tx, n_items, n_cands, k, seed=0):
    rng = np.random.default_rng(seed)
    tx = (rng.random((n_tx, n_items)) < 0.3).astype(np.uint8)
    cands = np.sort(np.array([rng.choice(n_items, k, replace=False) for _ in range(n_cands)]), axis=1)
    return lambda b: _kernels.count_supports(tx, cands, backend=b)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    cases = [
        ("bfs_all n=226 m=2000", bfs_case(226, 2000)),
        ("bfs_all n=1000 m=8000", bfs_case(1000, 8000)),
        ("count_supports 7250x300 c=2000 k=2", support_case(7250, 300, 2000, 2)),
        ("count_supports 7250x300 c=2000 k=4", support_case(7250, 300, 2000, 4)),
    ]
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    if len(backends) == 1:
        print("numba not installed; timing the numpy backend only")
    print(f"{'case':40s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, run in cases:
        outputs = {b: run(b) for b in backends}  # also warms the jit
        if len(backends) > 1:
            a, b = outputs["numpy"], outputs["numba"]
            if isinstance(a, tuple):
                assert np.array_equal(a[0], b[0]) and np.allclose(a[1], b[1], rtol=0, atol=1e-9), name
            else:
                assert np.array_equal(a, b), name
        t = {b: best_of(lambda: run(b), args.repeat) for b in backends}
        line = f"{name:40s}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{t['numpy'] / t['numba']:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
