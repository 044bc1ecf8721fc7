"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--rows 65536] [--dim 640] [--k 100] [--repeat 5]
"""

import argparse
import time

import numpy as np

from tcpr import kernels


def best_of(fn, repeat):
    fn()  # warm-up
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best * 1000


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=65536)
    parser.add_argument("--dim", type=int, default=640)
    parser.add_argument("--k", type=int, default=100)
    parser.add_argument("--tasks", type=int, default=10000)
    parser.add_argument("--queries", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    feats = rng.standard_normal((args.rows, args.dim), dtype=np.float32)
    inv = 1.0 / np.linalg.norm(feats.astype(np.float64), axis=1)
    probe = rng.standard_normal(args.dim)
    probe /= np.linalg.norm(probe)
    protos = rng.standard_normal((args.tasks, 2, 2))
    queries = rng.standard_normal((args.tasks, 2, args.queries, 2))

    results = {}
    for name, impl in sorted(kernels.BACKENDS.items()):
        results[name] = (
            best_of(lambda: impl.topk_cosine(feats, inv, probe, args.k), args.repeat),
            best_of(lambda: impl.ncc_accuracy(protos, queries), args.repeat),
        )

    print(f"active backend: {kernels.BACKEND}")
    print(f"{'backend':<8} {'topk_cosine ms':>15} {'ncc_accuracy ms':>16}")
    for name, (topk_ms, ncc_ms) in results.items():
        print(f"{name:<8} {topk_ms:>15.2f} {ncc_ms:>16.2f}")
    if len(results) == 2:
        (pt, pn), (ct, cn) = results["python"], results["cython"]
        print(f"speedup  {pt / ct:>14.2f}x {pn / cn:>15.2f}x")

    # both backends must agree on what they return
    if len(results) == 2:
        a = kernels.BACKENDS["python"].topk_cosine(feats, inv, probe, args.k)
        b = kernels.BACKENDS["cython"].topk_cosine(feats, inv, probe, args.k)
        assert np.array_equal(a[0], b[0]), "top-k indices differ between backends"


if __name__ == "__main__":
    main()
