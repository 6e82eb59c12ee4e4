"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from protoshot._kernels import IMPLS


def timeit(fn, args, repeat):
    fn(*args)  # warm (jit compile on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=7)
    args = parser.parse_args()

    rs = np.random.RandomState(0)
    queries = rs.randn(300, 256)
    protos = rs.randn(5, 256)
    points = rs.randn(600, 256)
    labels = rs.randint(0, 5, 600).astype(np.int64)
    logits = rs.randn(300, 5)
    img = rs.rand(512, 512)
    out = np.empty(1_000_000)

    cases = [
        ("fill_uniform (1e6 draws)", "fill_uniform", (1, 2, 3, 4, out)),
        ("pairwise_sq_dists (300x5, dim 256)", "pairwise_sq_dists", (queries, protos)),
        ("class_means (600 pts, 5 classes)", "class_means", (points, labels, 5)),
        ("log_softmax_rows (300x5)", "log_softmax_rows", (logits,)),
        ("bilinear_resize (512 -> 224)", "bilinear_resize", (img, 224, 224)),
        ("rotate_bilinear (512x512)", "rotate_bilinear", (img, 0.17)),
    ]

    if "numba" not in IMPLS:
        print("numba not importable; nothing to compare")
        return

    print(f"{'kernel':<38}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    print("-" * 72)
    for label, name, call_args in cases:
        t_np = timeit(IMPLS["numpy"][name], call_args, args.repeat)
        t_nb = timeit(IMPLS["numba"][name], call_args, args.repeat)
        print(f"{label:<38}{t_np * 1e3:>10.3f}ms{t_nb * 1e3:>10.3f}ms{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
