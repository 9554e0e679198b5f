"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the pairwise SVM dual solver and the t-SNE gradient step at a few
problem sizes with both implementations and prints a speedup table.
The two backends follow the same optimization path, so iteration counts
are asserted equal before timing is reported.

Usage: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from embprobe import _kernels_py
from embprobe.svm import rbf_matrix

try:
    from embprobe import _kernels_c
except ImportError:
    _kernels_c = None


def svm_problem(n, seed):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0.8, 1.0, (n // 2, 16)),
                   rng.normal(-0.8, 1.0, (n - n // 2, 16))])
    y = np.where(np.arange(n) < n // 2, 1.0, -1.0)
    return rbf_matrix(X, X, 0.05), y


def tsne_problem(n, seed):
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((n, 2))
    P = rng.uniform(0.0, 1.0, (n, n))
    np.fill_diagonal(P, 0.0)
    P = (P + P.T) / (2.0 * P.sum())
    return Y, P


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    if _kernels_c is None:
        print("compiled backend not built; showing python timings only")
    rows = []

    for n in (50, 150, 400):
        K, y = svm_problem(n, seed=n)
        t_py, (a_py, _, it_py, _) = timeit(
            lambda: _kernels_py.smo_solve(K, y, 10.0, 1e-4, 1_000_000))
        if _kernels_c is not None:
            t_c, (a_c, _, it_c, _) = timeit(
                lambda: _kernels_c.smo_solve(K, y, 10.0, 1e-4, 1_000_000))
            assert it_py == it_c, "backends diverged"
            assert np.array_equal(np.asarray(a_py), np.asarray(a_c))
        else:
            t_c = float("nan")
        rows.append((f"smo_solve n={n} ({it_py} iters)", t_py, t_c))

    for n in (100, 300, 800):
        Y, P = tsne_problem(n, seed=n)
        t_py, (g_py, kl_py) = timeit(lambda: _kernels_py.tsne_step(Y, P))
        if _kernels_c is not None:
            t_c, (g_c, kl_c) = timeit(lambda: _kernels_c.tsne_step(Y, P))
            assert abs(kl_py - kl_c) < 1e-10
        else:
            t_c = float("nan")
        rows.append((f"tsne_step n={n}", t_py, t_c))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, t_py, t_c in rows:
        speed = f"{t_py / t_c:7.2f}x" if t_c == t_c else "     n/a"
        print(f"{name:<{width}}  {t_py * 1e3:9.2f}ms  {t_c * 1e3:9.2f}ms  {speed}")


if __name__ == "__main__":
    main()
