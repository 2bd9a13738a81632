#!/usr/bin/env python3
"""Timing comparison of the compiled core against the numpy fallback.

Runs each hot kernel on representative desk-scale workloads and prints a
table with the speedup.  Invoke from the repo root:

    python benchmarks/bench_backends.py
"""

import time

import numpy as np

from fbreg._kernels import _core_py

try:
    from fbreg._kernels import _core
except ImportError:
    _core = None


def timeit(fn, *args, repeat=3, **kw):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_psor(impl, n=512, sweeps=50):
    rng = np.random.default_rng(0)
    off = -np.abs(rng.normal(size=(n, n)))
    np.fill_diagonal(off, 0.0)
    a = off.copy()
    np.fill_diagonal(a, np.abs(off).sum(axis=1) + 1.0)
    b = rng.normal(size=n)
    lower = rng.normal(size=n)

    def run():
        u = np.maximum(lower, 0.0).copy()
        for k in range(sweeps):
            impl.psor_sweep(a, b, lower, u, 1.5, bool(k % 2))
        return u

    return timeit(run)


def bench_stencil_1d(impl, n=512, m=1024):
    rng = np.random.default_rng(1)
    padded = rng.normal(size=n + 2 * (m + 1))
    w_even = rng.uniform(0.1, 1.0, size=m)
    w_odd = np.zeros(m)

    def run():
        return impl.stencil_apply_1d(padded, w_even, w_odd, n, m + 1)

    return timeit(run)


def bench_stencil_2d(impl, n=64, p=64):
    rng = np.random.default_rng(2)
    padded = rng.normal(size=(n + 2 * (p + 1), n + 2 * (p + 1)))
    i, j = np.meshgrid(np.arange(-p, p + 1), np.arange(-p, p + 1), indexing="ij")
    half = (j > 0) | ((j == 0) & (i > 0))
    offsets = np.stack([i[half], j[half]], axis=1).astype(np.int64)
    w_even = rng.uniform(0.0, 1.0, size=len(offsets))
    w_odd = np.zeros(len(offsets))

    def run():
        return impl.stencil_apply_2d(padded, offsets, w_even, w_odd, n, n, p + 1, p + 1)

    return timeit(run)


def bench_allpairs(impl, m=4000):
    rng = np.random.default_rng(3)
    w = rng.normal(size=m)
    space = rng.normal(size=(m, 2))
    tvals = rng.normal(size=m)

    def run():
        return impl.allpairs_max_ratio(w, space, tvals, 0.5, 0.5)

    return timeit(run, repeat=2)


BENCHES = [
    ("psor 512x512 x50 sweeps", bench_psor),
    ("stencil 1d n=512 m=1024", bench_stencil_1d),
    ("stencil 2d 64^2, 129^2 lattice", bench_stencil_2d),
    ("all-pairs seminorm m=4000", bench_allpairs),
]


def main():
    if _core is None:
        print("compiled core unavailable; timing the fallback only")
    rows = []
    for name, bench in BENCHES:
        t_py, out_py = bench(_core_py)
        if _core is not None:
            t_c, out_c = bench(_core)
            if isinstance(out_py, np.ndarray):
                assert np.allclose(out_py, out_c, atol=1e-10)
            rows.append((name, t_py, t_c, t_py / t_c))
        else:
            rows.append((name, t_py, float("nan"), float("nan")))
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'python':>10}  {'compiled':>10}  {'speedup':>8}")
    for name, t_py, t_c, sp in rows:
        print(f"{name:<{width}}  {t_py:>9.4f}s  {t_c:>9.4f}s  {sp:>7.1f}x")


if __name__ == "__main__":
    main()
