"""Timing of the count kernels: compiled extension versus the numpy fallback."""
import time

import numpy as np

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _inputs(n, k, seed):
    gen = np.random.default_rng(seed)
    counts = gen.poisson(3.0, n).astype(np.int64)
    conc = gen.gamma(1.0, 1.0, n)
    rates = gen.uniform(0.01, 20.0, n)
    weights = np.ascontiguousarray(gen.gamma(0.5, 1.0, (n, k)))
    return {
        "crt_counts": (counts, conc, gen.random(int(counts.sum()))),
        "ztp_inversion": (rates, gen.random(n), 10_000),
        "partition_counts": (counts, weights, gen.random(int(counts.sum()))),
    }


def _best_of(fn, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def run(n=200_000, k=20, repeats=5, seed=0):
    """Return one row per kernel with the best wall time of each backend and their agreement."""
    rows = []
    for name, args in _inputs(n, k, seed).items():
        py_fn = getattr(_kernels_py, name)
        row = {"kernel": name, "n": n, "python_s": _best_of(py_fn, args, repeats)}
        if _kernels_c is not None:
            c_fn = getattr(_kernels_c, name)
            row["cython_s"] = _best_of(c_fn, args, repeats)
            row["speedup"] = row["python_s"] / row["cython_s"]
            row["identical"] = bool(np.array_equal(py_fn(*args), c_fn(*args)))
        rows.append(row)
    return rows


def format_rows(rows):
    lines = [f"{'kernel':<18}{'n':>9}{'python s':>11}{'cython s':>11}{'speedup':>9}  same"]
    for r in rows:
        c = f"{r['cython_s']:>11.4f}{r['speedup']:>9.1f}  {r['identical']}" if "cython_s" in r else f"{'-':>11}{'-':>9}  -"
        lines.append(f"{r['kernel']:<18}{r['n']:>9}{r['python_s']:>11.4f}{c}")
    return "\n".join(lines)
