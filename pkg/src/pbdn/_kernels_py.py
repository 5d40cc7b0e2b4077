"""Numpy implementations of the count kernels.

Arithmetic is kept elementwise-identical to the compiled versions so both
backends return the same integers for the same uniforms.
"""
import numpy as np


def crt_counts(counts, conc, uniforms):
    counts = np.asarray(counts, dtype=np.int64)
    conc = np.asarray(conc, dtype=np.float64)
    n = counts.shape[0]
    total = int(counts.sum())
    if total == 0:
        return np.zeros(n, dtype=np.int64)
    rows = np.repeat(np.arange(n), counts)
    starts = np.cumsum(counts) - counts
    seat = np.arange(total, dtype=np.int64) - np.repeat(starts, counts)
    c = conc[rows]
    hits = uniforms[:total] < c / (c + seat.astype(np.float64))
    return np.bincount(rows, weights=hits, minlength=n).astype(np.int64)


def ztp_inversion(rates, uniforms, max_steps):
    lam = np.asarray(rates, dtype=np.float64)
    u = np.asarray(uniforms, dtype=np.float64)
    out = np.ones(lam.shape[0], dtype=np.int64)
    p = lam / np.expm1(lam)
    cum = p.copy()
    active = np.flatnonzero(u >= cum)
    k = 1
    while active.size and k < max_steps:
        k += 1
        p[active] = p[active] * lam[active] / float(k)
        cum[active] = cum[active] + p[active]
        out[active] = k
        active = active[u[active] >= cum[active]]
    return out


def partition_counts(totals, weights, uniforms):
    totals = np.asarray(totals, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n, K = weights.shape
    out = np.zeros((n, K), dtype=np.int64)
    total = int(totals.sum())
    if total == 0:
        return out
    cw = np.cumsum(weights, axis=1)
    positive = weights > 0
    last = np.where(positive.any(axis=1), K - 1 - np.argmax(positive[:, ::-1], axis=1), 0)
    rows = np.repeat(np.arange(n), totals)
    target = uniforms[:total] * cw[rows, K - 1]
    k = (cw[rows] <= target[:, None]).sum(axis=1)
    overflow = k >= K
    k[overflow] = last[rows[overflow]]
    np.add.at(out, (rows, k), 1)
    return out
