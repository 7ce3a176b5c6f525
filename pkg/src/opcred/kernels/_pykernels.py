"""Vectorized numpy versions of the compiled kernels.

Same counters, same Poisson inversion and same left-to-right summation per
path as ``_ckernels``; only transcendental functions may differ in the last
ulp.
"""

import math

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
M1 = np.uint64(0xBF58476D1CE4E5B9)
M2 = np.uint64(0x94D049BB133111EB)
UNIT = 2.0**-53


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * M1
    z = (z ^ (z >> np.uint64(27))) * M2
    return z ^ (z >> np.uint64(31))


def _states(key, start, m):
    paths = np.arange(start + 1, start + m + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(key) + paths * GAMMA)


def _draw(states, index):
    if np.isscalar(index):
        index = np.uint64(index)
    else:
        index = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix64(states + (index + np.uint64(1)) * GAMMA)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * UNIT


def _poisson_inverse(u, rate):
    p0 = math.exp(-rate)
    n = np.zeros(u.shape, dtype=np.int64)
    p = np.full(u.shape, p0)
    cdf = p.copy()
    active = np.flatnonzero(u > cdf)
    while active.size:
        n[active] += 1
        p[active] = p[active] * rate / n[active]
        cdf[active] += p[active]
        keep = (u[active] > cdf[active]) & (p[active] != 0.0)
        active = active[keep]
    return n


def _counts(states, chunks, chunk_rate):
    n = np.zeros(states.shape, dtype=np.int64)
    if chunk_rate > 0:
        for c in range(chunks):
            n += _poisson_inverse(_draw(states, c), chunk_rate)
    return n


def pareto_compound(key, start, chunks, chunk_rate, threshold, tail, out, counts):
    m = out.shape[0]
    states = _states(key, start, m)
    n = _counts(states, chunks, chunk_rate)
    inv = -1.0 / tail
    s = np.zeros(m)
    k = 0
    active = np.flatnonzero(n > k)
    while active.size:
        u = _draw(states[active], chunks + k)
        s[active] += threshold * np.power(u, inv)
        k += 1
        active = active[n[active] > k]
    out[:] = s
    counts[:] = n


def compound_counts(key, start, chunks, chunk_rate, counts):
    counts[:] = _counts(_states(key, start, counts.shape[0]), chunks, chunk_rate)


def severity_uniforms(key, start, chunks, counts, out):
    m = counts.shape[0]
    total = int(counts.sum())
    if total == 0:
        return
    states = _states(key, start, m)
    owner = np.repeat(np.arange(m), counts)
    offsets = np.cumsum(counts) - counts
    index = np.arange(total, dtype=np.int64) - np.repeat(offsets, counts) + chunks
    out[:total] = _draw(states[owner], index)


def segment_sums(counts, values, out):
    m = counts.shape[0]
    owner = np.repeat(np.arange(m), counts)
    out[:] = np.bincount(owner, weights=values[: owner.size], minlength=m)
