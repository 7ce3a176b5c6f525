# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled compound-Poisson kernels.

Must stay draw-for-draw identical to ``_pykernels``: same counter layout,
same Poisson inversion, same summation order.
"""

from libc.math cimport exp, pow
from libc.stdint cimport int64_t, uint64_t

cdef uint64_t GAMMA = 0x9E3779B97F4A7C15ULL
cdef double UNIT = 1.1102230246251565e-16  # 2**-53


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double draw(uint64_t state, uint64_t index) noexcept nogil:
    return (<double>(mix64(state + (index + 1) * GAMMA) >> 11) + 0.5) * UNIT


cdef inline int64_t poisson_inverse(double u, double rate, double p0) noexcept nogil:
    cdef double p = p0
    cdef double cdf = p0
    cdef int64_t n = 0
    while u > cdf:
        n += 1
        p = p * rate / n
        cdf += p
        if p == 0.0:
            break
    return n


cdef inline int64_t path_count(uint64_t state, int64_t chunks, double rate, double p0) noexcept nogil:
    cdef int64_t c, n = 0
    for c in range(chunks):
        n += poisson_inverse(draw(state, c), rate, p0)
    return n


def pareto_compound(uint64_t key, int64_t start, int64_t chunks, double chunk_rate,
                    double threshold, double tail, double[::1] out, int64_t[::1] counts):
    """Annual sums of Pareto severities for paths ``start .. start + len(out)``."""
    cdef int64_t i, k, n
    cdef int64_t m = out.shape[0]
    cdef uint64_t state
    cdef double s, inv = -1.0 / tail
    cdef double p0 = exp(-chunk_rate)
    with nogil:
        for i in range(m):
            state = mix64(key + <uint64_t>(start + i + 1) * GAMMA)
            n = path_count(state, chunks, chunk_rate, p0) if chunk_rate > 0 else 0
            s = 0.0
            for k in range(n):
                s += threshold * pow(draw(state, chunks + k), inv)
            out[i] = s
            counts[i] = n


def compound_counts(uint64_t key, int64_t start, int64_t chunks, double chunk_rate, int64_t[::1] counts):
    """Per-path event counts only."""
    cdef int64_t i
    cdef int64_t m = counts.shape[0]
    cdef uint64_t state
    cdef double p0 = exp(-chunk_rate)
    with nogil:
        for i in range(m):
            state = mix64(key + <uint64_t>(start + i + 1) * GAMMA)
            counts[i] = path_count(state, chunks, chunk_rate, p0) if chunk_rate > 0 else 0


def severity_uniforms(uint64_t key, int64_t start, int64_t chunks, int64_t[::1] counts, double[::1] out):
    """Flat severity uniforms, path by path, for externally transformed laws."""
    cdef int64_t i, k, pos = 0
    cdef int64_t m = counts.shape[0]
    cdef uint64_t state
    with nogil:
        for i in range(m):
            state = mix64(key + <uint64_t>(start + i + 1) * GAMMA)
            for k in range(counts[i]):
                out[pos] = draw(state, chunks + k)
                pos += 1


def segment_sums(int64_t[::1] counts, double[::1] values, double[::1] out):
    """``out[i]`` = sum of the ``counts[i]`` consecutive values of path ``i``."""
    cdef int64_t i, k, pos = 0
    cdef int64_t m = counts.shape[0]
    cdef double s
    with nogil:
        for i in range(m):
            s = 0.0
            for k in range(counts[i]):
                s += values[pos]
                pos += 1
            out[i] = s
