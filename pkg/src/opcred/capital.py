"""Monte Carlo annual-loss distribution and 0.999 VaR.

Each cell's annual loss is a compound Poisson sum of Pareto severities above
the threshold, optionally plus an independent compound sum of losses below
it. Cells are independent and the bank loss is their sum.

Random numbers come from counter-based streams: the draws of path ``i`` of
cell ``j`` depend only on ``(seed, j, i)``. Results are therefore identical
for any block size or number of worker threads, and two runs that differ
only in one cell's rate share every other draw (common random numbers).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Protocol

import numpy as np
from scipy import special, stats

from . import kernels
from .errors import ConfigError, DomainError

LF_STREAM = 0
HF_STREAM = 1


class QuantileResolutionWarning(UserWarning):
    """The sample is too small to resolve a requested quantile."""


class SeveritySampler(Protocol):
    """Law on ``(0, upper)`` sampled by inverse transform."""

    upper: float

    def ppf(self, u: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class TruncatedLognormal:
    """Lognormal ``exp(N(mu, sigma^2))`` conditioned on lying below ``upper``."""

    mu: float
    sigma: float
    upper: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.upper > 0):
            raise DomainError("sigma and upper must be positive")

    def ppf(self, u):
        top = special.ndtr((math.log(self.upper) - self.mu) / self.sigma)
        x = np.exp(self.mu + self.sigma * special.ndtri(np.asarray(u) * top))
        return np.minimum(x, self.upper)


@dataclass(frozen=True)
class HighFrequencyModel:
    rate: float
    severity: SeveritySampler

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise DomainError(f"high-frequency rate must be >= 0, got {self.rate!r}")


@dataclass(frozen=True)
class CellLossModel:
    """Annual loss model of one cell above (and optionally below) the threshold."""

    cell_id: str
    lf_rate: float
    lf_tail: float
    threshold: float
    hf_model: HighFrequencyModel | None = None
    bank_id: str = ""

    def __post_init__(self):
        if not (math.isfinite(self.lf_rate) and self.lf_rate >= 0):
            raise DomainError(f"cell {self.cell_id!r}: rate must be >= 0, got {self.lf_rate!r}")
        if not (math.isfinite(self.lf_tail) and self.lf_tail > 0):
            raise DomainError(f"cell {self.cell_id!r}: tail parameter must be > 0, got {self.lf_tail!r}")
        if not self.threshold > 0:
            raise DomainError(f"cell {self.cell_id!r}: threshold must be > 0")
        if self.hf_model is not None and self.hf_model.severity.upper > self.threshold:
            raise DomainError(f"cell {self.cell_id!r}: high-frequency severities must stay below the threshold")

    @property
    def finite_mean(self) -> bool:
        return self.lf_rate == 0 or self.lf_tail > 1


@dataclass(frozen=True)
class CapitalConfig:
    paths: int
    seed: int = 0
    quantiles: tuple[float, ...] = (0.999,)
    confidence: float = 0.95
    block_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if int(self.paths) < 1:
            raise DomainError("paths must be >= 1")
        if not self.quantiles or not all(0 < q < 1 for q in self.quantiles):
            raise DomainError("quantiles must lie in (0, 1)")
        if not 0 < self.confidence < 1:
            raise DomainError("confidence must lie in (0, 1)")
        if self.block_size < 1 or self.workers < 1:
            raise DomainError("block_size and workers must be >= 1")
        object.__setattr__(self, "quantiles", tuple(float(q) for q in self.quantiles))


@dataclass(frozen=True)
class QuantileEstimate:
    q: float
    estimate: float
    lower: float
    upper: float
    rank: int
    lower_rank: int
    upper_rank: int


@dataclass(frozen=True)
class SampleSummary:
    mean: float
    std: float
    quantiles: tuple[QuantileEstimate, ...]
    mean_converges: bool = True

    def var(self, q: float = 0.999) -> float:
        for est in self.quantiles:
            if est.q == q:
                return est.estimate
        raise KeyError(q)


@dataclass(frozen=True)
class CellSummary:
    bank_id: str
    cell_id: str
    rate: float
    tail: float
    summary: SampleSummary


@dataclass
class CapitalResult:
    config: CapitalConfig
    cells: list[CellSummary]
    banks: dict[str, SampleSummary]
    backend: str
    warnings: list[str] = field(default_factory=list)
    samples: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def bank(self) -> SampleSummary:
        """Summary of the only bank, for single-bank runs."""
        if len(self.banks) != 1:
            raise ValueError(f"result covers {len(self.banks)} banks")
        return next(iter(self.banks.values()))


# ------------------------------------------------------------ quantiles


def quantile_rank(q: float, n: int) -> int:
    """Rank ``ceil(q * n)`` (1-based), with ``q`` read as its decimal literal."""
    return min(max(math.ceil(Fraction(repr(float(q))) * n), 1), n)


def _band_ranks(q, n, confidence):
    alpha = 1.0 - confidence
    lo = int(stats.binom.ppf(alpha / 2, n, q))
    hi = int(stats.binom.ppf(1 - alpha / 2, n, q)) + 1
    return min(max(lo, 1), n), min(max(hi, 1), n)


def quantile(sample, q: float, confidence: float = 0.95, presorted: bool = True) -> QuantileEstimate:
    """Lower empirical quantile with a distribution-free confidence band.

    The estimate is the order statistic of rank ``ceil(q * n)``. The band
    spans the order statistics at the central ``confidence`` interval of a
    ``Binomial(n, q)`` count.
    """
    x = np.asarray(sample, dtype=float)
    n = x.size
    if n == 0:
        raise DomainError("quantile of an empty sample")
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q!r}")
    r = quantile_rank(q, n)
    lo, hi = _band_ranks(q, n, confidence)
    if not presorted:
        x = np.partition(x, sorted({r - 1, lo - 1, hi - 1}))
    return QuantileEstimate(q, float(x[r - 1]), float(x[lo - 1]), float(x[hi - 1]), r, lo, hi)


def summarize(sample: np.ndarray, config: CapitalConfig, mean_converges: bool = True) -> SampleSummary:
    n = sample.size
    ranks = {}
    for q in config.quantiles:
        r = quantile_rank(q, n)
        lo, hi = _band_ranks(q, n, config.confidence)
        ranks[q] = (r, lo, hi)
    kth = sorted({k - 1 for rs in ranks.values() for k in rs})
    part = np.partition(sample, kth)
    ests = tuple(
        QuantileEstimate(q, float(part[r - 1]), float(part[lo - 1]), float(part[hi - 1]), r, lo, hi)
        for q, (r, lo, hi) in ranks.items()
    )
    return SampleSummary(
        mean=float(np.mean(sample)),
        std=float(np.std(sample, ddof=1)) if n > 1 else 0.0,
        quantiles=ests,
        mean_converges=mean_converges,
    )


# ------------------------------------------------------------ simulation


def _blocks(paths, block_size):
    return [(s, min(block_size, paths - s)) for s in range(0, paths, block_size)]


def _run_blocks(fn, paths, block_size, workers):
    blocks = _blocks(paths, block_size)
    if workers == 1 or len(blocks) == 1:
        for b in blocks:
            fn(*b)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda b: fn(*b), blocks))


def simulate_cell(model: CellLossModel, paths: int, seed: int, cell_index: int = 0,
                  block_size: int = 1 << 16, workers: int = 1, backend: str | None = None,
                  return_counts: bool = False):
    """Annual losses of one cell on paths ``0 .. paths - 1``.

    ``cell_index`` selects the random stream, so distinct cells of one run
    must use distinct indices.
    """
    impl = kernels.implementation(backend)
    out = np.empty(paths)
    counts = np.empty(paths, dtype=np.int64)
    key = kernels.stream_key(seed, cell_index, LF_STREAM)
    chunks, chunk_rate = kernels.chunking(model.lf_rate)

    def lf_block(start, m):
        impl.pareto_compound(key, start, chunks, chunk_rate, model.threshold, model.lf_tail,
                             out[start:start + m], counts[start:start + m])

    _run_blocks(lf_block, paths, block_size, workers)

    hf = model.hf_model
    if hf is not None and hf.rate > 0:
        hkey = kernels.stream_key(seed, cell_index, HF_STREAM)
        hchunks, hrate = kernels.chunking(hf.rate)

        def hf_block(start, m):
            n = np.empty(m, dtype=np.int64)
            impl.compound_counts(hkey, start, hchunks, hrate, n)
            u = np.empty(int(n.sum()))
            impl.severity_uniforms(hkey, start, hchunks, n, u)
            below = np.empty(m)
            impl.segment_sums(n, np.ascontiguousarray(hf.severity.ppf(u), dtype=float), below)
            out[start:start + m] += below

        _run_blocks(hf_block, paths, block_size, workers)
    return (out, counts) if return_counts else out


def simulate_annual_loss(model: CellLossModel, seed: int, path: int = 0, cell_index: int = 0,
                         backend: str | None = None) -> float:
    """One annual loss: the draw on ``path`` of stream ``(seed, cell_index)``."""
    impl = kernels.implementation(backend)
    key = kernels.stream_key(seed, cell_index, LF_STREAM)
    chunks, chunk_rate = kernels.chunking(model.lf_rate)
    out = np.empty(1)
    n = np.empty(1, dtype=np.int64)
    impl.pareto_compound(key, path, chunks, chunk_rate, model.threshold, model.lf_tail, out, n)
    total = float(out[0])
    hf = model.hf_model
    if hf is not None and hf.rate > 0:
        hkey = kernels.stream_key(seed, cell_index, HF_STREAM)
        hchunks, hrate = kernels.chunking(hf.rate)
        impl.compound_counts(hkey, path, hchunks, hrate, n)
        u = np.empty(int(n[0]))
        impl.severity_uniforms(hkey, path, hchunks, n, u)
        vals = np.ascontiguousarray(hf.severity.ppf(u), dtype=float)
        below = np.empty(1)
        impl.segment_sums(n, vals, below)
        total += float(below[0])
    return total


def run_capital(models, config: CapitalConfig, keep_samples: bool = False,
                backend: str | None = None) -> CapitalResult:
    """Simulate every cell and the bank totals, and summarize them.

    Parameters
    ----------
    models : sequence of CellLossModel
        Cell ``j`` in this sequence uses random stream ``j``.
    config : CapitalConfig
    keep_samples : bool
        Keep the sorted bank-total sample of every bank on the result.
    """
    models = list(models)
    if not models:
        raise DomainError("no cell models")
    impl = kernels.implementation(backend)
    backend_name = "python" if impl is kernels._pykernels else "cython"
    notes = []
    for q in config.quantiles:
        if config.paths < 1.0 / (1.0 - q):
            msg = f"{config.paths} paths cannot resolve the {q} quantile (need >= {math.ceil(1 / (1 - q))})"
            warnings.warn(msg, QuantileResolutionWarning, stacklevel=2)
            notes.append(msg)

    totals: dict[str, np.ndarray] = {}
    converges: dict[str, bool] = {}
    cells = []
    for j, model in enumerate(models):
        z = simulate_cell(model, config.paths, config.seed, j, config.block_size,
                          config.workers, backend_name)
        cells.append(CellSummary(model.bank_id, model.cell_id, model.lf_rate, model.lf_tail,
                                 summarize(z, config, model.finite_mean)))
        if model.bank_id in totals:
            totals[model.bank_id] += z
        else:
            totals[model.bank_id] = z.copy()
        converges[model.bank_id] = converges.get(model.bank_id, True) and model.finite_mean
        if not model.finite_mean:
            notes.append(f"cell {model.cell_id!r}: tail parameter {model.lf_tail} <= 1, the mean is infinite "
                         "and sample means do not converge")

    banks = {b: summarize(z, config, converges[b]) for b, z in totals.items()}
    samples = {b: np.sort(z) for b, z in totals.items()} if keep_samples else {}
    return CapitalResult(config, cells, banks, backend_name, notes, samples)


def build_models_from_fits(severity_fit, frequency_fit, hf=None):
    """Join severity and frequency fits cell by cell into loss models.

    Parameters
    ----------
    severity_fit, frequency_fit
        Fits providing ``cells`` with ``tail_parameter`` and ``arrival_rate``.
    hf : HighFrequencyModel or mapping, optional
        One below-threshold model for every cell, or per ``(bank, cell)``.

    Returns
    -------
    models : list of CellLossModel
    excluded : list of (bank_id, cell_id)
        Cells present in only one fit; a warning is issued for them.
    """
    sev = {c.key: c for c in severity_fit.cells}
    freq = {c.key: c for c in frequency_fit.cells}
    models, excluded = [], []
    for key in list(sev) + [k for k in freq if k not in sev]:
        if key not in sev or key not in freq:
            excluded.append(key)
            continue
        s, f = sev[key], freq[key]
        if s.threshold != f.threshold:
            raise ConfigError(
                f"cell {key[1]!r} of bank {key[0]!r}: severity threshold {s.threshold} differs "
                f"from frequency threshold {f.threshold}"
            )
        cell_hf = hf.get(key) if isinstance(hf, dict) else hf
        models.append(CellLossModel(key[1], f.arrival_rate, s.tail_parameter, s.threshold, cell_hf, key[0]))
    if excluded:
        warnings.warn(f"cells present in only one fit were excluded: {excluded}", stacklevel=2)
    return models, excluded
