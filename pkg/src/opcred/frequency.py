"""Poisson arrival-rate estimation with cell, bank and industry credibility.

Annual counts above the threshold in a cell are Poisson with mean
``theta = nu * lambda``, ``nu`` being the a priori frequency scale and
``lambda`` the cell risk profile. The hierarchy mirrors :mod:`opcred.severity`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .credibility import (
    FixedPointSettings,
    StructuralParams,
    bank_weight,
    credibility_combine,
    estimate_collective,
    solve_fixed_point,
    truncate_nonnegative,
    weighted_mean,
)
from .errors import DomainError, InsufficientDataError
from .panel import CountPanel


@dataclass(frozen=True)
class FrequencyCellEstimate:
    bank_id: str
    cell_id: str
    years: int
    total_count: int
    frequency_scale: float
    threshold: float
    mle: float
    volume: float
    weight: float
    bank_credibility: float
    credibility: float

    @property
    def arrival_rate(self) -> float:
        return self.frequency_scale * self.credibility

    @property
    def key(self):
        return (self.bank_id, self.cell_id)


@dataclass(frozen=True)
class FrequencyBankProfile:
    """Structural parameters of one bank's frequency profile.

    ``volume`` is the bank's weight in the industry estimate: the sum of cell
    weights, or the total cell volume on the degenerate branch.
    """

    bank_id: str
    bank_only_profile: float
    profile: float
    between_variance: float
    bank_weight: float
    total_weight: float
    total_volume: float
    volume: float
    n_cells: int
    degenerate: bool = False
    iterations: int = 0


@dataclass(frozen=True)
class FrequencyIndustryProfile:
    collective: float
    collective_variance: float
    normalizer: float | None = None
    pooled_variance: float | None = None
    total_volume: float | None = None
    balance_constant: float | None = None
    grand_mean: float | None = None
    degenerate: bool = False
    injected: bool = False


@dataclass(frozen=True)
class FrequencyFit:
    banks: dict[str, FrequencyBankProfile]
    cells: list[FrequencyCellEstimate]
    industry: FrequencyIndustryProfile | None = None
    notes: list[str] = field(default_factory=list)

    def cell(self, bank_id, cell_id) -> FrequencyCellEstimate:
        for c in self.cells:
            if c.bank_id == bank_id and c.cell_id == cell_id:
                return c
        raise KeyError((bank_id, cell_id))


def poisson_mle(counts, scale: float = 1.0) -> tuple[float, float]:
    """Return ``(sum(counts) / (scale * K), scale * K)``."""
    n = np.asarray(counts)
    if scale <= 0:
        raise DomainError(f"frequency scale must be positive, got {scale!r}")
    if n.size == 0:
        raise InsufficientDataError("no observed years")
    if np.any(n < 0):
        raise DomainError("counts must be nonnegative")
    volume = scale * n.size
    return float(n.sum()) / volume, volume


def frequency_weight(volume: float, profile: float, between_variance: float) -> float:
    """Cell credibility weight ``v / (v + profile / between_variance)``."""
    if between_variance <= 0:
        return 0.0
    return volume / (volume + profile / between_variance)


def fit_bank_frequency(
    panel: CountPanel, settings: FixedPointSettings = FixedPointSettings(), bank_id: str | None = None
) -> tuple[FrequencyBankProfile, list[FrequencyCellEstimate]]:
    """Fit bank structural parameters ``(lambda0, omega0^2)`` and cell estimates.

    Iterates

    ``omega2 = max(c * (T - J * lambda0 / nu0), 0)``,
    ``lambda0 = sum(gamma_j * lam_j) / sum(gamma_j)``

    where ``nu0`` is the total volume, ``T`` the volume-weighted dispersion of
    the cell MLEs around their plain mean and ``c`` the balancing constant.
    If ``omega2`` truncates, every weight is zero and ``lambda0`` is the
    volume-weighted mean of the cell MLEs.
    """
    banks = panel.banks() if bank_id is None else [bank_id]
    if len(banks) != 1:
        raise DomainError(f"expected counts of exactly one bank, got {banks}")
    bank = banks[0]
    keys = panel.bank_cells(bank)
    n = len(keys)
    if n < 2:
        raise InsufficientDataError(f"bank {bank!r} has {n} cell(s) with counts; need 2")

    lam, vol = [], []
    for key in keys:
        m, v = poisson_mle(panel.yearly(key), panel.configs[key].frequency_scale)
        lam.append(m)
        vol.append(v)
    nu0 = math.fsum(vol)
    share = [v / nu0 for v in vol]
    fbar = weighted_mean(lam, [1.0] * n)
    t_stat = n / (n - 1) * math.fsum(s * (x - fbar) ** 2 for s, x in zip(share, lam))
    c = (n - 1) / n / math.fsum(s * (1.0 - s) for s in share)

    def omega2(mean):
        return truncate_nonnegative(c * (t_stat - n * mean / nu0))

    start_mean = weighted_mean(lam, vol)
    var, degenerate = omega2(start_mean)
    iterations = 0
    profile = start_mean
    if not degenerate:

        def update(p: StructuralParams) -> StructuralParams:
            if p.between_variance <= 0:
                return p
            gamma = [frequency_weight(v, p.collective_mean, p.between_variance) for v in vol]
            mean = weighted_mean(lam, gamma)
            return StructuralParams(mean, omega2(mean)[0])

        result = solve_fixed_point(update, StructuralParams(start_mean, var), settings)
        var, degenerate = truncate_nonnegative(result.params.between_variance)
        profile = start_mean if degenerate else result.params.collective_mean
        iterations = result.iterations

    cells = []
    for key, m, v in zip(keys, lam, vol):
        cfg = panel.configs[key]
        gamma = 0.0 if degenerate else frequency_weight(v, profile, var)
        cred = credibility_combine(m, profile, gamma)
        cells.append(
            FrequencyCellEstimate(
                bank_id=bank,
                cell_id=key[1],
                years=panel.years(key),
                total_count=panel.total(key),
                frequency_scale=cfg.frequency_scale,
                threshold=cfg.threshold,
                mle=m,
                volume=v,
                weight=gamma,
                bank_credibility=cred,
                credibility=cred,
            )
        )
    total = math.fsum(c.weight for c in cells)
    prof = FrequencyBankProfile(
        bank_id=bank,
        bank_only_profile=profile,
        profile=profile,
        between_variance=var,
        bank_weight=1.0,
        total_weight=total,
        total_volume=nu0,
        volume=nu0 if degenerate else total,
        n_cells=n,
        degenerate=degenerate,
        iterations=iterations,
    )
    return prof, cells


def industry_rate_injection(profile: float, variance: float) -> FrequencyIndustryProfile:
    """Wrap externally supplied industry frequency parameters."""
    if not (math.isfinite(profile) and profile > 0):
        raise DomainError(f"industry rate must be positive, got {profile!r}")
    if not (math.isfinite(variance) and variance >= 0):
        raise DomainError(f"industry variance must be nonnegative, got {variance!r}")
    return FrequencyIndustryProfile(
        collective=float(profile),
        collective_variance=float(variance),
        degenerate=variance == 0,
        injected=True,
    )


def apply_industry_frequency(
    bank: FrequencyBankProfile, cells: list[FrequencyCellEstimate], industry: FrequencyIndustryProfile,
    weight: float | None = None,
) -> tuple[FrequencyBankProfile, list[FrequencyCellEstimate]]:
    if weight is None:
        weight = bank_weight(bank.volume, bank.between_variance, industry.collective_variance)
    profile = credibility_combine(bank.bank_only_profile, industry.collective, weight)
    out = [replace(c, credibility=credibility_combine(c.mle, profile, c.weight)) for c in cells]
    return replace(bank, profile=profile, bank_weight=weight), out


def fit_industry_frequency(
    panel: CountPanel,
    settings: FixedPointSettings = FixedPointSettings(),
    industry: FrequencyIndustryProfile | None = None,
) -> FrequencyFit:
    """Hierarchical cell -> bank -> industry fit of the arrival-rate profile."""
    fits = {bank: fit_bank_frequency(panel.restrict(bank), settings) for bank in panel.banks()}
    notes = []
    weights = {}
    if industry is None:
        if len(fits) < 2:
            raise InsufficientDataError(f"industry estimation needs at least 2 banks, got {len(fits)}")
        names = list(fits)
        est = estimate_collective(
            [fits[b][0].bank_only_profile for b in names],
            [fits[b][0].between_variance for b in names],
            [fits[b][0].volume for b in names],
        )
        industry = FrequencyIndustryProfile(
            collective=est.collective,
            collective_variance=est.collective_variance,
            normalizer=est.normalizer,
            pooled_variance=est.pooled_variance,
            total_volume=est.total_volume,
            balance_constant=est.balance_constant,
            grand_mean=est.grand_mean,
            degenerate=est.degenerate,
        )
        weights = dict(zip(names, est.bank_weights))
        if est.degenerate:
            notes.append("between-bank variance truncated to 0; bank weights set to 0")
    elif not fits:
        raise InsufficientDataError("no counts")

    banks, cells = {}, []
    for bank, (prof, cell_list) in fits.items():
        prof, cell_list = apply_industry_frequency(prof, cell_list, industry, weights.get(bank))
        banks[bank] = prof
        cells.extend(cell_list)
    return FrequencyFit(banks=banks, cells=cells, industry=industry, notes=notes)


def fit_frequency(
    panel: CountPanel,
    settings: FixedPointSettings = FixedPointSettings(),
    industry: FrequencyIndustryProfile | None = None,
) -> FrequencyFit:
    """Bank-only fit for a single bank without industry data, else hierarchical."""
    if industry is None and len(panel.banks()) == 1:
        prof, cells = fit_bank_frequency(panel, settings)
        return FrequencyFit(banks={prof.bank_id: prof}, cells=cells)
    return fit_industry_frequency(panel, settings, industry)
