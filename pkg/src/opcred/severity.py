"""Pareto tail estimation with cell, bank and industry credibility.

Losses above the threshold ``L`` of a cell follow a Pareto law with tail
parameter ``xi = a * theta`` where ``a`` is the a priori severity scale of the
cell and ``theta`` its risk profile. Cell profiles of one bank scatter around
a bank profile, and bank profiles around an industry collective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

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
from .errors import DegenerateDataError, DomainError, InsufficientDataError
from .panel import MIN_SEVERITY_OBS, LossPanel


@dataclass(frozen=True)
class SeverityCellEstimate:
    """Tail parameter estimates of one cell at every credibility tier.

    ``bank_credibility`` uses the bank profile from the bank's own data,
    ``credibility`` the final profile (equal to ``bank_credibility`` when no
    industry information was used).
    """

    bank_id: str
    cell_id: str
    n_obs: int
    severity_scale: float
    threshold: float
    raw_mle: float | None
    mle: float | None
    weight: float
    bank_credibility: float
    credibility: float
    excluded: bool = False

    @property
    def tail_parameter(self) -> float:
        return self.severity_scale * self.credibility

    @property
    def key(self):
        return (self.bank_id, self.cell_id)


@dataclass(frozen=True)
class SeverityBankProfile:
    """Structural parameters of one bank.

    ``bank_only_profile`` solves the bank equations on the bank's own data;
    ``profile`` is the value after the industry top-down step. ``volume`` is
    the bank's weight in the industry estimate: the sum of cell weights, or
    the sum of ``K - 2`` on the degenerate branch.
    """

    bank_id: str
    bank_only_profile: float
    profile: float
    between_variance: float
    bank_weight: float
    total_weight: float
    volume: float
    n_cells: int
    degenerate: bool = False
    iterations: int = 0
    excluded: bool = False


@dataclass(frozen=True)
class SeverityIndustryProfile:
    """Industry collective for the tail profile.

    Fields other than ``collective`` and ``collective_variance`` are ``None``
    when the profile was supplied externally.
    """

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
class SeverityFit:
    banks: dict[str, SeverityBankProfile]
    cells: list[SeverityCellEstimate]
    industry: SeverityIndustryProfile | None = None
    notes: list[str] = field(default_factory=list)

    def cell(self, bank_id, cell_id) -> SeverityCellEstimate:
        for c in self.cells:
            if c.bank_id == bank_id and c.cell_id == cell_id:
                return c
        raise KeyError((bank_id, cell_id))


def pareto_mle(losses, threshold: float, scale: float = 1.0) -> tuple[float, float]:
    """Maximum likelihood and unbiased estimates of a cell risk profile.

    Parameters
    ----------
    losses : array_like
        Losses at or above ``threshold``.
    threshold : float
        Pareto threshold ``L``.
    scale : float
        A priori severity scale ``a`` of the cell.

    Returns
    -------
    raw_mle, mle : float
        ``K / (a * sum(log(x / L)))`` and its unbiased version
        ``(K - 1) / K * raw_mle``.
    """
    x = np.asarray(losses, dtype=float)
    k = x.size
    if threshold <= 0 or scale <= 0:
        raise DomainError("threshold and scale must be positive")
    if k < 2:
        raise InsufficientDataError(f"need at least 2 losses for the unbiased estimator, got {k}")
    if np.any(x < threshold):
        raise DomainError("losses must not be below the threshold")
    log_sum = math.fsum(np.log(x / threshold).tolist())
    if log_sum <= 0:
        raise DegenerateDataError("all losses equal the threshold; the tail estimate is infinite")
    raw = k / (scale * log_sum)
    return raw, (k - 1) / k * raw


def severity_weight(n_obs: int, profile: float, between_sd: float) -> float:
    """Cell credibility weight ``(K - 2) / (K - 1 + (profile / between_sd)**2)``.

    Returns zero for cells with fewer than three losses and when the
    between-cell standard deviation is zero.
    """
    if n_obs < MIN_SEVERITY_OBS or between_sd <= 0:
        return 0.0
    return (n_obs - 2) / (n_obs - 1 + (profile / between_sd) ** 2)


def _weight_from_var(n_obs, profile, var):
    if n_obs < MIN_SEVERITY_OBS or var <= 0:
        return 0.0
    return (n_obs - 2) / (n_obs - 1 + profile * profile / var)


def _solve_between_variance(theta, counts, mean) -> float:
    """Root in ``tau2`` of the variance equation with the profile held at ``mean``.

    With ``alpha_j = (K_j - 2) tau2 / ((K_j - 1) tau2 + mean**2)`` the
    equation reads ``sum((K_j - 2) d_j**2 / ((K_j - 1) tau2 + mean**2)) = J - 1``
    with ``d_j = theta_j - mean``. The left side decreases in ``tau2``, so
    there is at most one root; 0 is returned when there is none.
    """
    dof = len(theta) - 1
    terms = [((k - 2) * (t - mean) ** 2, k - 1) for t, k in zip(theta, counts)]
    m2 = mean * mean

    def excess(var):
        return math.fsum(a / (b * var + m2) for a, b in terms) - dof

    if m2 == 0 or excess(0.0) <= 0:
        return 0.0
    upper = math.fsum(a / b for a, b in terms) / dof
    while excess(upper) > 0:
        upper *= 2
    return optimize.brentq(excess, 0.0, upper, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def fit_bank_severity(
    panel: LossPanel,
    settings: FixedPointSettings = FixedPointSettings(),
    bank_id: str | None = None,
    method: str = "alternating",
) -> tuple[SeverityBankProfile, list[SeverityCellEstimate]]:
    """Fit bank structural parameters and cell credibility estimates.

    Solves the pair

    ``tau2 = sum(alpha_j * (theta_j - theta0)**2) / (J - 1)``,
    ``theta0 = sum(alpha_j * theta_j) / sum(alpha_j)``

    by fixed-point iteration, with ``alpha_j`` the cell weights evaluated at
    the current ``(theta0, tau2)``. The default ``"alternating"`` update
    solves the first equation exactly in ``tau2`` at the current ``theta0``
    before refreshing ``theta0``; ``"picard"`` substitutes both at once and
    can stall when the root lies close to zero. When the equations only admit
    ``tau2 <= 0`` all weights are zero and ``theta0`` is the ``(K - 2)``
    weighted mean of the cell estimates.

    Cells with fewer than three losses do not enter the structural
    estimation and are shrunk fully to the bank profile.
    """
    banks = panel.banks() if bank_id is None else [bank_id]
    if len(banks) != 1:
        raise DomainError(f"expected losses of exactly one bank, got {banks}")
    bank = banks[0]
    keys = panel.bank_cells(bank)

    raw, mle, nobs = {}, {}, {}
    for key in keys:
        cfg = panel.configs[key]
        k = panel.n_obs(key)
        nobs[key] = k
        if k >= 2:
            try:
                raw[key], mle[key] = pareto_mle(panel.amounts(key), cfg.threshold, cfg.severity_scale)
            except DegenerateDataError:
                if k >= MIN_SEVERITY_OBS:
                    raise
    qualified = [k for k in keys if nobs[k] >= MIN_SEVERITY_OBS]
    n = len(qualified)
    if n < 2:
        raise InsufficientDataError(
            f"bank {bank!r} has {n} cell(s) with at least {MIN_SEVERITY_OBS} losses; need 2"
        )

    theta = [mle[k] for k in qualified]
    counts = [nobs[k] for k in qualified]
    vol = [float(k - 2) for k in counts]
    start_mean = weighted_mean(theta, vol)
    dispersion = math.fsum(w * (t - start_mean) ** 2 for w, t in zip(vol, theta))

    # tau2 -> 0 is attracting iff no positive root exists
    degenerate = dispersion / (n - 1) <= start_mean * start_mean
    iterations = 0
    if not degenerate:
        if method == "picard":

            def update(p: StructuralParams) -> StructuralParams:
                alpha = [_weight_from_var(k, p.collective_mean, p.between_variance) for k in counts]
                mean = weighted_mean(theta, alpha)
                var = math.fsum(a * (t - mean) ** 2 for a, t in zip(alpha, theta)) / (n - 1)
                return StructuralParams(mean, var)

        elif method == "alternating":

            def update(p: StructuralParams) -> StructuralParams:
                var = _solve_between_variance(theta, counts, p.collective_mean)
                if var <= 0:
                    return StructuralParams(start_mean, 0.0)
                alpha = [_weight_from_var(k, p.collective_mean, var) for k in counts]
                return StructuralParams(weighted_mean(theta, alpha), var)

        else:
            raise DomainError(f"unknown method {method!r}")

        start = StructuralParams(start_mean, n / (n - 1) * dispersion / math.fsum(vol))
        result = solve_fixed_point(update, start, settings)
        profile = result.params.collective_mean
        var, degenerate = truncate_nonnegative(result.params.between_variance)
        iterations = result.iterations

    if degenerate:
        profile, var = start_mean, 0.0

    cells = []
    for key in keys:
        cfg = panel.configs[key]
        alpha = 0.0 if degenerate else _weight_from_var(nobs[key], profile, var)
        cred = credibility_combine(mle[key], profile, alpha) if key in qualified else profile
        cells.append(
            SeverityCellEstimate(
                bank_id=bank,
                cell_id=key[1],
                n_obs=nobs[key],
                severity_scale=cfg.severity_scale,
                threshold=cfg.threshold,
                raw_mle=raw.get(key),
                mle=mle.get(key),
                weight=alpha,
                bank_credibility=cred,
                credibility=cred,
                excluded=key not in qualified,
            )
        )
    total = math.fsum(c.weight for c in cells)
    prof = SeverityBankProfile(
        bank_id=bank,
        bank_only_profile=profile,
        profile=profile,
        between_variance=var,
        bank_weight=1.0,
        total_weight=total,
        volume=math.fsum(vol) if degenerate else total,
        n_cells=n,
        degenerate=degenerate,
        iterations=iterations,
    )
    return prof, cells


def industry_profile_injection(profile: float, variance: float) -> SeverityIndustryProfile:
    """Wrap externally supplied industry parameters (e.g. published by a regulator)."""
    if not (math.isfinite(profile) and profile > 0):
        raise DomainError(f"industry profile must be positive, got {profile!r}")
    if not (math.isfinite(variance) and variance >= 0):
        raise DomainError(f"industry variance must be nonnegative, got {variance!r}")
    return SeverityIndustryProfile(
        collective=float(profile),
        collective_variance=float(variance),
        degenerate=variance == 0,
        injected=True,
    )


def apply_industry_severity(
    bank: SeverityBankProfile, cells: list[SeverityCellEstimate], industry: SeverityIndustryProfile,
    weight: float | None = None,
) -> tuple[SeverityBankProfile, list[SeverityCellEstimate]]:
    """Top-down step: shrink the bank profile to the collective, then the cells."""
    if bank.excluded:
        beta = 0.0
    elif weight is None:
        beta = bank_weight(bank.volume, bank.between_variance, industry.collective_variance)
    else:
        beta = weight
    profile = credibility_combine(bank.bank_only_profile, industry.collective, beta)
    out = [
        replace(c, credibility=credibility_combine(c.mle, profile, c.weight) if not c.excluded else profile)
        for c in cells
    ]
    return replace(bank, profile=profile, bank_weight=beta), out


def _excluded_bank(panel: LossPanel, bank: str) -> tuple[SeverityBankProfile, list[SeverityCellEstimate]]:
    cells = []
    for key in panel.bank_cells(bank):
        cfg = panel.configs[key]
        k = panel.n_obs(key)
        raw = mle = None
        if k >= 2:
            try:
                raw, mle = pareto_mle(panel.amounts(key), cfg.threshold, cfg.severity_scale)
            except DegenerateDataError:
                pass
        cells.append(
            SeverityCellEstimate(bank, key[1], k, cfg.severity_scale, cfg.threshold, raw, mle,
                                 0.0, math.nan, math.nan, excluded=True)
        )
    prof = SeverityBankProfile(bank, math.nan, math.nan, 0.0, 0.0, 0.0, 0.0,
                               sum(1 for k in panel.bank_cells(bank) if panel.n_obs(k) >= MIN_SEVERITY_OBS),
                               excluded=True)
    return prof, cells


def fit_industry_severity(
    panel: LossPanel,
    settings: FixedPointSettings = FixedPointSettings(),
    industry: SeverityIndustryProfile | None = None,
    method: str = "alternating",
) -> SeverityFit:
    """Hierarchical cell -> bank -> industry fit of the tail profile.

    Every bank is first fitted on its own data. Unless ``industry`` is given,
    the collective and its variance are then estimated from the bank fits.
    Finally each bank profile is shrunk to the collective and each cell to
    its improved bank profile.

    Banks with fewer than two qualified cells cannot be fitted; they are left
    out of the collective estimate and all their cells take the collective.
    """
    fits = {}
    notes = []
    for bank in panel.banks():
        try:
            fits[bank] = fit_bank_severity(panel.restrict(bank), settings, method=method)
        except InsufficientDataError as exc:
            fits[bank] = _excluded_bank(panel, bank)
            notes.append(f"{exc}; its cells take the industry collective")

    fitted = [b for b in fits if not fits[b][0].excluded]
    weights = {}
    if industry is None:
        if len(fitted) < 2:
            raise InsufficientDataError(
                f"industry estimation needs at least 2 banks with 2 qualified cells, got {len(fitted)}"
            )
        est = estimate_collective(
            [fits[b][0].bank_only_profile for b in fitted],
            [fits[b][0].between_variance for b in fitted],
            [fits[b][0].volume for b in fitted],
        )
        industry = SeverityIndustryProfile(
            collective=est.collective,
            collective_variance=est.collective_variance,
            normalizer=est.normalizer,
            pooled_variance=est.pooled_variance,
            total_volume=est.total_volume,
            balance_constant=est.balance_constant,
            grand_mean=est.grand_mean,
            degenerate=est.degenerate,
        )
        weights = dict(zip(fitted, est.bank_weights))
        if est.degenerate:
            notes.append("between-bank variance truncated to 0; bank weights set to 0")
    elif not fitted:
        raise InsufficientDataError("no bank has 2 qualified cells")

    banks, cells = {}, []
    for bank, (prof, cell_list) in fits.items():
        prof, cell_list = apply_industry_severity(prof, cell_list, industry, weights.get(bank))
        banks[bank] = prof
        cells.extend(cell_list)
    return SeverityFit(banks=banks, cells=cells, industry=industry, notes=notes)


def fit_severity(
    panel: LossPanel,
    settings: FixedPointSettings = FixedPointSettings(),
    industry: SeverityIndustryProfile | None = None,
    method: str = "alternating",
) -> SeverityFit:
    """Fit every bank, adding the industry tier when it is available.

    With an injected ``industry`` profile or at least two banks this is
    :func:`fit_industry_severity`; a single bank without industry data gets
    the bank-only fit.
    """
    if industry is None and len(panel.banks()) == 1:
        prof, cells = fit_bank_severity(panel, settings, method=method)
        return SeverityFit(banks={prof.bank_id: prof}, cells=cells)
    return fit_industry_severity(panel, settings, industry, method)
