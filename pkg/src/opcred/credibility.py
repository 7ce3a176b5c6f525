"""Credibility building blocks shared by the severity and frequency stacks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ConvergenceError, DomainError


@dataclass(frozen=True)
class WeightedObservation:
    value: float
    weight: float

    def __post_init__(self):
        if not self.weight > 0:
            raise DomainError(f"weight must be positive, got {self.weight!r}")


@dataclass(frozen=True)
class StructuralParams:
    """Collective mean and variance components of a credibility level."""

    collective_mean: float
    between_variance: float
    within_variance: float | None = None

    def __post_init__(self):
        if self.between_variance < 0:
            raise DomainError(f"between_variance must be >= 0, got {self.between_variance!r}")
        if self.within_variance is not None and self.within_variance < 0:
            raise DomainError(f"within_variance must be >= 0, got {self.within_variance!r}")


@dataclass(frozen=True)
class FixedPointSettings:
    tolerance: float = 1e-10
    max_iterations: int = 500

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got {self.tolerance!r}")
        if int(self.max_iterations) < 1:
            raise DomainError(f"max_iterations must be >= 1, got {self.max_iterations!r}")


@dataclass(frozen=True)
class FixedPointResult:
    params: StructuralParams
    iterations: int
    converged: bool


def credibility_combine(individual: float, collective: float, weight: float) -> float:
    """Homogeneous credibility estimate ``w * individual + (1 - w) * collective``."""
    if not 0.0 <= weight <= 1.0:
        raise DomainError(f"credibility weight must lie in [0, 1], got {weight!r}")
    if weight == 1.0:
        return float(individual)
    if weight == 0.0:
        return float(collective)
    return weight * individual + (1.0 - weight) * collective


def truncate_nonnegative(estimate: float) -> tuple[float, bool]:
    """Clip a variance estimate at zero.

    Returns the clipped value and whether the degenerate branch applies.
    Zero itself counts as degenerate since every credibility weight built on
    it vanishes.
    """
    if estimate > 0:
        return float(estimate), False
    return 0.0, True


def weighted_mean(values, weights) -> float:
    """Weighted mean that is exact when all values coincide."""
    values = [float(v) for v in values]
    weights = [float(w) for w in weights]
    if values and all(v == values[0] for v in values):
        return values[0]
    total = math.fsum(weights)
    if total <= 0:
        raise DomainError("weights must have a positive sum")
    return math.fsum(w * v for w, v in zip(weights, values)) / total


def _close(new: float, old: float, tol: float) -> bool:
    return abs(new - old) <= tol * (1.0 + abs(new))


def solve_fixed_point(
    update: Callable[[StructuralParams], StructuralParams],
    start: StructuralParams,
    settings: FixedPointSettings = FixedPointSettings(),
) -> FixedPointResult:
    """Iterate ``update`` until mean and between-variance settle.

    Convergence requires both ``|d mean| <= tol * (1 + |mean|)`` and
    ``|d var| <= tol * (1 + var)`` between successive iterates.

    Raises
    ------
    ConvergenceError
        After ``max_iterations`` updates without convergence; the last
        iterate is attached.
    """
    current = start
    for it in range(1, int(settings.max_iterations) + 1):
        nxt = update(current)
        if _close(nxt.collective_mean, current.collective_mean, settings.tolerance) and _close(
            nxt.between_variance, current.between_variance, settings.tolerance
        ):
            return FixedPointResult(nxt, it, True)
        if not (math.isfinite(nxt.collective_mean) and math.isfinite(nxt.between_variance)):
            raise ConvergenceError(f"iteration diverged at step {it}", last=nxt, iterations=it)
        current = nxt
    raise ConvergenceError(
        f"no convergence within {settings.max_iterations} iterations",
        last=current,
        iterations=int(settings.max_iterations),
    )


@dataclass(frozen=True)
class CollectiveEstimate:
    """Industry level estimated from bank profiles.

    ``bank_weights`` are the credibility weights given to each bank profile
    against the collective; they are all zero on the degenerate branch.
    """

    collective: float
    collective_variance: float
    normalizer: float
    pooled_variance: float
    total_volume: float
    balance_constant: float
    grand_mean: float
    bank_weights: tuple[float, ...]
    degenerate: bool


def bank_weight(volume: float, bank_variance: float, collective_variance: float) -> float:
    """Credibility of a bank profile against the industry collective.

    ``volume / (volume + bank_variance / collective_variance)``; zero when the
    collective variance vanishes.
    """
    if collective_variance <= 0:
        return 0.0
    if volume <= 0:
        return 0.0
    return volume / (volume + bank_variance / collective_variance)


def estimate_collective(profiles, bank_variances, volumes) -> CollectiveEstimate:
    """Estimate the collective mean and between-bank variance.

    Parameters
    ----------
    profiles : sequence of float
        Bottom-up bank profile estimates.
    bank_variances : sequence of float
        Between-cell variance estimate of every bank.
    volumes : sequence of float
        Bank volumes, the sum of the bank's cell credibility weights.

    Notes
    -----
    The between-bank variance is the moment estimator

    ``c * (M/(M-1) * sum(W_m/W0 * (p_m - pbar)**2) - M * s2 / W0)``

    clipped at zero, where ``pbar`` is the plain mean of the profiles and
    ``s2`` the plain mean of the bank variances. When it clips, all bank
    weights are zero and the collective is the volume-weighted mean profile.
    """
    p = [float(x) for x in profiles]
    s = [float(x) for x in bank_variances]
    w = [float(x) for x in volumes]
    m = len(p)
    if m < 2:
        raise DomainError("the collective needs at least two banks")
    if any(x <= 0 for x in w):
        raise DomainError("bank volumes must be positive")
    w0 = math.fsum(w)
    share = [x / w0 for x in w]
    pooled = math.fsum(s) / m
    grand = weighted_mean(p, [1.0] * m)
    spread = math.fsum(x * (1.0 - x) for x in share)
    c = (m - 1) / m / spread
    disp = m / (m - 1) * math.fsum(sh * (pm - grand) ** 2 for sh, pm in zip(share, p))
    var, degenerate = truncate_nonnegative(c * (disp - m * pooled / w0))
    if degenerate:
        weights = tuple(0.0 for _ in p)
        collective = weighted_mean(p, w)
        normalizer = 0.0
    else:
        weights = tuple(bank_weight(wm, sm, var) for wm, sm in zip(w, s))
        normalizer = math.fsum(weights)
        collective = weighted_mean(p, weights)
    return CollectiveEstimate(
        collective=collective,
        collective_variance=var,
        normalizer=normalizer,
        pooled_variance=pooled,
        total_volume=w0,
        balance_constant=c,
        grand_mean=grand,
        bank_weights=weights,
        degenerate=degenerate,
    )
