"""Synthetic multi-bank datasets with recorded ground truth."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .panel import CellConfig, CountPanel, LossPanel


@dataclass(frozen=True)
class SynthParams:
    """Dimensions and mixing laws of a synthetic industry.

    Bank profiles are gamma distributed around the industry mean with the
    ``*_bank_var`` variance; cell profiles are gamma distributed around
    their bank profile with the ``*_cell_var`` variance. A zero variance
    makes the level degenerate.
    """

    banks: int = 1
    cells: int = 10
    years: int = 10
    losses_per_cell: int = 10
    threshold: float = 1.0
    sev_mean: float = 2.0
    sev_bank_var: float = 0.1
    sev_cell_var: float = 0.3
    freq_mean: float = 2.0
    freq_bank_var: float = 0.2
    freq_cell_var: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("banks", "cells", "years", "losses_per_cell"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if not (self.threshold > 0 and self.sev_mean > 0 and self.freq_mean > 0):
            raise DomainError("threshold and mixing means must be positive")
        for name in ("sev_bank_var", "sev_cell_var", "freq_bank_var", "freq_cell_var"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be >= 0")


@dataclass(frozen=True)
class SynthDataset:
    losses: LossPanel
    counts: CountPanel
    configs: dict
    truth: dict


def gamma_draw(rng: np.random.Generator, mean: float, var: float, size=None):
    """Gamma variate with the given mean and variance; constant when ``var == 0``."""
    if var == 0:
        return np.full(size, float(mean)) if size is not None else float(mean)
    shape = mean * mean / var
    return rng.gamma(shape, var / mean, size)


def pareto_draw(rng: np.random.Generator, tail: float, threshold: float, size):
    return threshold * (1.0 - rng.random(size)) ** (-1.0 / tail)


def generate(params: SynthParams) -> SynthDataset:
    rng = np.random.default_rng(params.seed)
    configs, losses, counts = {}, {}, {}
    truth = {"parameters": asdict(params), "banks": {}}
    for m in range(params.banks):
        bank = f"bank{m + 1}"
        theta0 = gamma_draw(rng, params.sev_mean, params.sev_bank_var)
        lam0 = gamma_draw(rng, params.freq_mean, params.freq_bank_var)
        thetas = gamma_draw(rng, theta0, params.sev_cell_var, params.cells)
        lams = gamma_draw(rng, lam0, params.freq_cell_var, params.cells)
        cells = {}
        for j in range(params.cells):
            cell = f"cell{j + 1}"
            key = (bank, cell)
            configs[key] = CellConfig(bank, cell, params.threshold)
            losses[key] = tuple(pareto_draw(rng, thetas[j], params.threshold, params.losses_per_cell).tolist())
            years = rng.poisson(lams[j], params.years)
            counts[key] = tuple((y + 1, int(n)) for y, n in enumerate(years))
            cells[cell] = {"severity_profile": float(thetas[j]), "frequency_profile": float(lams[j])}
        truth["banks"][bank] = {
            "severity_profile": float(theta0),
            "frequency_profile": float(lam0),
            "cells": cells,
        }
    return SynthDataset(LossPanel(losses, configs), CountPanel(counts, configs), configs, truth)
