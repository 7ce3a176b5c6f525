"""Expert opinions to a priori scale constants.

Severity scales come from opinions of the form "a loss exceeds ``T`` with
probability ``q``"; under the Pareto model ``a * theta0 * log(T / L) = -log q``.
Frequency scales come from expected annual counts, ``nu * lambda0 = n``.
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import ConfigError, DomainError, ParseError


@dataclass(frozen=True)
class SeverityOpinion:
    bank_id: str
    cell_id: str
    level: float
    exceedance_probability: float

    def __post_init__(self):
        if not 0.0 < self.exceedance_probability < 1.0:
            raise DomainError(
                f"exceedance probability must lie in (0, 1), got {self.exceedance_probability!r}"
            )


@dataclass(frozen=True)
class FrequencyOpinion:
    bank_id: str
    cell_id: str
    expected_count: float

    def __post_init__(self):
        if not self.expected_count > 0:
            raise DomainError(f"expected count must be positive, got {self.expected_count!r}")


def calibrate_severity_scales(opinions, thresholds, reference_profile: float = 1.0) -> dict:
    """Least-squares severity scale per cell.

    Parameters
    ----------
    opinions : iterable of SeverityOpinion
        Several opinions for the same cell, possibly from different experts,
        are pooled into one fit.
    thresholds : mapping or float
        ``(bank_id, cell_id)`` to threshold ``L``, or one common threshold.
    reference_profile : float
        Bank profile the scales are expressed against.

    Returns
    -------
    dict
        ``(bank_id, cell_id)`` to ``a``, minimizing
        ``sum((a * theta0 * log(T_i / L) + log q_i)**2)`` over the cell's
        opinions.
    """
    if not reference_profile > 0:
        raise DomainError("reference profile must be positive")
    sxy = defaultdict(float)
    sxx = defaultdict(float)
    for op in opinions:
        key = (op.bank_id, op.cell_id)
        L = thresholds if isinstance(thresholds, (int, float)) else thresholds[key]
        if not op.level > L:
            raise DomainError(f"opinion level {op.level!r} must exceed the threshold {L!r} of cell {key}")
        x = math.log(op.level / L)
        sxy[key] += -math.log(op.exceedance_probability) * x
        sxx[key] += x * x
    return {key: sxy[key] / (reference_profile * sxx[key]) for key in sxx}


def calibrate_frequency_scales(opinions, reference_rate: float = 1.0) -> dict:
    """``nu = n / lambda0`` per cell; several opinions on a cell are averaged."""
    if not reference_rate > 0:
        raise DomainError("reference rate must be positive")
    acc = defaultdict(list)
    for op in opinions:
        acc[(op.bank_id, op.cell_id)].append(op.expected_count)
    return {key: math.fsum(v) / len(v) / reference_rate for key, v in acc.items()}


def load_opinions(path) -> tuple[list[SeverityOpinion], list[FrequencyOpinion]]:
    """Read the opinions JSON array.

    Entries carry ``kind`` ``"severity"`` (with ``level`` and ``probability``)
    or ``"frequency"`` (with ``expected_count``).
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, list):
        raise ParseError(path, 1, "opinions must be a JSON array")
    sev, freq = [], []
    for i, e in enumerate(doc):
        try:
            bank, cell, kind = str(e["bank_id"]), str(e["cell_id"]), e["kind"]
            if kind == "severity":
                sev.append(SeverityOpinion(bank, cell, float(e["level"]), float(e["probability"])))
            elif kind == "frequency":
                freq.append(FrequencyOpinion(bank, cell, float(e["expected_count"])))
            else:
                raise ConfigError(f"{path}: entry {i}: unknown kind {kind!r}")
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: entry {i}: missing or invalid field {exc}") from None
    return sev, freq


def apply_calibration(configs, severity_opinions=(), frequency_opinions=(),
                      reference_profile: float = 1.0, reference_rate: float = 1.0) -> dict:
    """Return a copy of ``configs`` with calibrated scales filled in."""
    configs = dict(configs)
    thresholds = {k: c.threshold for k, c in configs.items()}
    for op in list(severity_opinions) + list(frequency_opinions):
        if (op.bank_id, op.cell_id) not in configs:
            raise ConfigError(f"opinion for unknown cell {op.cell_id!r} of bank {op.bank_id!r}")
    for key, a in calibrate_severity_scales(severity_opinions, thresholds, reference_profile).items():
        configs[key] = replace(configs[key], severity_scale=a)
    for key, nu in calibrate_frequency_scales(frequency_opinions, reference_rate).items():
        configs[key] = replace(configs[key], frequency_scale=nu)
    return configs

