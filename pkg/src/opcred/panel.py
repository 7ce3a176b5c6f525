"""Multi-bank, multi-cell loss and count panels.

A panel is keyed by ``(bank_id, cell_id)``. Loss panels hold severities
observed above the cell threshold; count panels hold annual numbers of such
events. Both carry the :class:`CellConfig` of every referenced cell and are
treated as immutable once loaded.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, ParseError, ValidationError

LOSS_HEADER = ("bank_id", "cell_id", "amount")
COUNT_HEADER = ("bank_id", "cell_id", "year", "count")
CONFIG_KEYS = ("bank_id", "cell_id", "threshold", "severity_scale", "frequency_scale")

# severity credibility needs Var = theta^2 / (K - 2) finite and positive
MIN_SEVERITY_OBS = 3

CellKey = tuple[str, str]


@dataclass(frozen=True)
class CellConfig:
    """Threshold and a priori scale constants of one risk cell."""

    bank_id: str
    cell_id: str
    threshold: float
    severity_scale: float = 1.0
    frequency_scale: float = 1.0

    def __post_init__(self):
        for name in ("threshold", "severity_scale", "frequency_scale"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(
                    f"cell ({self.bank_id}, {self.cell_id}): {name} must be a "
                    f"positive finite number, got {value!r}"
                )

    @property
    def key(self) -> CellKey:
        return (self.bank_id, self.cell_id)

    def to_dict(self) -> dict:
        return {
            "bank_id": self.bank_id,
            "cell_id": self.cell_id,
            "threshold": self.threshold,
            "severity_scale": self.severity_scale,
            "frequency_scale": self.frequency_scale,
        }


@dataclass(frozen=True, order=True)
class LossRecord:
    bank_id: str
    cell_id: str
    amount: float


@dataclass(frozen=True, order=True)
class CountRecord:
    bank_id: str
    cell_id: str
    year: int
    count: int


def _freeze(mapping):
    return MappingProxyType(dict(mapping))


def _banks_of(keys: Iterable[CellKey]) -> list[str]:
    seen = {}
    for bank, _ in keys:
        seen.setdefault(bank, None)
    return list(seen)


@dataclass(frozen=True)
class LossPanel:
    """Severity observations above threshold, grouped by cell.

    Parameters
    ----------
    losses : mapping
        ``(bank_id, cell_id)`` to a tuple of amounts in file order.
    configs : mapping
        ``(bank_id, cell_id)`` to :class:`CellConfig`. May list cells without
        observations; those are carried along with ``K = 0``.
    """

    losses: Mapping[CellKey, tuple[float, ...]]
    configs: Mapping[CellKey, CellConfig]

    def __post_init__(self):
        object.__setattr__(self, "losses", _freeze(self.losses))
        object.__setattr__(self, "configs", _freeze(self.configs))
        for key, amounts in self.losses.items():
            cfg = self.configs.get(key)
            if cfg is None:
                raise ConfigError(f"no cell config for bank {key[0]!r} cell {key[1]!r}")
            for amount in amounts:
                if not amount >= cfg.threshold:
                    raise ValidationError(
                        f"loss {amount!r} in bank {key[0]!r} cell {key[1]!r} is "
                        f"below threshold {cfg.threshold!r}"
                    )

    def cells(self) -> list[CellKey]:
        """Cells with at least one observation, in first-seen order."""
        return list(self.losses)

    def banks(self) -> list[str]:
        return _banks_of(self.losses)

    def bank_cells(self, bank_id: str) -> list[CellKey]:
        """All configured cells of a bank, observed cells first."""
        keys = [k for k in self.losses if k[0] == bank_id]
        keys += [k for k in self.configs if k[0] == bank_id and k not in self.losses]
        return keys

    def amounts(self, key: CellKey) -> np.ndarray:
        return np.asarray(self.losses.get(key, ()), dtype=float)

    def n_obs(self, key: CellKey) -> int:
        return len(self.losses.get(key, ()))

    def restrict(self, bank_id: str) -> "LossPanel":
        return LossPanel(
            {k: v for k, v in self.losses.items() if k[0] == bank_id},
            {k: v for k, v in self.configs.items() if k[0] == bank_id},
        )

    def records(self) -> list[LossRecord]:
        return [LossRecord(b, c, x) for (b, c), xs in self.losses.items() for x in xs]

    def with_configs(self, configs: Mapping[CellKey, CellConfig]) -> "LossPanel":
        return LossPanel(self.losses, configs)


@dataclass(frozen=True)
class CountPanel:
    """Annual event counts above threshold, grouped by cell.

    ``counts`` maps a cell to ``((year, count), ...)`` sorted by year. Years
    need not be contiguous; only their number enters the estimators.
    """

    counts: Mapping[CellKey, tuple[tuple[int, int], ...]]
    configs: Mapping[CellKey, CellConfig]

    def __post_init__(self):
        normalized = {}
        for key, entries in self.counts.items():
            if key not in self.configs:
                raise ConfigError(f"no cell config for bank {key[0]!r} cell {key[1]!r}")
            seen = set()
            for year, count in entries:
                if year in seen:
                    raise ValidationError(
                        f"duplicate count record for bank {key[0]!r} cell {key[1]!r} year {year}"
                    )
                seen.add(year)
                if count < 0:
                    raise ValidationError(
                        f"negative count {count} for bank {key[0]!r} cell {key[1]!r} year {year}"
                    )
            normalized[key] = tuple(sorted((int(y), int(n)) for y, n in entries))
        object.__setattr__(self, "counts", _freeze(normalized))
        object.__setattr__(self, "configs", _freeze(self.configs))

    def cells(self) -> list[CellKey]:
        return list(self.counts)

    def banks(self) -> list[str]:
        return _banks_of(self.counts)

    def bank_cells(self, bank_id: str) -> list[CellKey]:
        return [k for k in self.counts if k[0] == bank_id]

    def years(self, key: CellKey) -> int:
        """Number of observed years ``K`` of a cell."""
        return len(self.counts.get(key, ()))

    def yearly(self, key: CellKey) -> np.ndarray:
        return np.array([n for _, n in self.counts.get(key, ())], dtype=np.int64)

    def total(self, key: CellKey) -> int:
        return sum(n for _, n in self.counts.get(key, ()))

    def restrict(self, bank_id: str) -> "CountPanel":
        return CountPanel(
            {k: v for k, v in self.counts.items() if k[0] == bank_id},
            {k: v for k, v in self.configs.items() if k[0] == bank_id},
        )

    def records(self) -> list[CountRecord]:
        return [CountRecord(b, c, y, n) for (b, c), e in self.counts.items() for y, n in e]

    def with_configs(self, configs: Mapping[CellKey, CellConfig]) -> "CountPanel":
        return CountPanel(self.counts, configs)


# --------------------------------------------------------------------- I/O


def _config_map(config) -> dict[CellKey, CellConfig]:
    if isinstance(config, Mapping):
        return dict(config)
    return {c.key: c for c in config}


def load_config(path) -> dict[CellKey, CellConfig]:
    """Read a cell configuration JSON array.

    ``severity_scale`` and ``frequency_scale`` default to 1.0.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(doc, list):
        raise ParseError(path, 1, "cell config must be a JSON array")
    out: dict[CellKey, CellConfig] = {}
    for i, entry in enumerate(doc):
        if not isinstance(entry, dict) or "bank_id" not in entry or "cell_id" not in entry:
            raise ConfigError(f"{path}: entry {i} needs bank_id and cell_id")
        if "threshold" not in entry:
            raise ConfigError(f"{path}: entry {i} has no threshold")
        unknown = set(entry) - set(CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"{path}: entry {i} has unknown keys {sorted(unknown)}")
        cfg = CellConfig(
            str(entry["bank_id"]),
            str(entry["cell_id"]),
            float(entry["threshold"]),
            float(entry.get("severity_scale", 1.0)),
            float(entry.get("frequency_scale", 1.0)),
        )
        if cfg.key in out:
            raise ConfigError(f"{path}: duplicate config for bank {cfg.bank_id!r} cell {cfg.cell_id!r}")
        out[cfg.key] = cfg
    return out


def write_config(path, configs) -> None:
    configs = _config_map(configs)
    Path(path).write_text(
        json.dumps([c.to_dict() for c in configs.values()], indent=2) + "\n", encoding="utf-8"
    )


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "missing header") from None
        if tuple(h.strip() for h in first) != header:
            raise ParseError(path, 1, f"expected header {','.join(header)}")
        for row in reader:
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num, f"expected {len(header)} fields, got {len(row)}")
            yield reader.line_num, [f.strip() for f in row]


def load_losses(path, config) -> LossPanel:
    """Read a loss CSV (``bank_id,cell_id,amount``) into a validated panel."""
    configs = _config_map(config)
    grouped: dict[CellKey, list[float]] = defaultdict(list)
    for line, (bank, cell, raw) in _read_rows(path, LOSS_HEADER):
        try:
            amount = float(raw)
        except ValueError:
            raise ParseError(path, line, f"amount {raw!r} is not a number") from None
        if not math.isfinite(amount):
            raise ParseError(path, line, f"amount {raw!r} is not finite")
        key = (bank, cell)
        cfg = configs.get(key)
        if cfg is None:
            raise ConfigError(f"{path}:{line}: unknown cell {cell!r} of bank {bank!r}")
        if not amount >= cfg.threshold:
            raise ValidationError(
                f"{path}:{line}: loss {amount!r} in bank {bank!r} cell {cell!r} is "
                f"below threshold {cfg.threshold!r}"
            )
        grouped[key].append(amount)
    return LossPanel({k: tuple(v) for k, v in grouped.items()}, configs)


def load_counts(path, config) -> CountPanel:
    """Read a count CSV (``bank_id,cell_id,year,count``) into a validated panel."""
    configs = _config_map(config)
    grouped: dict[CellKey, dict[int, int]] = defaultdict(dict)
    for line, (bank, cell, raw_year, raw_count) in _read_rows(path, COUNT_HEADER):
        try:
            year, count = int(raw_year), int(raw_count)
        except ValueError:
            raise ParseError(path, line, "year and count must be integers") from None
        key = (bank, cell)
        if key not in configs:
            raise ConfigError(f"{path}:{line}: unknown cell {cell!r} of bank {bank!r}")
        if year in grouped[key]:
            raise ValidationError(
                f"{path}:{line}: duplicate count record (bank={bank}, cell={cell}, year={year})"
            )
        if count < 0:
            raise ValidationError(f"{path}:{line}: negative count {count}")
        grouped[key][year] = count
    return CountPanel({k: tuple(v.items()) for k, v in grouped.items()}, configs)


def write_losses(path, panel: LossPanel) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_HEADER)
        for rec in panel.records():
            writer.writerow([rec.bank_id, rec.cell_id, repr(rec.amount)])


def write_counts(path, panel: CountPanel) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNT_HEADER)
        for rec in panel.records():
            writer.writerow([rec.bank_id, rec.cell_id, rec.year, rec.count])


# -------------------------------------------------------------- validation


@dataclass(frozen=True)
class CellReport:
    bank_id: str
    cell_id: str
    observations: int
    severity_qualified: bool | None
    note: str = ""


@dataclass(frozen=True)
class BankReport:
    bank_id: str
    thresholds: tuple[float, ...]
    threshold_consistent: bool


@dataclass(frozen=True)
class ValidationReport:
    kind: str
    cells: tuple[CellReport, ...]
    banks: tuple[BankReport, ...]
    issues: tuple[str, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return not self.issues

    def excluded_cells(self) -> list[CellKey]:
        return [(c.bank_id, c.cell_id) for c in self.cells if c.severity_qualified is False]


def validate_panel(panel: LossPanel | CountPanel) -> ValidationReport:
    """Summarize a panel per cell and check per-bank threshold consistency.

    For loss panels a cell qualifies for severity credibility when it has at
    least three observations. For count panels the observation count is the
    number of years, and cells of one bank carrying different thresholds are
    reported as an issue because the frequency model assumes one threshold.
    """
    is_loss = isinstance(panel, LossPanel)
    cells = []
    issues = []
    keys = []
    for bank in panel.banks() if not is_loss else _banks_of(list(panel.configs) + panel.cells()):
        keys.extend(panel.bank_cells(bank))
    for key in keys:
        if is_loss:
            k = panel.n_obs(key)
            qualified = k >= MIN_SEVERITY_OBS
            note = "" if qualified else "excluded from severity credibility"
        else:
            k = panel.years(key)
            qualified = None
            note = "" if k else "no observed years"
        cells.append(CellReport(key[0], key[1], k, qualified, note))

    banks = []
    for bank in _banks_of(keys):
        ths = tuple(sorted({panel.configs[k].threshold for k in keys if k[0] == bank}))
        consistent = len(ths) <= 1
        banks.append(BankReport(bank, ths, consistent))
        if not is_loss and not consistent:
            issues.append(
                f"bank {bank!r}: cells carry distinct thresholds {list(ths)}; "
                "the frequency model needs one threshold per bank"
            )
    return ValidationReport("losses" if is_loss else "counts", tuple(cells), tuple(banks), tuple(issues))
