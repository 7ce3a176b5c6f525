"""JSON and text reports for fits and capital runs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ParseError


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def manifest(command: str, inputs: dict, config: dict, argv: list[str] | None = None) -> dict:
    """Run manifest: command, input paths, resolved configuration, tool version."""
    doc = {
        "command": command,
        "inputs": {k: (str(v) if v is not None else None) for k, v in inputs.items()},
        "config": config,
        "version": __version__,
    }
    if argv is not None:
        doc["argv"] = list(argv)
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


# --------------------------------------------------------------- severity


def severity_report(fit, run_manifest: dict | None = None) -> dict:
    industry = None
    if fit.industry is not None:
        ind = fit.industry
        industry = {
            "collective": _num(ind.collective),
            "collective_variance": _num(ind.collective_variance),
            "normalizer": _num(ind.normalizer),
            "pooled_variance": _num(ind.pooled_variance),
            "total_volume": _num(ind.total_volume),
            "balance_constant": _num(ind.balance_constant),
            "grand_mean": _num(ind.grand_mean),
            "degenerate": ind.degenerate,
            "injected": ind.injected,
        }
    return {
        "kind": "severity",
        "manifest": run_manifest,
        "industry": industry,
        "banks": {
            b: {
                "profile": _num(p.profile),
                "bank_only_profile": _num(p.bank_only_profile),
                "between_variance": _num(p.between_variance),
                "bank_weight": _num(p.bank_weight) if fit.industry is not None else None,
                "total_weight": _num(p.total_weight),
                "volume": _num(p.volume),
                "qualified_cells": p.n_cells,
                "degenerate": p.degenerate,
                "excluded": p.excluded,
                "iterations": p.iterations,
            }
            for b, p in fit.banks.items()
        },
        "cells": [
            {
                "bank_id": c.bank_id,
                "cell_id": c.cell_id,
                "threshold": c.threshold,
                "severity_scale": c.severity_scale,
                "n_obs": c.n_obs,
                "raw_mle": _num(c.raw_mle),
                "mle": _num(c.mle),
                "weight": _num(c.weight),
                "bank_credibility": _num(c.bank_credibility),
                "credibility": _num(c.credibility),
                "tail_parameter": _num(c.tail_parameter),
                "excluded": c.excluded,
            }
            for c in fit.cells
        ],
        "notes": list(fit.notes),
    }


def frequency_report(fit, run_manifest: dict | None = None) -> dict:
    industry = None
    if fit.industry is not None:
        ind = fit.industry
        industry = {
            "collective": _num(ind.collective),
            "collective_variance": _num(ind.collective_variance),
            "normalizer": _num(ind.normalizer),
            "pooled_variance": _num(ind.pooled_variance),
            "total_volume": _num(ind.total_volume),
            "balance_constant": _num(ind.balance_constant),
            "grand_mean": _num(ind.grand_mean),
            "degenerate": ind.degenerate,
            "injected": ind.injected,
        }
    return {
        "kind": "frequency",
        "manifest": run_manifest,
        "industry": industry,
        "banks": {
            b: {
                "profile": _num(p.profile),
                "bank_only_profile": _num(p.bank_only_profile),
                "between_variance": _num(p.between_variance),
                "bank_weight": _num(p.bank_weight) if fit.industry is not None else None,
                "total_weight": _num(p.total_weight),
                "total_volume": _num(p.total_volume),
                "volume": _num(p.volume),
                "cells": p.n_cells,
                "degenerate": p.degenerate,
                "iterations": p.iterations,
            }
            for b, p in fit.banks.items()
        },
        "cells": [
            {
                "bank_id": c.bank_id,
                "cell_id": c.cell_id,
                "threshold": c.threshold,
                "frequency_scale": c.frequency_scale,
                "years": c.years,
                "total_count": c.total_count,
                "mle": _num(c.mle),
                "volume": _num(c.volume),
                "weight": _num(c.weight),
                "bank_credibility": _num(c.bank_credibility),
                "credibility": _num(c.credibility),
                "arrival_rate": _num(c.arrival_rate),
            }
            for c in fit.cells
        ],
        "notes": list(fit.notes),
    }


def _fmt(x):
    return "   -   " if x is None else f"{x:7.3f}"


def fit_text(doc: dict) -> str:
    """Tabular text rendering, one row per estimator tier, three decimals."""
    sev = doc["kind"] == "severity"
    lines = [f"{doc['kind']} fit"]
    for bank, b in doc["banks"].items():
        cells = [c for c in doc["cells"] if c["bank_id"] == bank]
        lines.append("")
        lines.append(f"bank {bank}")
        header = "".join(f"{c['cell_id'][:7]:>8}" for c in cells)
        lines.append(f"{'':28}{header}")
        rows = [("MLE", "mle"), ("credibility (bank data)", "bank_credibility")]
        if doc["industry"] is not None:
            rows.append(("credibility (industry)", "credibility"))
        rows.append(("weight", "weight"))
        for label, field in rows:
            lines.append(f"{label:28}" + "".join(f" {_fmt(c[field])}" for c in cells))
        lines.append(
            f"  bank profile (bank data) {_fmt(b['bank_only_profile'])}"
            f"   between variance {_fmt(b['between_variance'])}"
            + (" [degenerate: weights set to 0]" if b["degenerate"] else "")
        )
        if doc["industry"] is not None:
            lines.append(f"  bank weight {_fmt(b['bank_weight'])}   improved profile {_fmt(b['profile'])}")
    if doc["industry"] is not None:
        ind = doc["industry"]
        lines.append("")
        lines.append(
            f"industry collective {_fmt(ind['collective'])}   variance {_fmt(ind['collective_variance'])}"
            + ("   (supplied)" if ind["injected"] else "")
            + ("   [degenerate: bank weights set to 0]" if ind["degenerate"] else "")
        )
    label = "tail parameters" if sev else "arrival rates"
    key = "tail_parameter" if sev else "arrival_rate"
    lines.append("")
    lines.append(f"final {label}")
    for c in doc["cells"]:
        lines.append(f"  {c['bank_id']}/{c['cell_id']}: {_fmt(c[key])}")
    for note in doc.get("notes", []):
        lines.append(f"note: {note}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- capital


def _summary(s) -> dict:
    return {
        "mean": _num(s.mean),
        "std": _num(s.std),
        "mean_converges": s.mean_converges,
        "quantiles": [
            {
                "q": e.q,
                "estimate": _num(e.estimate),
                "lower": _num(e.lower),
                "upper": _num(e.upper),
                "rank": e.rank,
                "lower_rank": e.lower_rank,
                "upper_rank": e.upper_rank,
            }
            for e in s.quantiles
        ],
    }


def capital_report(result, run_manifest: dict | None = None) -> dict:
    cfg = result.config
    return {
        "kind": "capital",
        "manifest": run_manifest,
        "simulation": {
            "paths": cfg.paths,
            "seed": cfg.seed,
            "quantiles": list(cfg.quantiles),
            "confidence": cfg.confidence,
            "backend": result.backend,
        },
        "cells": [
            {"bank_id": c.bank_id, "cell_id": c.cell_id, "rate": c.rate, "tail": c.tail, **_summary(c.summary)}
            for c in result.cells
        ],
        "banks": {b: _summary(s) for b, s in result.banks.items()},
        "warnings": list(result.warnings),
    }


def capital_text(doc: dict) -> str:
    qs = doc["simulation"]["quantiles"]
    lines = [
        f"capital: {doc['simulation']['paths']} paths, seed {doc['simulation']['seed']}",
        "",
        f"{'cell':24}{'rate':>9}{'tail':>9}{'mean':>12}" + "".join(f"{'VaR ' + str(q):>14}" for q in qs),
    ]
    for c in doc["cells"]:
        mean = f"{c['mean']:12.3f}" + ("" if c["mean_converges"] else "*")
        lines.append(
            f"{c['bank_id'] + '/' + c['cell_id']:24}{c['rate']:9.3f}{c['tail']:9.3f}{mean}"
            + "".join(f"{e['estimate']:14.3f}" for e in c["quantiles"])
        )
    for b, s in doc["banks"].items():
        lines.append("")
        lines.append(f"bank {b}: mean {s['mean']:.3f}" + ("" if s["mean_converges"] else " (infinite mean)"))
        for e in s["quantiles"]:
            lines.append(f"  VaR {e['q']}: {e['estimate']:.3f}  [{e['lower']:.3f}, {e['upper']:.3f}]")
    for w in doc["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def write_sample(path, sample: np.ndarray) -> None:
    """Sorted sample as little-endian float64."""
    np.asarray(sample, dtype="<f8").tofile(path)


def read_sample(path) -> np.ndarray:
    return np.fromfile(path, dtype="<f8")


# --------------------------------------------------- reading fit reports


@dataclass(frozen=True)
class ReportCell:
    bank_id: str
    cell_id: str
    threshold: float
    tail_parameter: float | None = None
    arrival_rate: float | None = None

    @property
    def key(self):
        return (self.bank_id, self.cell_id)


@dataclass(frozen=True)
class ReportFit:
    kind: str
    cells: list[ReportCell]


def load_fit_report(path, kind: str) -> ReportFit:
    """Read the cell results of a severity or frequency JSON report."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    if doc.get("kind") != kind:
        raise ParseError(path, 1, f"expected a {kind} report, got {doc.get('kind')!r}")
    field = "tail_parameter" if kind == "severity" else "arrival_rate"
    cells = [
        ReportCell(c["bank_id"], c["cell_id"], float(c["threshold"]), **{field: c[field]})
        for c in doc["cells"]
    ]
    return ReportFit(kind, cells)
