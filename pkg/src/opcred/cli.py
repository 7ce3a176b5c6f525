"""Command line interface.

Exit codes: 0 success, 1 validation error, 2 solver non-convergence,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .calibration import apply_calibration, load_opinions
from .capital import CapitalConfig, HighFrequencyModel, TruncatedLognormal, build_models_from_fits, run_capital
from .credibility import FixedPointSettings
from .errors import ConvergenceError, OpCredError
from .frequency import fit_frequency, industry_rate_injection
from .panel import load_config, load_counts, load_losses, validate_panel, write_config, write_counts, write_losses
from .report import (
    capital_report,
    capital_text,
    dumps,
    fit_text,
    frequency_report,
    load_fit_report,
    manifest,
    severity_report,
    write_sample,
)
from .severity import fit_severity, industry_profile_injection
from .synth import SynthParams, generate

log = logging.getLogger("opcred")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3


def _common(p, seed=False):
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--tol", type=float, default=1e-10, help="fixed-point tolerance")
    p.add_argument("--max-iter", type=int, default=500, help="fixed-point iteration cap")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opcred", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"opcred {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-severity", help="Pareto tail credibility fit")
    p.add_argument("losses", help="loss CSV (bank_id,cell_id,amount)")
    p.add_argument("config", help="cell config JSON")
    p.add_argument("--industry-profile", type=float, help="supplied industry collective tail profile")
    p.add_argument("--industry-var", type=float, help="supplied industry collective variance")
    p.add_argument("--method", choices=["alternating", "picard"], default="alternating")
    _common(p)

    p = sub.add_parser("fit-frequency", help="Poisson rate credibility fit")
    p.add_argument("counts", help="count CSV (bank_id,cell_id,year,count)")
    p.add_argument("config", help="cell config JSON")
    p.add_argument("--industry-rate", type=float, help="supplied industry collective rate profile")
    p.add_argument("--industry-var", type=float, help="supplied industry collective variance")
    _common(p)

    p = sub.add_parser("capital", help="Monte Carlo annual loss and VaR")
    p.add_argument("severity_report", help="severity.json from fit-severity")
    p.add_argument("frequency_report", help="frequency.json from fit-frequency")
    p.add_argument("--hf", help="JSON {rate, mu, sigma} for losses below the threshold")
    p.add_argument("--paths", type=int, default=1_000_000)
    p.add_argument("--quantile", type=float, action="append", dest="quantiles")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--block-size", type=int, default=1 << 16)
    p.add_argument("--sample", action="store_true", help="also write the sorted bank-loss sample")
    _common(p, seed=True)

    p = sub.add_parser("synth", help="synthetic multi-bank dataset with ground truth")
    p.add_argument("--banks", type=int, default=1)
    p.add_argument("--cells", type=int, default=10)
    p.add_argument("--years", type=int, default=10)
    p.add_argument("--losses-per-cell", type=int, default=10)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--sev-mean", type=float, default=2.0)
    p.add_argument("--sev-bank-var", type=float, default=0.1)
    p.add_argument("--sev-cell-var", type=float, default=0.3)
    p.add_argument("--freq-mean", type=float, default=2.0)
    p.add_argument("--freq-bank-var", type=float, default=0.2)
    p.add_argument("--freq-cell-var", type=float, default=0.5)
    _common(p, seed=True)

    p = sub.add_parser("calibrate", help="scale constants from expert opinions")
    p.add_argument("opinions", help="opinions JSON")
    p.add_argument("config", help="cell config JSON")
    p.add_argument("--reference-profile", type=float, default=1.0)
    p.add_argument("--reference-rate", type=float, default=1.0)
    p.add_argument("--output", help="output config path (default: OUT/config.json)")
    _common(p)
    return parser


def _settings(args) -> FixedPointSettings:
    return FixedPointSettings(args.tol, args.max_iter)


def _argv(args, skip=("out", "command", "verbose", "func")) -> list[str]:
    """Canonical command line reproducing ``args`` without the output location."""
    out = [args.command]
    positional = {
        "fit-severity": ["losses", "config"],
        "fit-frequency": ["counts", "config"],
        "capital": ["severity_report", "frequency_report"],
        "calibrate": ["opinions", "config"],
        "synth": [],
    }[args.command]
    out += [str(getattr(args, k)) for k in positional]
    for key, value in sorted(vars(args).items()):
        if key in skip or key in positional or value is None or key == "output":
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                out.append(flag)
        elif isinstance(value, list):
            for v in value:
                out += ["--quantile" if key == "quantiles" else flag, repr(v)]
        else:
            out += [flag, repr(value) if isinstance(value, float) else str(value)]
    return out


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    return path


def _pair(a, b, names):
    if (a is None) != (b is None):
        raise OpCredError(f"{names[0]} and {names[1]} must be given together")
    return a is not None


def cmd_fit_severity(args) -> int:
    configs = load_config(args.config)
    panel = load_losses(args.losses, configs)
    for issue in validate_panel(panel).issues:
        log.warning(issue)
    industry = None
    if _pair(args.industry_profile, args.industry_var, ("--industry-profile", "--industry-var")):
        industry = industry_profile_injection(args.industry_profile, args.industry_var)
    fit = fit_severity(panel, _settings(args), industry, args.method)
    doc = severity_report(
        fit,
        manifest("fit-severity", {"losses": args.losses, "config": args.config},
                 {"tol": args.tol, "max_iter": args.max_iter, "method": args.method,
                  "industry_profile": args.industry_profile, "industry_var": args.industry_var,
                  "cells": [c.to_dict() for c in configs.values()]},
                 _argv(args)),
    )
    out = Path(args.out)
    _write(out, "severity.json", dumps(doc))
    text = fit_text(doc)
    _write(out, "severity.txt", text)
    print(text, end="")
    return EXIT_OK


def cmd_fit_frequency(args) -> int:
    configs = load_config(args.config)
    panel = load_counts(args.counts, configs)
    report = validate_panel(panel)
    if report.issues:
        raise OpCredError("; ".join(report.issues))
    industry = None
    if _pair(args.industry_rate, args.industry_var, ("--industry-rate", "--industry-var")):
        industry = industry_rate_injection(args.industry_rate, args.industry_var)
    fit = fit_frequency(panel, _settings(args), industry)
    doc = frequency_report(
        fit,
        manifest("fit-frequency", {"counts": args.counts, "config": args.config},
                 {"tol": args.tol, "max_iter": args.max_iter,
                  "industry_rate": args.industry_rate, "industry_var": args.industry_var,
                  "cells": [c.to_dict() for c in configs.values()]},
                 _argv(args)),
    )
    out = Path(args.out)
    _write(out, "frequency.json", dumps(doc))
    text = fit_text(doc)
    _write(out, "frequency.txt", text)
    print(text, end="")
    return EXIT_OK


def _load_hf(path, upper):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return HighFrequencyModel(float(doc["rate"]), TruncatedLognormal(float(doc["mu"]), float(doc["sigma"]), upper))


def cmd_capital(args) -> int:
    sev = load_fit_report(args.severity_report, "severity")
    freq = load_fit_report(args.frequency_report, "frequency")
    hf = None
    if args.hf:
        thresholds = {c.key: c.threshold for c in sev.cells}
        hf = {k: _load_hf(args.hf, t) for k, t in thresholds.items()}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        models, excluded = build_models_from_fits(sev, freq, hf)
        if excluded:
            raise OpCredError(f"severity and frequency reports cover different cells: {excluded}")
        config = CapitalConfig(
            paths=args.paths,
            seed=args.seed,
            quantiles=tuple(args.quantiles or (0.999,)),
            confidence=args.confidence,
            block_size=args.block_size,
            workers=args.workers,
        )
        result = run_capital(models, config, keep_samples=args.sample)
    for w in caught:
        log.warning(str(w.message))
    doc = capital_report(
        result,
        manifest("capital", {"severity_report": args.severity_report, "frequency_report": args.frequency_report,
                             "hf": args.hf},
                 {"paths": args.paths, "seed": args.seed, "quantiles": list(config.quantiles),
                  "confidence": args.confidence}, _argv(args, skip=("out", "command", "verbose", "workers",
                                                                     "block_size"))),
    )
    out = Path(args.out)
    _write(out, "capital.json", dumps(doc))
    text = capital_text(doc)
    _write(out, "capital.txt", text)
    if args.sample:
        for bank, sample in result.samples.items():
            write_sample(out / f"capital_sample_{bank}.bin", sample)
    print(text, end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    params = SynthParams(
        banks=args.banks, cells=args.cells, years=args.years, losses_per_cell=args.losses_per_cell,
        threshold=args.threshold, sev_mean=args.sev_mean, sev_bank_var=args.sev_bank_var,
        sev_cell_var=args.sev_cell_var, freq_mean=args.freq_mean, freq_bank_var=args.freq_bank_var,
        freq_cell_var=args.freq_cell_var, seed=args.seed,
    )
    data = generate(params)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_losses(out / "losses.csv", data.losses)
    write_counts(out / "counts.csv", data.counts)
    write_config(out / "config.json", data.configs)
    truth = dict(data.truth, manifest=manifest("synth", {}, data.truth["parameters"], _argv(args)))
    _write(out, "truth.json", dumps(truth))
    print(f"wrote {params.banks} bank(s) x {params.cells} cells to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    configs = load_config(args.config)
    sev, freq = load_opinions(args.opinions)
    if not sev and not freq:
        log.warning("no opinions in %s; config unchanged", args.opinions)
    updated = apply_calibration(configs, sev, freq, args.reference_profile, args.reference_rate)
    target = Path(args.output) if args.output else Path(args.out) / "config.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    write_config(target, updated)
    print(f"wrote {target}")
    return EXIT_OK


COMMANDS = {
    "fit-severity": cmd_fit_severity,
    "fit-frequency": cmd_fit_frequency,
    "capital": cmd_capital,
    "synth": cmd_synth,
    "calibrate": cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OpCredError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        name = getattr(exc, "filename", None)
        print(f"error: {exc.strerror or exc}" + (f": {name}" if name else ""), file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
