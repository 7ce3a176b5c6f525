"""Hierarchical estimates against ground truth on synthetic industries."""

import numpy as np

from opcred.frequency import fit_industry_frequency
from opcred.severity import fit_industry_severity
from opcred.synth import SynthParams, generate


def sweep(seeds=range(200)):
    err = {"sev_mle": 0.0, "sev_cred": 0.0, "freq_mle": 0.0, "freq_cred": 0.0}
    for seed in seeds:
        data = generate(SynthParams(banks=3, cells=10, years=10, losses_per_cell=10, seed=seed))
        sev = fit_industry_severity(data.losses)
        freq = fit_industry_frequency(data.counts)
        for fit, kind in ((sev, "sev"), (freq, "freq")):
            field = "severity_profile" if kind == "sev" else "frequency_profile"
            for c in fit.cells:
                truth = data.truth["banks"][c.bank_id]["cells"][c.cell_id][field]
                err[f"{kind}_mle"] += (c.mle - truth) ** 2
                err[f"{kind}_cred"] += (c.credibility - truth) ** 2
    return err


def test_hierarchical_beats_mle():
    err = sweep()
    assert err["sev_cred"] < err["sev_mle"]
    assert err["freq_cred"] < err["freq_mle"]
    assert np.isfinite(list(err.values())).all()
