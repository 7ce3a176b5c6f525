import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcred.credibility import FixedPointSettings
from opcred.errors import DegenerateDataError, DomainError, InsufficientDataError
from opcred.panel import CellConfig, LossPanel
from opcred.severity import (
    fit_bank_severity,
    fit_industry_severity,
    fit_severity,
    industry_profile_injection,
    pareto_mle,
    severity_weight,
)

from conftest import SAMPLE_BANK, SAMPLE_INDUSTRY, SAMPLE_MLE


def _panel(samples, bank="b", threshold=1.0, scales=None):
    cfg, data = {}, {}
    for j, x in enumerate(samples):
        key = (bank, f"c{j + 1}")
        a = 1.0 if scales is None else scales[j]
        cfg[key] = CellConfig(bank, key[1], threshold, severity_scale=a)
        if len(x):
            data[key] = tuple(float(v) for v in x)
    return LossPanel(data, cfg)


def _pareto(rng, tail, n, threshold=1.0):
    return threshold * (1.0 - rng.random(n)) ** (-1.0 / tail)


# ----------------------------------------------------------------- MLE


def test_mle_sample_row(sample_panel):
    for key, expected in zip(sample_panel.cells(), SAMPLE_MLE):
        _, mle = pareto_mle(sample_panel.amounts(key), 1.0)
        assert mle == pytest.approx(expected, abs=0.001)


def test_mle_hand_computation():
    raw, mle = pareto_mle([math.e, math.e], 1.0)
    assert raw == pytest.approx(1.0, rel=1e-15)
    assert mle == pytest.approx(0.5, rel=1e-15)


def test_mle_scale_divides():
    x = [1.5, 2.0, 7.0]
    assert pareto_mle(x, 1.0, 4.0)[0] == pytest.approx(pareto_mle(x, 1.0)[0] / 4, rel=1e-15)


def test_mle_errors():
    with pytest.raises(InsufficientDataError):
        pareto_mle([2.0], 1.0)
    with pytest.raises(DegenerateDataError):
        pareto_mle([1.0, 1.0, 1.0], 1.0)
    with pytest.raises(DomainError):
        pareto_mle([0.5, 2.0], 1.0)


def test_mle_unbiased_and_variance():
    rng = np.random.default_rng(11)
    x = _pareto(rng, 2.0, (10_000, 10))
    mle = 9.0 / np.log(x).sum(axis=1)
    se = mle.std(ddof=1) / math.sqrt(mle.size)
    assert abs(mle.mean() - 2.0) < 3 * se
    assert mle.var(ddof=1) == pytest.approx(4.0 / 8.0, rel=0.10)
    # the library estimator agrees with the vectorized formula
    assert pareto_mle(x[0], 1.0)[1] == pytest.approx(mle[0], rel=1e-13)


def test_threshold_stability():
    # above a higher level the excesses stay Pareto with the same tail
    rng = np.random.default_rng(5)
    x = _pareto(rng, 1.5, 200_000)
    hi = x[x >= 4.0]
    low_est = pareto_mle(x, 1.0)[1]
    hi_est = pareto_mle(hi, 4.0)[1]
    se = hi_est / math.sqrt(hi.size - 2)
    assert abs(hi_est - low_est) < 4 * se
    assert abs(hi_est - 1.5) < 4 * se


# -------------------------------------------------------------- weights


def test_weight_examples():
    assert severity_weight(10, 3.157, math.sqrt(1.116)) == pytest.approx(0.446, abs=0.001)
    assert severity_weight(1000, 1.0, 1.0) == pytest.approx(0.998, rel=1e-15)
    assert severity_weight(3, 1.0, 1e-8) < 1e-15
    assert severity_weight(2, 1.0, 1.0) == 0.0


@given(st.integers(3, 10_000), st.floats(0.01, 100), st.floats(0.01, 100))
def test_weight_increases_with_observations(k, profile, sd):
    assert 0 <= severity_weight(k, profile, sd) < severity_weight(k + 1, profile, sd) < 1


# ------------------------------------------------------------ bank level


def test_sample_bank_fit(sample_panel):
    prof, cells = fit_bank_severity(sample_panel)
    assert prof.bank_only_profile == pytest.approx(3.157, abs=0.005)
    assert prof.between_variance == pytest.approx(1.116, abs=0.005)
    assert not prof.degenerate
    for c, expected in zip(cells, SAMPLE_BANK):
        assert c.weight == pytest.approx(0.446, abs=0.002)
        assert c.bank_credibility == pytest.approx(expected, abs=0.005)
        assert c.credibility == c.bank_credibility


def test_picard_and_alternating_agree(sample_panel):
    a, _ = fit_bank_severity(sample_panel, method="alternating")
    p, _ = fit_bank_severity(sample_panel, FixedPointSettings(1e-13, 5000), method="picard")
    assert a.bank_only_profile == pytest.approx(p.bank_only_profile, rel=1e-9)
    assert a.between_variance == pytest.approx(p.between_variance, rel=1e-8)


def test_unknown_method(sample_panel):
    with pytest.raises(DomainError):
        fit_bank_severity(sample_panel, method="newton")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 12), st.integers(3, 40))
def test_equal_counts_closed_form(seed, n_cells, k):
    # with a common K all weights coincide, so the fixed point reduces to a
    # closed form in the sample mean and sample variance of the cell MLEs
    rng = np.random.default_rng(seed)
    tails = rng.gamma(4.0, 0.5, n_cells)
    panel = _panel([_pareto(rng, t, k) for t in tails])
    prof, cells = fit_bank_severity(panel)
    theta = np.array([c.mle for c in cells])
    mean, s2, w = theta.mean(), theta.var(ddof=1), k - 2
    tau2 = (w * s2 - mean**2) / (w + 1)
    if tau2 > 1e-9 * mean**2:
        assert not prof.degenerate
        assert prof.between_variance == pytest.approx(tau2, rel=1e-8)
        assert prof.bank_only_profile == pytest.approx(mean, rel=1e-12)
    elif tau2 < -1e-9 * mean**2:
        assert prof.degenerate
        assert prof.bank_only_profile == pytest.approx(mean, rel=1e-12)


def test_identical_cells_degenerate():
    x = [1.2, 1.9, 2.5, 4.0, 8.0]
    prof, cells = fit_bank_severity(_panel([x, list(reversed(x))]))
    assert prof.degenerate and prof.between_variance == 0.0
    assert cells[0].mle == cells[1].mle
    assert prof.bank_only_profile == cells[0].mle
    assert all(c.weight == 0.0 and c.credibility == cells[0].mle for c in cells)


def test_degenerate_fallback_is_count_weighted_mean():
    samples = [[1.1, 1.3, 2.0, 2.2], [1.2, 1.5, 1.6, 3.0, 3.5, 4.0]]
    prof, cells = fit_bank_severity(_panel(samples))
    assert prof.degenerate
    w = [c.n_obs - 2 for c in cells]
    expected = math.fsum(wi * c.mle for wi, c in zip(w, cells)) / sum(w)
    assert prof.bank_only_profile == expected


def test_small_cells_excluded_and_shrunk(sample_panel):
    cfg = dict(sample_panel.configs)
    cfg[("bank1", "tiny")] = CellConfig("bank1", "tiny", 1.0)
    cfg[("bank1", "empty")] = CellConfig("bank1", "empty", 1.0)
    data = {k: tuple(sample_panel.amounts(k)) for k in sample_panel.cells()}
    data[("bank1", "tiny")] = (1.5, 3.0)
    prof, cells = fit_bank_severity(LossPanel(data, cfg))
    ref, _ = fit_bank_severity(sample_panel)
    assert prof.bank_only_profile == ref.bank_only_profile
    by_id = {c.cell_id: c for c in cells}
    for name in ("tiny", "empty"):
        assert by_id[name].excluded and by_id[name].weight == 0.0
        assert by_id[name].credibility == prof.bank_only_profile
    assert by_id["tiny"].mle is not None and by_id["empty"].mle is None


def test_bank_needs_two_qualified_cells():
    with pytest.raises(InsufficientDataError):
        fit_bank_severity(_panel([[1.5, 2.0, 3.0], [1.5, 2.0]]))


def test_scale_invariance(sample_panel):
    scales = [0.5, 1.0, 2.0, 1.5, 0.8, 1.2, 3.0, 0.7, 1.1, 0.9]
    samples = [sample_panel.amounts(k) for k in sample_panel.cells()]
    base = fit_severity(_panel(samples, scales=scales), industry=industry_profile_injection(5.0, 0.9))
    scaled = fit_severity(_panel(samples, scales=[7 * a for a in scales]),
                          industry=industry_profile_injection(5.0 / 7, 0.9 / 49))
    for c0, c1 in zip(base.cells, scaled.cells):
        assert c1.weight == pytest.approx(c0.weight, rel=1e-10)
        assert c1.tail_parameter == pytest.approx(c0.tail_parameter, rel=1e-10)
        assert c1.credibility == pytest.approx(c0.credibility / 7, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shrinkage_range(seed):
    rng = np.random.default_rng(seed)
    panel = _panel([_pareto(rng, t, int(n)) for t, n in zip(rng.gamma(6, 0.4, 8), rng.integers(3, 30, 8))])
    fit = fit_severity(panel, industry=industry_profile_injection(float(rng.uniform(1, 5)), 0.5))
    bank = fit.banks["b"]
    lo, hi = sorted((bank.bank_only_profile, fit.industry.collective))
    assert lo - 1e-12 <= bank.profile <= hi + 1e-12
    for c in fit.cells:
        lo, hi = sorted((c.mle, bank.profile))
        assert lo - 1e-12 <= c.credibility <= hi + 1e-12


def test_synthetic_bank_profile_within_three_se():
    rng = np.random.default_rng(7)
    est = []
    for _ in range(200):
        tails = rng.gamma(2.0**2 / 0.3, 0.3 / 2.0, 20)
        prof, _ = fit_bank_severity(_panel([_pareto(rng, t, 50) for t in tails]))
        est.append(prof.bank_only_profile)
    est = np.array(est)
    assert abs(est.mean() - 2.0) < 3 * est.std(ddof=1) / math.sqrt(est.size)


# -------------------------------------------------------- industry level


def test_sample_industry_injection(sample_panel):
    fit = fit_severity(sample_panel, industry=industry_profile_injection(5.0, 0.9))
    bank = fit.banks["bank1"]
    assert bank.bank_weight == pytest.approx(0.782, abs=0.002)
    assert bank.profile == pytest.approx(3.558, abs=0.005)
    for c, expected in zip(fit.cells, SAMPLE_INDUSTRY):
        assert c.credibility == pytest.approx(expected, abs=0.005)


def test_injection_zero_variance_forces_collective(sample_panel):
    fit = fit_severity(sample_panel, industry=industry_profile_injection(1.0, 0.0))
    assert fit.banks["bank1"].bank_weight == 0.0
    assert fit.banks["bank1"].profile == 1.0


@pytest.mark.parametrize("args", [(-1.0, 0.9), (0.0, 0.9), (1.0, -0.1), (math.inf, 1.0)])
def test_injection_domain(args):
    with pytest.raises(DomainError):
        industry_profile_injection(*args)


def _copy_bank(panel, bank):
    cfg = {(bank, k[1]): replace(c, bank_id=bank) for k, c in panel.configs.items()}
    data = {(bank, k[1]): tuple(panel.amounts(k)) for k in panel.cells()}
    return cfg, data


def test_identical_banks(sample_panel):
    cfg, data = {}, {}
    for b in ("b1", "b2", "b3"):
        c, d = _copy_bank(sample_panel, b)
        cfg.update(c)
        data.update(d)
    fit = fit_industry_severity(LossPanel(data, cfg))
    ref, ref_cells = fit_bank_severity(sample_panel)
    assert fit.industry.degenerate and fit.industry.collective_variance == 0.0
    assert fit.industry.collective == ref.bank_only_profile
    for prof in fit.banks.values():
        assert prof.profile == prof.bank_only_profile == ref.bank_only_profile
    assert [c.credibility for c in fit.cells] == [c.bank_credibility for c in ref_cells] * 3


def test_single_cell_bank_excluded(sample_panel):
    cfg, data = {}, {}
    for b in ("b1", "b2"):
        c, d = _copy_bank(sample_panel, b)
        cfg.update(c)
        data.update(d)
    cfg[("lone", "c1")] = CellConfig("lone", "c1", 1.0)
    data[("lone", "c1")] = (1.5, 2.0, 9.0)
    fit = fit_industry_severity(LossPanel(data, cfg))
    assert fit.banks["lone"].excluded
    assert fit.cell("lone", "c1").credibility == fit.industry.collective
    assert any("lone" in n for n in fit.notes)
    fit = fit_industry_severity(LossPanel(data, cfg), industry=industry_profile_injection(4.0, 0.5))
    assert fit.cell("lone", "c1").credibility == 4.0


def test_industry_needs_two_banks(sample_panel):
    with pytest.raises(InsufficientDataError):
        fit_industry_severity(sample_panel)
