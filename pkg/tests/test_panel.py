import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opcred.errors import ConfigError, ParseError, ValidationError
from opcred.panel import (
    CellConfig,
    CountPanel,
    LossPanel,
    load_config,
    load_counts,
    load_losses,
    validate_panel,
    write_config,
    write_counts,
    write_losses,
)

from conftest import DATA


def _cfg(*cells, bank="b", threshold=1.0):
    return {(bank, c): CellConfig(bank, c, threshold) for c in cells}


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def test_sample_panel_shape(sample_panel):
    assert len(sample_panel.cells()) == 10
    assert all(sample_panel.n_obs(k) == 10 for k in sample_panel.cells())
    assert all(cfg.threshold == 1.0 for cfg in sample_panel.configs.values())


def test_empty_loss_file(tmp_path):
    path = _write(tmp_path / "l.csv", ["bank_id", "cell_id", "amount"], [])
    assert load_losses(path, _cfg("c1")).cells() == []


def test_loss_below_threshold_rejected(tmp_path):
    path = _write(tmp_path / "l.csv", ["bank_id", "cell_id", "amount"], [["b", "c1", 1.5], ["b", "c1", 0.9]])
    with pytest.raises(ValidationError, match="below threshold"):
        load_losses(path, _cfg("c1"))


def test_loss_file_errors_carry_line_numbers(tmp_path):
    path = _write(tmp_path / "l.csv", ["bank_id", "cell_id", "amount"], [["b", "c1", 1.5], ["b", "c1", "x"]])
    with pytest.raises(ParseError) as info:
        load_losses(path, _cfg("c1"))
    assert info.value.line == 3
    bad = _write(tmp_path / "h.csv", ["bank", "cell", "amount"], [])
    with pytest.raises(ParseError):
        load_losses(bad, _cfg("c1"))


def test_unknown_cell_rejected(tmp_path):
    path = _write(tmp_path / "l.csv", ["bank_id", "cell_id", "amount"], [["b", "zz", 1.5]])
    with pytest.raises(ConfigError, match="unknown cell"):
        load_losses(path, _cfg("c1"))


def test_counts_two_cells_three_years(tmp_path):
    rows = [["b", c, y, n] for c in ("c1", "c2") for y, n in zip((2001, 2002, 2003), (1, 0, 2))]
    panel = load_counts(_write(tmp_path / "n.csv", ["bank_id", "cell_id", "year", "count"], rows), _cfg("c1", "c2"))
    assert panel.years(("b", "c1")) == panel.years(("b", "c2")) == 3


def test_counts_duplicate_year_named(tmp_path):
    rows = [["b", "c1", 2001, 1], ["b", "c1", 2001, 2]]
    with pytest.raises(ValidationError, match="year=2001"):
        load_counts(_write(tmp_path / "n.csv", ["bank_id", "cell_id", "year", "count"], rows), _cfg("c1"))


def test_counts_sum():
    panel = CountPanel({("b", "c1"): ((2001, 2), (2002, 4))}, _cfg("c1"))
    assert panel.total(("b", "c1")) == 6


def test_counts_noncontiguous_years():
    panel = CountPanel({("b", "c1"): ((2010, 2), (2001, 4), (2005, 0))}, _cfg("c1"))
    assert panel.years(("b", "c1")) == 3
    assert panel.yearly(("b", "c1")).tolist() == [4, 0, 2]


def test_negative_count_rejected():
    with pytest.raises(ValidationError):
        CountPanel({("b", "c1"): ((2001, -1),)}, _cfg("c1"))


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        CellConfig("b", "c", 0.0)
    with pytest.raises(ConfigError):
        CellConfig("b", "c", 1.0, severity_scale=-2.0)
    (tmp_path / "c.json").write_text('[{"bank_id": "b", "cell_id": "c"}]')
    with pytest.raises(ConfigError, match="threshold"):
        load_config(tmp_path / "c.json")
    (tmp_path / "d.json").write_text("[{")
    with pytest.raises(ParseError):
        load_config(tmp_path / "d.json")


def test_validate_sample(sample_panel):
    report = validate_panel(sample_panel)
    assert report.ok
    assert all(c.severity_qualified and c.observations == 10 for c in report.cells)


def test_validate_flags_small_cells():
    cfg = _cfg("c1", "c2", "c3")
    panel = LossPanel({("b", "c1"): (1.5, 2.0), ("b", "c2"): (1.5, 2.0, 3.0)}, cfg)
    report = validate_panel(panel)
    assert report.excluded_cells() == [("b", "c1"), ("b", "c3")]
    assert next(c for c in report.cells if c.cell_id == "c1").note == "excluded from severity credibility"


def test_validate_distinct_thresholds_for_counts():
    cfg = {("b", "c1"): CellConfig("b", "c1", 1.0), ("b", "c2"): CellConfig("b", "c2", 2.0)}
    counts = CountPanel({("b", "c1"): ((1, 1),), ("b", "c2"): ((1, 1),)}, cfg)
    report = validate_panel(counts)
    assert not report.ok and "distinct thresholds" in report.issues[0]
    losses = LossPanel({("b", "c1"): (1.5,), ("b", "c2"): (2.5,)}, cfg)
    assert validate_panel(losses).ok


amounts = st.lists(st.floats(1.0, 1e9, allow_nan=False), min_size=0, max_size=8)


@settings(max_examples=30, deadline=None)
@given(st.dictionaries(st.sampled_from(["c1", "c2", "c3"]), amounts))
def test_loss_round_trip(tmp_path_factory, data):
    tmp = tmp_path_factory.mktemp("rt")
    cfg = _cfg("c1", "c2", "c3")
    panel = LossPanel({("b", c): tuple(v) for c, v in data.items() if v}, cfg)
    write_losses(tmp / "l.csv", panel)
    again = load_losses(tmp / "l.csv", cfg)
    assert sorted(again.records()) == sorted(panel.records())
    write_config(tmp / "c.json", cfg)
    assert load_config(tmp / "c.json") == cfg


def test_count_round_trip(tmp_path):
    cfg = _cfg("c1", "c2")
    panel = CountPanel({("b", "c1"): ((2001, 3), (2003, 0)), ("b", "c2"): ((2002, 7),)}, cfg)
    write_counts(tmp_path / "n.csv", panel)
    assert sorted(load_counts(tmp_path / "n.csv", cfg).records()) == sorted(panel.records())


def test_every_loss_at_or_above_threshold(sample_panel):
    for key in sample_panel.cells():
        assert np.all(sample_panel.amounts(key) >= sample_panel.configs[key].threshold)


def test_bundled_data_present():
    assert (DATA / "sample_losses.csv").is_file()
