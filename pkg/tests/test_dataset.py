"""Typed table loading, summaries, and round-trip persistence."""

from __future__ import annotations

import numpy as np
import pytest

from causalbart.dataset import (Column, Dataset, load_table, missingness_profile,
                                save_table, schema_of, summarize)
from causalbart.errors import ConfigError, DataError


def _col(name, kind, vals, mask=None):
    vals = np.asarray(vals, dtype=object if kind == "categorical" else np.float64)
    if mask is None:
        mask = np.ones(len(vals), dtype=bool)
    return Column(name, kind, vals, np.asarray(mask, dtype=bool))


def _simple(tmp_path, text):
    p = tmp_path / "t.csv"
    p.write_text(text)
    return p


SCHEMA = {"columns": {"id": "count", "dose": "count", "y": "continuous"},
          "roles": {"id": ["id"], "treatment": ["dose"], "outcome": ["y"]}}


def test_load_parses_kinds_and_missing_tokens(tmp_path):
    p = _simple(tmp_path, "id,dose,y\n1,0,1.5\n2,NA,2.25\n3,80,\n")
    d = load_table(p, SCHEMA)
    assert d.n == 3
    dose = d.column("dose")
    assert not dose.mask[1] and np.isnan(dose.values[1])
    y = d.column("y")
    assert not y.mask[2]
    assert y.values[0] == 1.5


def test_load_rejects_ragged_rows(tmp_path):
    p = _simple(tmp_path, "id,dose,y\n1,0\n")
    with pytest.raises(DataError, match="row"):
        load_table(p, SCHEMA)


def test_load_rejects_unparseable_cell(tmp_path):
    p = _simple(tmp_path, "id,dose,y\n1,zero,1.0\n")
    with pytest.raises(DataError, match="dose"):
        load_table(p, SCHEMA)


def test_load_rejects_role_for_absent_column(tmp_path):
    p = _simple(tmp_path, "id,dose,y\n1,0,1.0\n")
    schema = {"columns": SCHEMA["columns"],
              "roles": {**SCHEMA["roles"], "covariate": ["ghost"]}}
    with pytest.raises(ConfigError):
        load_table(p, schema)


def test_summary_of_dose_triple():
    d = Dataset(columns=[_col("a", "count", [0.0, 37.0, 80.0])], roles={})
    s = summarize(d)["a"]
    assert s["min"] == 0 and s["max"] == 80
    assert s["median"] == 37.0
    assert s["mean"] == 39.0
    assert abs(s["sd"] - 40.04) < 0.01


def test_summary_of_constant_column():
    d = Dataset(columns=[_col("a", "count", [37.0, 37.0, 37.0])], roles={})
    s = summarize(d)["a"]
    assert s["mean"] == 37.0 and s["sd"] == 0.0


def test_summary_schema_has_attendance_row_shape():
    # numeric summaries expose min / median / mean / sd / max + missing rate
    d = Dataset(columns=[_col("a", "continuous", [1.0, 2.0])], roles={})
    s = summarize(d)["a"]
    assert {"min", "median", "mean", "sd", "max", "missing_rate"} <= set(s)


def test_even_length_median_is_midpoint():
    d = Dataset(columns=[_col("a", "continuous", [1.0, 2.0, 3.0, 10.0])], roles={})
    assert summarize(d)["a"]["median"] == 2.5


def test_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(5)
    vals = rng.standard_normal(20)
    mask = rng.uniform(size=20) > 0.2
    v = vals.copy()
    v[~mask] = np.nan
    cat = np.array([["red", "blue", "green"][i % 3] for i in range(20)], dtype=object)
    d = Dataset(columns=[_col("y", "continuous", v, mask),
                         _col("g", "categorical", cat)],
                roles={"outcome": ["y"]})
    p = tmp_path / "rt.csv"
    save_table(d, p)
    d2 = load_table(p, schema_of(d))
    y2 = d2.column("y")
    assert np.array_equal(y2.mask, mask)
    assert np.array_equal(y2.values[mask], vals[mask])
    assert list(d2.column("g").values) == list(cat)


def test_missingness_profile_counts_and_crosstab():
    y = _col("y", "continuous", [1.0, np.nan, 3.0, np.nan], [1, 0, 1, 0])
    z = _col("z", "binary", [0.0, 0.0, 1.0, 1.0])
    d = Dataset(columns=[z, y], roles={"treatment": ["z"], "outcome": ["y"]})
    prof = missingness_profile(d)
    assert prof["columns"]["y"]["rate"] == 0.5
    assert prof["columns"]["z"]["rate"] == 0.0
    assert "outcome_by_treatment" in prof


def test_column_validation():
    with pytest.raises(DataError):
        _col("b", "binary", [0.0, 2.0])
    with pytest.raises(DataError):
        _col("c", "count", [1.5])
    with pytest.raises(DataError):
        Dataset(columns=[_col("a", "continuous", [1.0]),
                         _col("a", "continuous", [2.0])], roles={})


def test_two_treatment_roles_rejected():
    with pytest.raises(ConfigError):
        Dataset(columns=[_col("a", "binary", [0.0, 1.0]),
                         _col("b", "binary", [0.0, 1.0])],
                roles={"treatment": ["a", "b"]})
