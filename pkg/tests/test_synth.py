"""Synthetic benchmark generators and their ground-truth oracles."""

from __future__ import annotations

import numpy as np
import pytest

from causalbart.errors import ConfigError, DataError
from causalbart.synth import (DgpSpec, apply_missingness, generate,
                              oracle_truth)


def test_constant_effect_oracle_is_exact():
    spec = DgpSpec(kind="binary", effect={"form": "constant", "tau": 3.0})
    o = oracle_truth(spec, "ate")
    assert o["value"] == 3.0 and o["mc_se"] == 0.0


def test_subgroup_oracle_is_half_tau():
    spec = DgpSpec(kind="binary", effect={"form": "subgroup", "tau": 3.0})
    assert oracle_truth(spec, "ate")["value"] == 1.5


def test_null_oracle_is_zero():
    spec = DgpSpec(kind="binary", effect={"form": "null"})
    assert oracle_truth(spec, "ate")["value"] == 0.0


def test_mc_oracle_agrees_with_analytic():
    spec = DgpSpec(kind="binary", effect={"form": "subgroup", "tau": 2.0},
                   baseline="nonlinear", seed=3)
    mc = oracle_truth(spec, "ate", method="mc", mc_draws=200_000)
    assert mc["mc_se"] > 0
    assert abs(mc["value"] - 1.0) < 4 * mc["mc_se"] + 1e-3


def test_unconfounded_group_difference_matches_oracle():
    # confounding 0: group-mean difference is unbiased for the oracle
    diffs = []
    for seed in range(12):
        spec = DgpSpec(kind="binary", n=800, confounding=0.0,
                       effect={"form": "constant", "tau": 3.0}, seed=seed)
        d = generate(spec)
        z = d.column("z").values
        y = d.column("y").values
        diffs.append(y[z == 1].mean() - y[z == 0].mean())
    se = np.std(diffs, ddof=1) / np.sqrt(len(diffs))
    assert abs(np.mean(diffs) - 3.0) < 3 * se + 0.05


def test_dose_range_and_integrality():
    spec = DgpSpec(kind="dose", n=500, seed=2)
    d = generate(spec)
    dose = d.column("dose").values
    assert dose.min() >= 0 and dose.max() <= 80
    assert np.all(dose == np.round(dose))


def test_plateau_response_is_flat_after_knee():
    spec = DgpSpec(kind="dose", response={"shape": "plateau", "height": 4.0})
    o = oracle_truth(spec, "adrf")
    curve = np.asarray(o["curve"])
    grid = np.asarray(o["grid"])
    after = curve[grid >= 40]
    assert np.ptp(after) == 0.0
    assert curve[-1] - curve[0] == 4.0


def test_leap_oracle_telescopes():
    spec = DgpSpec(kind="dose", response={"shape": "plateau", "height": 4.0})
    l1 = oracle_truth(spec, ("leap", 0, 37))["value"]
    l2 = oracle_truth(spec, ("leap", 37, 80))["value"]
    l3 = oracle_truth(spec, ("leap", 0, 80))["value"]
    assert l1 + l2 == pytest.approx(l3, abs=1e-12)


def test_generate_is_deterministic():
    spec = DgpSpec(kind="binary", n=100, seed=9)
    a = generate(spec).column("y").values
    b = generate(spec).column("y").values
    assert np.array_equal(a, b)


def test_mcar_removes_exact_count_and_preserves_observed():
    spec = DgpSpec(kind="binary", n=200, seed=4,
                   missingness=[{"kind": "MCAR", "column": "y", "rate": 0.3}])
    full = generate(spec)
    holed = apply_missingness(full, spec)
    y0, y1 = full.column("y"), holed.column("y")
    assert y1.n_missing == 60
    assert np.array_equal(y1.values[y1.mask], y0.values[y1.mask])


def test_nmar_top_decile_shifts_observed_mean_down():
    spec = DgpSpec(kind="binary", n=300, seed=5,
                   missingness=[{"kind": "NMAR", "column": "y",
                                 "rate": 0.1, "style": "top"}])
    full = generate(spec)
    d = apply_missingness(full, spec)
    y = d.column("y")
    assert y.observed().mean() < full.column("y").values.mean()
    # exactly the 30 largest got dropped
    dropped = full.column("y").values[~y.mask]
    kept = full.column("y").values[y.mask]
    assert dropped.min() >= kept.max() - 1e-12


def test_mar_requires_fully_observed_predictors():
    spec = DgpSpec(kind="binary", n=100, seed=6,
                   missingness=[{"kind": "MCAR", "column": "x1", "rate": 0.2},
                                {"kind": "MAR", "column": "y", "rate": 0.2,
                                 "predictors": ["x1"]}])
    with pytest.raises(DataError):
        apply_missingness(generate(spec), spec)


def test_mar_threshold_restricts_eligibility():
    spec = DgpSpec(kind="binary", n=200, seed=7,
                   missingness=[{"kind": "MAR", "column": "y", "rate": 0.2,
                                 "predictors": ["x1"], "threshold": 0.0}])
    full = generate(spec)
    d = apply_missingness(full, spec)
    x1 = full.column("x1").values
    missing = ~d.column("y").mask
    # deletions only where the standardized predictor is above threshold
    zx = (x1 - x1.mean()) / x1.std()
    assert np.all(zx[missing] > 0.0)


def test_emptying_column_rejected():
    spec = DgpSpec(kind="binary", n=50, seed=8,
                   missingness=[{"kind": "MCAR", "column": "y", "rate": 0.99}])
    full = generate(spec)
    spec2 = DgpSpec(kind="binary", n=50, seed=8,
                    missingness=[{"kind": "MCAR", "column": "y", "rate": 0.99},
                                 {"kind": "MCAR", "column": "y", "rate": 0.99}])
    with pytest.raises(DataError):
        apply_missingness(full, spec2)


def test_spec_validation():
    with pytest.raises(ConfigError):
        DgpSpec(kind="weird")
    with pytest.raises(ConfigError):
        DgpSpec(n_covariates=2)
    with pytest.raises(ConfigError):
        DgpSpec(kind="dose", response={"shape": "spiral"})
    with pytest.raises(ConfigError):
        oracle_truth(DgpSpec(kind="binary"), "adrf")
    with pytest.raises(ConfigError):
        oracle_truth(DgpSpec(kind="binary"), "banana")


def test_oracle_independent_of_seed():
    a = oracle_truth(DgpSpec(kind="dose", seed=1), "adrf")["curve"]
    b = oracle_truth(DgpSpec(kind="dose", seed=99), "adrf")["curve"]
    assert a == b
