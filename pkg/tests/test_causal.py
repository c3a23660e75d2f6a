"""Effect estimation: exact draw arithmetic, treatment handling, errors.

The snapped 2^-30 grid makes every headline aggregation identity exact,
so these tests compare bitwise (==) rather than within tolerance
wherever the design promises exactness.
"""

import numpy as np
import pytest

from causalbart.bart import BartParams, predict_posterior
from causalbart.causal import (PROPENSITY_CLIP, TreatmentSpec, binarize_by_median,
                               estimate_adrf, estimate_ate, estimate_cate,
                               estimate_leap, estimate_leap_preset, fit_binary_model,
                               fit_dose_model, fit_propensity, leap_anchors,
                               pool_adrf, recombine_cate, snap, unit_effect_draws)
from causalbart.errors import ConfigError, DataError
from causalbart.forest import ForestParams
from causalbart.synth import DgpSpec, generate

BP = BartParams(n_trees=15, n_burn=40, n_keep=60, seed=3)
FP = ForestParams(n_trees=60, seed=4)


@pytest.fixture(scope="module")
def binary_model():
    spec = DgpSpec(kind="binary", n=120, effect={"form": "constant", "tau": 2.5},
                   noise_sd=1.0, n_covariates=3, seed=21)
    d = generate(spec)
    return fit_binary_model(d, "y", TreatmentSpec(mode="binary"),
                            bart_params=BP, forest_params=FP)


@pytest.fixture(scope="module")
def dose_model():
    spec = DgpSpec(kind="dose", n=120, response={"shape": "plateau", "height": 4.0},
                   noise_sd=1.0, n_covariates=3, seed=22)
    d = generate(spec)
    return fit_dose_model(d, "y", TreatmentSpec(mode="continuous"), bart_params=BP)


def test_snap_is_idempotent_and_monotone():
    rng = np.random.default_rng(0)
    x = rng.normal(scale=50.0, size=1000)
    s = snap(x)
    assert np.array_equal(snap(s), s)
    assert np.all(np.abs(s - x) <= 2.0 ** -31 + 1e-18)
    order = np.argsort(x)
    assert np.all(np.diff(s[order]) >= 0.0)


def test_binarize_by_median():
    z, cutoff = binarize_by_median(np.array([0.0, 37.0, 80.0]))
    assert cutoff == 37.0
    assert np.array_equal(z, [0.0, 0.0, 1.0])
    with pytest.raises(DataError):
        binarize_by_median(np.full(5, 2.0))
    with pytest.raises(DataError):
        binarize_by_median(np.array([1.0, np.nan]))


def test_binary_treatment_column_passes_through(binary_model):
    d = binary_model.dataset
    assert binary_model.cutoff is None
    treat = d.column(d.treatment)
    assert np.array_equal(binary_model.z, treat.values.astype(float))


def test_design_layout(binary_model, dose_model):
    n = binary_model.dataset.n
    p_cov = binary_model.design.shape[1] - 2
    assert binary_model.design.shape == (n, p_cov + 2)
    assert binary_model.feature_names[-2:] == ["__treated", "__propensity"]
    assert binary_model.treat_index == p_cov
    assert np.array_equal(binary_model.design[:, p_cov], binary_model.z)
    assert dose_model.design.shape[1] == dose_model.treat_index + 1
    assert dose_model.feature_names[-1] == dose_model.dataset.treatment
    assert dose_model.propensity is None


def test_propensity_is_clipped(binary_model):
    p = binary_model.propensity
    assert p.shape == (binary_model.dataset.n,)
    assert p.min() >= PROPENSITY_CLIP[0]
    assert p.max() <= PROPENSITY_CLIP[1]


def test_propensity_tracks_confounder():
    spec = DgpSpec(kind="binary", n=400, effect={"form": "constant", "tau": 0.0},
                   confounding=1.5, noise_sd=1.0, n_covariates=3, seed=30)
    d = generate(spec)
    z = d.column(d.treatment).values.astype(float)
    p = fit_propensity(d, z, ForestParams(n_trees=150, seed=5))
    assert p[z == 1.0].mean() > p[z == 0.0].mean() + 0.05


def test_unit_draws_match_public_recomputation(binary_model):
    U = unit_effect_draws(binary_model)
    X1 = binary_model.design.copy()
    X1[:, binary_model.treat_index] = 1.0
    X0 = binary_model.design.copy()
    X0[:, binary_model.treat_index] = 0.0
    manual = snap(predict_posterior(binary_model.fit, X1)
                  - predict_posterior(binary_model.fit, X0))
    assert np.array_equal(U, manual)


def test_ate_is_exact_mean_of_unit_draws(binary_model):
    U = unit_effect_draws(binary_model)
    eff = estimate_ate(binary_model)
    assert eff.n_units == U.shape[1]
    assert np.array_equal(eff.draws, U.mean(axis=1))
    assert eff.estimate == float(np.mean(eff.draws))
    assert eff.variance == float(np.var(eff.draws, ddof=1))


def test_exclusion_paths(binary_model):
    n = binary_model.dataset.n
    keep_half = np.zeros(n, dtype=bool)
    keep_half[: n // 2] = True
    eff = estimate_ate(binary_model, exclude=keep_half)
    assert eff.n_units == n - n // 2
    with pytest.raises(DataError):
        estimate_ate(binary_model, exclude=np.ones(n, dtype=bool))
    with pytest.raises(DataError):
        estimate_ate(binary_model, exclude=np.ones(n - 1, dtype=bool))
    U = unit_effect_draws(binary_model)
    with pytest.raises(ConfigError):
        estimate_ate(binary_model, exclude=keep_half, unit_draws=U)


def test_cate_recombines_to_ate_bitwise(binary_model):
    ate = estimate_ate(binary_model)
    cate = estimate_cate(binary_model, "x1")
    assert cate.levels == ["Q1", "Q2", "Q3", "Q4"]
    assert int(cate.sizes.sum()) == binary_model.dataset.n
    assert np.array_equal(recombine_cate(cate), ate.draws)


def test_cate_pairwise_contrasts(binary_model):
    cate = estimate_cate(binary_model, "x1")
    g = len(cate.levels)
    assert set(cate.pairwise) == {(i, j) for i in range(g) for j in range(i + 1, g)}
    for (i, j), eff in cate.pairwise.items():
        assert np.array_equal(eff.draws, cate.draws[:, i] - cate.draws[:, j])
        assert eff.n_units == int(cate.sizes[i] + cate.sizes[j])


def test_cate_rejects_bad_moderators(binary_model):
    with pytest.raises(ConfigError):
        estimate_cate(binary_model, binary_model.dataset.treatment)
    with pytest.raises(ConfigError):
        estimate_cate(binary_model, "no_such_column")


def test_mode_pairing_is_enforced(binary_model, dose_model):
    with pytest.raises(ConfigError):
        unit_effect_draws(dose_model)
    with pytest.raises(ConfigError):
        estimate_adrf(binary_model)
    with pytest.raises(ConfigError):
        estimate_leap(binary_model, 0.0, 40.0)
    with pytest.raises(ConfigError):
        fit_binary_model(dose_model.dataset, "y", TreatmentSpec(mode="continuous"))
    with pytest.raises(ConfigError):
        fit_dose_model(dose_model.dataset, "y", TreatmentSpec(mode="binary"))


def test_adrf_grid_and_warnings(dose_model):
    grid = np.array([0.0, 20.0, 40.0, 60.0, 80.0])
    adrf = estimate_adrf(dose_model, grid=grid)
    assert adrf.value_draws.shape == (dose_model.fit.n_keep, grid.size)
    assert np.array_equal(adrf.grid, grid)
    assert adrf.warnings == []
    far = estimate_adrf(dose_model, grid=np.array([0.0, 500.0]))
    assert any("exceeds" in w for w in far.warnings)
    with pytest.raises(ConfigError):
        estimate_adrf(dose_model, grid=np.array([1.0]))


def test_leap_telescopes_exactly(dose_model):
    lo, mid, hi = leap_anchors(dose_model)
    assert lo < mid < hi
    a = estimate_leap(dose_model, lo, mid)
    b = estimate_leap(dose_model, mid, hi)
    c = estimate_leap(dose_model, lo, hi)
    assert np.array_equal(a.draws + b.draws, c.draws)
    zero = estimate_leap(dose_model, mid, mid)
    assert np.all(zero.draws == 0.0)


def test_leap_preset_covers_canonical_pairs(dose_model):
    lo, mid, hi = leap_anchors(dose_model)
    preset = estimate_leap_preset(dose_model)
    assert set(preset) == {(lo, mid), (mid, hi), (lo, hi)}
    for (a0, a1), eff in preset.items():
        assert eff.meta["a0"] == a0 and eff.meta["a1"] == a1


def test_adrf_matches_gridwise_leap(dose_model):
    grid = np.array([0.0, 40.0, 80.0])
    adrf = estimate_adrf(dose_model, grid=grid)
    leap = estimate_leap(dose_model, 0.0, 80.0)
    assert np.array_equal(adrf.value_draws[:, 2] - adrf.value_draws[:, 0],
                          leap.draws)


def test_pool_adrf_checks_grids(dose_model):
    grid = np.array([0.0, 40.0, 80.0])
    a = estimate_adrf(dose_model, grid=grid)
    b = estimate_adrf(dose_model, grid=np.array([0.0, 30.0, 80.0]))
    with pytest.raises(DataError):
        pool_adrf([a, b])
    with pytest.raises(DataError):
        pool_adrf([])
    curve = pool_adrf([a, estimate_adrf(dose_model, grid=grid)])
    assert np.array_equal(curve.grid, grid)
    assert curve.per_imputation.shape == (2, 3)
    assert len(curve.pooled) == 3
    for pt in curve.pooled:
        assert pt.ci_low <= pt.qbar <= pt.ci_high
        assert pt.se >= 0.0


def test_explicit_cutoff_and_degenerate_split():
    spec = DgpSpec(kind="dose", n=80, response={"shape": "linear", "height": 3.0},
                   noise_sd=1.0, n_covariates=3, seed=33)
    d = generate(spec)
    dose = d.column(d.treatment).values.astype(float)
    cut = float(np.quantile(dose, 0.7))
    m = fit_binary_model(d, "y", TreatmentSpec(mode="binary", cutoff=cut),
                         bart_params=BP, forest_params=FP)
    assert m.cutoff == cut
    assert np.array_equal(m.z, (dose > cut).astype(float))
    with pytest.raises(DataError):
        fit_binary_model(d, "y", TreatmentSpec(mode="binary", cutoff=dose.max()),
                         bart_params=BP, forest_params=FP)
