"""Acceptance suite: one test per shipping criterion.

Each test is self-contained, states its thresholds inline, and prints a
one-line verdict with the measured numbers (visible under pytest -s or
on failure; pytest -v supplies the pass/fail line per criterion). The
stochastic criteria fix their seeds, so a pass here is reproducible.

Budget note: criteria 3-7 fit and refit tree ensembles many times; the
whole module runs in roughly half an hour on one core.
"""

import time
from pathlib import Path

import numpy as np
import pytest

pytestmark = pytest.mark.acceptance

from causalbart.bart import (BartParams, fit_bart, posterior_summary,
                             predict_posterior, predict_trees)
from causalbart.causal import (TreatmentSpec, estimate_adrf, estimate_ate,
                               estimate_cate, estimate_leap, fit_binary_model,
                               fit_dose_model, pool_adrf, recombine_cate, snap,
                               unit_effect_draws)
from causalbart.forest import ForestParams
from causalbart.mice import impute_mice
from causalbart.pipeline import run_pipeline
from causalbart.pooling import fmi_from_riv, pool_rubin
from causalbart.support import assess_support
from causalbart.synth import DgpSpec, apply_missingness, generate, oracle_truth
from helpers import friedman

PROP_FOREST = ForestParams(n_trees=50, seed=0)


def _pooled_ate(stack, bart_kw, seed):
    """Fit per imputation, estimate, pool at 95%."""
    est, var = [], []
    for i, comp in enumerate(stack.datasets):
        model = fit_binary_model(
            comp, "y", TreatmentSpec(mode="binary"),
            bart_params=BartParams(seed=1000 * seed + i, **bart_kw),
            forest_params=PROP_FOREST)
        eff = estimate_ate(model)
        est.append(eff.estimate)
        var.append(eff.variance)
    return pool_rubin(np.array(est), np.array(var), level=0.95)


def test_criterion_01_published_fmi_riv_consistency():
    """Stored fmi values must follow from their riv values at m=100."""
    t0 = time.time()
    rows = {"row1": (0.432, 0.304), "row2": (0.120, 0.109),
            "row3": (0.154, 0.135), "row4": (0.331, 0.251)}
    worst = 0.0
    for riv, fmi in rows.values():
        got = fmi_from_riv(riv, m=100)
        worst = max(worst, abs(got - fmi))
        assert abs(got - fmi) <= 0.003
    el = time.time() - t0
    assert el < 1.0
    print(f"criterion 1: 4 fmi/riv rows consistent, worst gap {worst:.5f} "
          f"({el:.2f}s)")


def test_criterion_02_pooling_identities_hold():
    """Rubin identities on 1000 random (m, estimates, variances) tuples."""
    t0 = time.time()
    rng = np.random.default_rng(2)
    for _ in range(1000):
        m = int(rng.integers(2, 40))
        q = rng.normal(scale=rng.uniform(0.5, 3.0), size=m)
        v = rng.uniform(0.05, 2.0, size=m)
        p = pool_rubin(q, v, level=0.95)
        w = v.mean()
        b = q.var(ddof=1)
        assert p.qbar == q.mean()
        assert p.within == w
        assert p.between == b
        assert p.total == w + (1.0 + 1.0 / m) * b
        riv = (1.0 + 1.0 / m) * b / w
        assert np.isclose(p.riv, riv, rtol=1e-12, atol=0.0)
        assert np.isclose(p.df, (m - 1) * (1.0 + 1.0 / riv) ** 2,
                          rtol=1e-12, atol=0.0)
        assert np.isclose(p.fmi, (riv + 2.0 / (p.df + 3.0)) / (1.0 + riv),
                          rtol=1e-12, atol=0.0)
        half = (p.ci_high - p.ci_low) / 2.0
        assert np.isclose((p.ci_low + p.ci_high) / 2.0, p.qbar,
                          rtol=0.0, atol=1e-10)
        assert half > 0.0
    el = time.time() - t0
    assert el < 5.0
    print(f"criterion 2: 1000 pooling tuples, all identities hold ({el:.2f}s)")


def test_criterion_03_default_surface_accuracy():
    """Defaults on the 10-feature benchmark surface, 5 seeds.

    Held-out rmse <= 2.0 and 90% intervals covering >= 80% of the true
    surface, within 10 minutes.
    """
    t0 = time.time()
    rmses, covers = [], []
    for seed in range(5):
        X, y, _ = friedman(200, sigma=1.0, seed=seed)
        Xt, _, ft = friedman(200, sigma=1.0, seed=10_000 + seed)
        fit = fit_bart(X, y, BartParams(seed=seed))
        s = posterior_summary(predict_posterior(fit, Xt), level=0.90)
        rmses.append(float(np.sqrt(np.mean((s["mean"] - ft) ** 2))))
        covers.append(float(np.mean((s["lo"] <= ft) & (ft <= s["hi"]))))
    el = time.time() - t0
    assert max(rmses) <= 2.0
    assert min(covers) >= 0.80
    assert el < 600.0
    print(f"criterion 3: rmse {min(rmses):.2f}-{max(rmses):.2f}, "
          f"coverage {min(covers):.0%}-{max(covers):.0%} over 5 seeds "
          f"({el:.0f}s)")


def _c4_stack(seed, tau):
    spec = DgpSpec(kind="binary", n=1000, effect={"form": "constant", "tau": tau},
                   confounding=1.0, noise_sd=2.0, n_covariates=5,
                   missingness=[{"kind": "MCAR", "column": "y", "rate": 0.15}],
                   seed=seed)
    d = apply_missingness(generate(spec), spec)
    return impute_mice(d, m=5, n_iter=3,
                       params=ForestParams(n_trees=30, seed=seed), seed=seed + 1)


def test_criterion_04_ate_recovery_with_imputation():
    """Confounded constant-effect DGP, n=1000, m=5, 20 seeds per arm.

    Pooled estimate within +/-0.5 of 3.0 in >= 18/20 seeds, 95% CI
    covering in >= 17/20; on the null DGP the CI contains 0 in >=
    18/20. Total runtime <= 30 minutes.
    """
    t0 = time.time()
    bart_kw = dict(n_trees=50, n_burn=100, n_keep=200)
    near, covered = 0, 0
    for seed in range(20):
        p = _pooled_ate(_c4_stack(seed, 3.0), bart_kw, seed)
        near += abs(p.qbar - 3.0) <= 0.5
        covered += p.ci_low <= 3.0 <= p.ci_high
    null_covered = 0
    for seed in range(20):
        p = _pooled_ate(_c4_stack(500 + seed, 0.0), bart_kw, 500 + seed)
        null_covered += p.ci_low <= 0.0 <= p.ci_high
    el = time.time() - t0
    assert near >= 18
    assert covered >= 17
    assert null_covered >= 18
    assert el < 1800.0
    print(f"criterion 4: within 0.5 in {near}/20, ci covered {covered}/20, "
          f"null ci covered {null_covered}/20 ({el:.0f}s)")


def test_criterion_05_dose_curve_shape_recovery():
    """Plateau dose DGP, n=1000, 10 seeds, m=3 imputations.

    Rise beyond dose 40 at most 25% of the total rise and curve-oracle
    correlation >= 0.9, each in >= 8/10 seeds; the flat-region jump CI
    contains 0 while the rising-region jump excludes it in >= 8/10.
    Runtime <= 30 minutes.
    """
    t0 = time.time()
    grid = tuple(float(a) for a in range(0, 81, 10))
    shape_ok, leap_ok = 0, 0
    for seed in range(10):
        spec = DgpSpec(kind="dose", n=1000,
                       response={"shape": "plateau", "height": 4.0},
                       noise_sd=3.0, n_covariates=5,
                       missingness=[{"kind": "MCAR", "column": "y", "rate": 0.10}],
                       seed=seed)
        d = apply_missingness(generate(spec), spec)
        truth = oracle_truth(spec, "adrf")
        stack = impute_mice(d, m=3, n_iter=3,
                            params=ForestParams(n_trees=30, seed=seed),
                            seed=seed + 1)
        contribs, rise, flat = [], [], []
        for i, comp in enumerate(stack.datasets):
            model = fit_dose_model(
                comp, "y", TreatmentSpec(mode="continuous", grid=grid),
                bart_params=BartParams(n_trees=40, n_burn=100, n_keep=200,
                                       seed=1000 * seed + i))
            contribs.append(estimate_adrf(model))
            lo = estimate_leap(model, 0.0, 37.0)
            hi = estimate_leap(model, 37.0, 80.0)
            rise.append((lo.estimate, lo.variance))
            flat.append((hi.estimate, hi.variance))
        pooled = np.array([pt.qbar for pt in pool_adrf(contribs).pooled])
        want = np.interp(grid, truth["grid"], truth["curve"])
        corr = float(np.corrcoef(pooled, want)[0, 1])
        total = pooled[-1] - pooled[0]
        beyond = pooled[-1] - pooled[grid.index(40.0)]
        shape_ok += (total > 0.0 and beyond <= 0.25 * total and corr >= 0.9)
        p_rise = pool_rubin(np.array([e for e, _ in rise]),
                            np.array([v for _, v in rise]))
        p_flat = pool_rubin(np.array([e for e, _ in flat]),
                            np.array([v for _, v in flat]))
        leap_ok += (not p_rise.ci_low <= 0.0 <= p_rise.ci_high
                    and p_flat.ci_low <= 0.0 <= p_flat.ci_high)
    el = time.time() - t0
    assert shape_ok >= 8
    assert leap_ok >= 8
    assert el < 1800.0
    print(f"criterion 5: shape recovered in {shape_ok}/10, "
          f"jump contrasts correct in {leap_ok}/10 ({el:.0f}s)")


def test_criterion_06_imputation_preserves_estimation():
    """30% MCAR on the outcome, m=20, 20 seeds, paired with complete data.

    Mean absolute error of the pooled estimate at most 1.5x the
    complete-data mean absolute error, CI coverage >= 85%, and observed
    cells preserved exactly in every imputation.
    """
    t0 = time.time()
    bart_kw = dict(n_trees=25, n_burn=70, n_keep=120)
    comp_err, pool_err, covered = [], [], 0
    for seed in range(20):
        spec = DgpSpec(kind="binary", n=300,
                       effect={"form": "constant", "tau": 3.0},
                       confounding=1.0, noise_sd=2.0, n_covariates=5,
                       missingness=[{"kind": "MCAR", "column": "y", "rate": 0.30}],
                       seed=seed)
        full = generate(spec)
        mf = fit_binary_model(full, "y", TreatmentSpec(mode="binary"),
                              bart_params=BartParams(seed=seed, **bart_kw),
                              forest_params=PROP_FOREST)
        comp_err.append(estimate_ate(mf).estimate - 3.0)
        holed = apply_missingness(full, spec)
        stack = impute_mice(holed, m=20, n_iter=4,
                            params=ForestParams(n_trees=60, mtry=6, seed=seed),
                            seed=seed + 1)
        for comp in stack.datasets:
            for src in holed.columns:
                obs = src.mask
                assert np.array_equal(comp.column(src.name).values[obs],
                                      src.values[obs])
        p = _pooled_ate(stack, bart_kw, seed)
        pool_err.append(p.qbar - 3.0)
        covered += p.ci_low <= 3.0 <= p.ci_high
    el = time.time() - t0
    mae_c = float(np.mean(np.abs(comp_err)))
    mae_p = float(np.mean(np.abs(pool_err)))
    assert mae_p <= 1.5 * mae_c
    assert covered >= 17
    print(f"criterion 6: pooled mae {mae_p:.3f} vs complete {mae_c:.3f} "
          f"(ratio {mae_p / mae_c:.2f}), ci covered {covered}/20, "
          f"observed cells exact ({el:.0f}s)")


def _support_frame(x1, z, rng):
    from causalbart.dataset import Column, Dataset
    n = x1.size
    x2 = rng.normal(size=n)
    y = x1 + 0.5 * x2 + 2.0 * z + rng.normal(scale=0.5, size=n)
    ones = np.ones(n, bool)
    cols = [Column("x1", "continuous", x1, ones),
            Column("x2", "continuous", x2, ones),
            Column("z", "binary", z, ones),
            Column("y", "continuous", y, ones)]
    return Dataset(cols, {"covariate": ["x1", "x2"], "treatment": ["z"],
                          "outcome": ["y"]})


def test_criterion_07_support_screen_behavior():
    """Planted off-support unit caught; overlapped data left alone.

    The screening criterion: the planted unit is flagged in >= 80% of
    20 seeds (conservative rule), a fully overlapped DGP flags <= 2% of
    units under the relaxed rule, and the conservative kept-set is a
    subset of the relaxed kept-set in every run.
    """
    t0 = time.time()
    flagged = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        z = np.repeat([0.0, 1.0], 125)
        x1 = rng.normal(size=250)
        x1[0] = 8.0
        d = _support_frame(x1, z, rng)
        model = fit_binary_model(
            d, "y", TreatmentSpec(mode="binary"),
            bart_params=BartParams(n_trees=40, n_burn=100, n_keep=200, seed=seed),
            forest_params=ForestParams(n_trees=80, seed=1))
        con = assess_support(model, "conservative")
        rel = assess_support(model, "relaxed")
        flagged += not con.kept[0]
        assert np.all(con.kept <= rel.kept)
    overlap_ok = 0
    for seed in range(10):
        rng = np.random.default_rng(3000 + seed)
        z = rng.integers(0, 2, 500).astype(float)
        d = _support_frame(rng.normal(size=500), z, rng)
        model = fit_binary_model(
            d, "y", TreatmentSpec(mode="binary"),
            bart_params=BartParams(n_trees=40, n_burn=100, n_keep=200, seed=seed),
            forest_params=ForestParams(n_trees=80, seed=1))
        rel = assess_support(model, "relaxed")
        con = assess_support(model, "conservative")
        overlap_ok += (1.0 - rel.kept.mean()) <= 0.02
        assert np.all(con.kept <= rel.kept)
    el = time.time() - t0
    assert flagged >= 16
    assert overlap_ok == 10
    print(f"criterion 7: planted unit flagged {flagged}/20, overlapped DGP "
          f"within 2% in {overlap_ok}/10, subset ordering held ({el:.0f}s)")


def test_criterion_08_reports_are_byte_identical(tmp_path):
    """Same config + seed: reruns and thread counts cannot change a byte."""
    import json
    t0 = time.time()
    cfg_path = Path(__file__).parent / "fixtures" / "run_config.json"
    base = json.loads(cfg_path.read_text())

    def run(tag, threads):
        cfg = dict(base)
        cfg["out"] = str(tmp_path / tag)
        cfg["threads"] = threads
        run_pipeline(cfg)
        rep = Path(cfg["out"]) / "report"
        return {p.name: p.read_bytes() for p in sorted(rep.iterdir())
                if p.name != "timings.json"}

    first = run("a", 1)
    again = run("b", 1)
    wide = run("c", 8)
    assert set(first) == set(again) == set(wide)
    for name in first:
        assert first[name] == again[name], f"rerun changed {name}"
        assert first[name] == wide[name], f"threads changed {name}"
    el = time.time() - t0
    print(f"criterion 8: {len(first)} report files byte-identical across "
          f"rerun and 1-vs-8 threads ({el:.0f}s)")


def test_criterion_09_exact_identities_on_random_inputs():
    """Telescoping, tree-sum, and recombination identities, 1000 trials each."""
    t0 = time.time()
    rng = np.random.default_rng(9)

    # sum-of-trees: every kept draw of several fits reproduces the
    # posterior prediction through per-tree contributions, bitwise
    trials = 0
    for fit_seed in range(5):
        X, y, _ = friedman(60, sigma=1.0, seed=fit_seed)
        fit = fit_bart(X, y, BartParams(n_trees=10, n_burn=30, n_keep=200,
                                        seed=fit_seed))
        Xq = X[:25]
        draws = predict_posterior(fit, Xq)
        for d in range(fit.n_keep):
            contrib = predict_trees(fit, Xq, d)
            acc = np.zeros(Xq.shape[0])
            for t in range(fit.params.n_trees):
                acc += contrib[t]
            assert np.array_equal(draws[d], fit.center + fit.scale * acc)
            trials += 1
    assert trials == 1000

    # leap telescoping on random anchor triples over two dose models
    models = []
    for seed in (31, 32):
        spec = DgpSpec(kind="dose", n=60,
                       response={"shape": "plateau", "height": 4.0},
                       noise_sd=2.0, n_covariates=3, seed=seed)
        models.append(fit_dose_model(
            generate(spec), "y", TreatmentSpec(mode="continuous"),
            bart_params=BartParams(n_trees=15, n_burn=30, n_keep=50, seed=seed)))
    for trial in range(1000):
        model = models[trial % 2]
        a, b, c = np.sort(rng.uniform(0.0, 80.0, size=3))
        ab = estimate_leap(model, a, b).draws
        bc = estimate_leap(model, b, c).draws
        ac = estimate_leap(model, a, c).draws
        assert np.array_equal(ab + bc, ac)

    # subgroup recombination on random snapped draw matrices
    spec = DgpSpec(kind="binary", n=80, effect={"form": "constant", "tau": 2.0},
                   noise_sd=1.0, n_covariates=3, seed=33)
    bmodel = fit_binary_model(generate(spec), "y", TreatmentSpec(mode="binary"),
                              bart_params=BartParams(n_trees=10, n_burn=30,
                                                     n_keep=40, seed=33),
                              forest_params=PROP_FOREST)
    n = bmodel.dataset.n
    for trial in range(1000):
        U = snap(rng.normal(scale=rng.uniform(0.5, 4.0), size=(40, n)))
        n_bins = int(rng.integers(2, 6))
        ate = estimate_ate(bmodel, unit_draws=U)
        cate = estimate_cate(bmodel, "x1", n_bins=n_bins, unit_draws=U)
        assert np.array_equal(recombine_cate(cate), ate.draws)
    el = time.time() - t0
    print(f"criterion 9: 3 identities x 1000 trials all exact ({el:.0f}s)")
