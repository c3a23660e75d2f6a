"""Treatment-effect estimation on one completed dataset.

Binary route: the dose is dichotomized at its median (treated means
strictly above), a classification forest supplies out-of-bag propensity
scores (clipped to [0.01, 0.99]) which are appended to the covariates,
and the outcome model predicts both counterfactual arms with the
propensity held at each unit's observed value. Continuous route: the
dose enters the outcome model directly (no propensity) and average
counterfactual outcomes are evaluated along a dose grid; contrasts
between two grid points ("leaps") are differences of those averages.

Unit-level effect draws are retained so subgroup effects and
support-filtered averages reuse them without re-prediction. All draw
aggregates are snapped to a fixed 2^-30 binary grid (a sub-1e-9
perturbation): on that grid sums and differences are exact in floating
point, which is what makes the aggregation, telescoping, and subgroup
recombination identities hold bitwise rather than approximately.
"""

from __future__ import annotations

import warnings as _warnings
from dataclasses import dataclass, field

import numpy as np

from .bart import BartFit, BartParams, fit_bart, predict_posterior
from .dataset import Dataset, NUMERIC_KINDS
from .errors import ConfigError, DataError
from .forest import ForestParams, fit_forest, oob_predict, predict_forest
from .synth import DEFAULT_GRID

PROPENSITY_CLIP = (0.01, 0.99)
_QUANTUM = float(2.0 ** 30)


def snap(values) -> np.ndarray:
    """Round to the 2^-30 grid on which draw arithmetic is exact."""
    return np.round(np.asarray(values, dtype=np.float64) * _QUANTUM) / _QUANTUM


@dataclass
class TreatmentSpec:
    """How the treatment column is handled.

    mode "binary" dichotomizes at the median (or explicit cutoff); mode
    "continuous" keeps the dose and evaluates effects along ``grid``.
    """

    mode: str = "binary"
    grid: tuple = DEFAULT_GRID
    cutoff: float | None = None

    def __post_init__(self):
        if self.mode not in ("binary", "continuous"):
            raise ConfigError(f"unknown treatment mode {self.mode!r}")
        if len(self.grid) < 2:
            raise ConfigError("grid needs at least two points")


@dataclass
class EffectDraws:
    """Posterior draws of one scalar effect."""

    label: str
    draws: np.ndarray
    n_units: int
    unit_draws: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    @property
    def estimate(self) -> float:
        return float(self.draws.mean())

    @property
    def variance(self) -> float:
        return float(self.draws.var(ddof=1))


@dataclass
class AdrfContribution:
    """One imputation's average-outcome curve along the dose grid."""

    grid: np.ndarray
    value_draws: np.ndarray  # (n_keep, n_grid), snapped
    mean: np.ndarray
    variance: np.ndarray
    warnings: list = field(default_factory=list)


@dataclass
class DoseResponseCurve:
    """Pooled dose-response: per-imputation curves plus pointwise pools."""

    grid: np.ndarray
    per_imputation: np.ndarray  # (m, n_grid) means
    pooled: list  # PooledEffect per grid point
    warnings: list = field(default_factory=list)


@dataclass
class CateResult:
    """Subgroup effect draws by moderator level."""

    moderator: str
    levels: list
    sizes: np.ndarray
    draws: np.ndarray        # (n_keep, n_levels) subgroup means, snapped per unit
    sum_draws: np.ndarray    # (n_keep, n_levels) exact subgroup sums of unit draws
    pairwise: dict           # (i, j) -> EffectDraws of level_i - level_j
    n_units: int


@dataclass
class AnalysisModel:
    """A fitted outcome model plus everything needed to predict
    counterfactuals on its own imputed dataset."""

    fit: BartFit
    dataset: Dataset
    spec: TreatmentSpec
    outcome: str
    design: np.ndarray
    feature_names: list
    feature_kinds: list
    treat_index: int
    z: np.ndarray | None = None
    propensity: np.ndarray | None = None
    cutoff: float | None = None


def binarize_by_median(dose) -> tuple:
    """Split a dose vector at its median: 1 means strictly above.

    A constant dose cannot be split and raises.
    """
    dose = np.asarray(dose, dtype=np.float64)
    if dose.ndim != 1 or dose.size == 0:
        raise DataError("dose must be a nonempty vector")
    if not np.all(np.isfinite(dose)):
        raise DataError("dose contains missing or non-finite values")
    if np.all(dose == dose[0]):
        raise DataError("dose is constant; median split impossible")
    cutoff = float(np.median(dose))
    return (dose > cutoff).astype(np.float64), cutoff


def _complete_values(d: Dataset, name: str) -> np.ndarray:
    c = d.column(name)
    if c.n_missing:
        raise DataError(f"column {name!r} has missing cells; complete the data first")
    return c


def _covariate_onehot(d: Dataset) -> np.ndarray:
    """One-hot covariate matrix for forest models."""
    blocks = []
    for name in d.role_columns("covariate"):
        c = _complete_values(d, name)
        if c.kind == "categorical":
            lv = list(c.levels)
            for v in lv:
                blocks.append((c.values == v).astype(np.float64))
        else:
            blocks.append(c.values.astype(np.float64))
    if not blocks:
        raise DataError("no covariates declared")
    return np.column_stack(blocks)


def _covariate_native(d: Dataset):
    """Covariates with categorical columns as sorted-level codes."""
    cols, kinds, names = [], [], []
    for name in d.role_columns("covariate"):
        c = _complete_values(d, name)
        if c.kind == "categorical":
            lv = list(c.levels)
            code = {v: i for i, v in enumerate(lv)}
            cols.append(np.array([code[v] for v in c.values], dtype=np.float64))
        else:
            cols.append(c.values.astype(np.float64))
        kinds.append(c.kind)
        names.append(name)
    if not cols:
        raise DataError("no covariates declared")
    return np.column_stack(cols), kinds, names


def fit_propensity(d: Dataset, z, params: ForestParams | None = None) -> np.ndarray:
    """Out-of-bag probability of z=1 from a classification forest on the
    covariates, clipped to [0.01, 0.99]; rows that were never out-of-bag
    fall back to the in-sample forest probability."""
    z = np.asarray(z, dtype=np.float64)
    X = _covariate_onehot(d)
    if z.shape != (X.shape[0],):
        raise DataError("z must have one value per row")
    if not np.isin(z, (0.0, 1.0)).all():
        raise DataError("z must be 0/1")
    if len(np.unique(z)) < 2:
        raise DataError("z must contain both groups")
    params = params or ForestParams(n_trees=200)
    f = fit_forest(X, z, params, task="classification")
    probs = oob_predict(f)
    missing = np.isnan(probs[:, 0])
    if missing.any():
        probs[missing] = predict_forest(f, X[missing])
    one_col = int(np.flatnonzero(f.classes == 1.0)[0])
    return np.clip(probs[:, one_col], *PROPENSITY_CLIP)


def fit_binary_model(d: Dataset, outcome: str, spec: TreatmentSpec,
                     bart_params: BartParams | None = None,
                     forest_params: ForestParams | None = None) -> AnalysisModel:
    """Binarize the dose, score propensities, fit the outcome model."""
    if spec.mode != "binary":
        raise ConfigError("spec.mode must be 'binary'")
    tcol = _complete_values(d, d.treatment)
    if tcol.kind not in NUMERIC_KINDS:
        raise DataError("treatment column must be numeric")
    if tcol.kind == "binary" and spec.cutoff is None:
        # already two-armed; a median split would degenerate
        z = tcol.values.astype(np.float64)
        if len(np.unique(z)) < 2:
            raise DataError("treatment column has a single group")
        cutoff = None
    elif spec.cutoff is None:
        z, cutoff = binarize_by_median(tcol.values)
    else:
        cutoff = float(spec.cutoff)
        z = (tcol.values.astype(np.float64) > cutoff).astype(np.float64)
        if len(np.unique(z)) < 2:
            raise DataError("cutoff leaves a single treatment group")
    prop = fit_propensity(d, z, forest_params)
    Xc, kinds, names = _covariate_native(d)
    design = np.column_stack([Xc, z, prop])
    kinds = kinds + ["binary", "continuous"]
    names = names + ["__treated", "__propensity"]
    y = _complete_values(d, outcome).values.astype(np.float64)
    fit = fit_bart(design, y, bart_params, kinds=kinds, names=names)
    return AnalysisModel(fit=fit, dataset=d, spec=spec, outcome=outcome,
                         design=design, feature_names=names, feature_kinds=kinds,
                         treat_index=Xc.shape[1], z=z, propensity=prop, cutoff=cutoff)


def fit_dose_model(d: Dataset, outcome: str, spec: TreatmentSpec,
                   bart_params: BartParams | None = None) -> AnalysisModel:
    """Fit the outcome model with the dose as a regular feature."""
    if spec.mode != "continuous":
        raise ConfigError("spec.mode must be 'continuous'")
    tcol = _complete_values(d, d.treatment)
    if tcol.kind not in NUMERIC_KINDS:
        raise DataError("treatment column must be numeric")
    Xc, kinds, names = _covariate_native(d)
    design = np.column_stack([Xc, tcol.values.astype(np.float64)])
    kinds = kinds + [tcol.kind]
    names = names + [tcol.name]
    y = _complete_values(d, outcome).values.astype(np.float64)
    fit = fit_bart(design, y, bart_params, kinds=kinds, names=names)
    return AnalysisModel(fit=fit, dataset=d, spec=spec, outcome=outcome,
                         design=design, feature_names=names, feature_kinds=kinds,
                         treat_index=Xc.shape[1])


def _with_treat_value(model: AnalysisModel, value) -> np.ndarray:
    X = model.design.copy()
    X[:, model.treat_index] = value
    return X


def unit_effect_draws(model: AnalysisModel, exclude=None) -> np.ndarray:
    """Per-unit draws of f(x, 1) - f(x, 0), snapped; binary mode only.

    The propensity column keeps each unit's observed value in both arms.
    """
    if model.spec.mode != "binary":
        raise ConfigError("unit effects need a binary-mode model")
    d1 = predict_posterior(model.fit, _with_treat_value(model, 1.0))
    d0 = predict_posterior(model.fit, _with_treat_value(model, 0.0))
    U = snap(d1 - d0)
    if exclude is not None:
        exclude = np.asarray(exclude, dtype=bool)
        if exclude.shape != (U.shape[1],):
            raise DataError("exclude mask must have one flag per unit")
        if exclude.all():
            raise DataError("exclusion removes every unit")
        U = U[:, ~exclude]
    return U


def estimate_ate(model: AnalysisModel, exclude=None, unit_draws=None) -> EffectDraws:
    """Average treatment effect draws: the unit-draw mean per draw.

    ``exclude`` drops units (e.g. off-support) from the average;
    ``unit_draws`` reuses a previously computed full matrix.
    """
    if unit_draws is not None and exclude is not None:
        raise ConfigError("pass exclude when computing unit draws, not with reused ones")
    U = unit_draws if unit_draws is not None else unit_effect_draws(model, exclude)
    return EffectDraws(label=model.outcome, draws=U.mean(axis=1),
                       n_units=U.shape[1], unit_draws=U,
                       meta={"cutoff": model.cutoff, "kind": "ate"})


def _counterfactual_dose_draws(model: AnalysisModel, dose: float) -> np.ndarray:
    if model.spec.mode != "continuous":
        raise ConfigError("dose counterfactuals need a continuous-mode model")
    draws = predict_posterior(model.fit, _with_treat_value(model, float(dose)))
    return snap(draws.mean(axis=1))


def estimate_adrf(model: AnalysisModel, grid=None) -> AdrfContribution:
    """Average-outcome curve over the dose grid for one imputation.

    Grid points beyond 1.2x the maximum observed dose attach a warning
    (extrapolation), not an error.
    """
    grid = np.asarray(model.spec.grid if grid is None else grid, dtype=np.float64)
    if grid.size < 2:
        raise ConfigError("grid needs at least two points")
    observed_max = float(model.design[:, model.treat_index].max())
    warns = []
    for a in grid:
        if a > 1.2 * observed_max:
            warns.append(f"grid dose {a:g} exceeds 1.2x max observed dose {observed_max:g}")
    V = np.column_stack([_counterfactual_dose_draws(model, a) for a in grid])
    return AdrfContribution(grid=grid, value_draws=V, mean=V.mean(axis=0),
                            variance=V.var(axis=0, ddof=1), warnings=warns)


def estimate_leap(model: AnalysisModel, a0: float, a1: float) -> EffectDraws:
    """Draws of the average-outcome change from dose a0 to dose a1.

    Identical anchors give exactly zero draws; by the snapped-grid
    arithmetic, leap(a,b) + leap(b,c) equals leap(a,c) draw by draw.
    """
    v0 = _counterfactual_dose_draws(model, a0)
    v1 = _counterfactual_dose_draws(model, a1)
    return EffectDraws(label=model.outcome, draws=v1 - v0, n_units=model.design.shape[0],
                       meta={"kind": "leap", "a0": float(a0), "a1": float(a1)})


def leap_anchors(model: AnalysisModel) -> tuple:
    """Canonical (min, median, max) anchors of the observed dose."""
    dose = model.design[:, model.treat_index]
    return float(dose.min()), float(np.median(dose)), float(dose.max())


def estimate_leap_preset(model: AnalysisModel) -> dict:
    """The canonical leap triple: min->median, median->max, min->max."""
    lo, mid, hi = leap_anchors(model)
    return {
        (lo, mid): estimate_leap(model, lo, mid),
        (mid, hi): estimate_leap(model, mid, hi),
        (lo, hi): estimate_leap(model, lo, hi),
    }


def _moderator_groups(model: AnalysisModel, moderator: str, n_bins: int = 4):
    c = _complete_values(model.dataset, moderator)
    if c.kind == "categorical":
        levels = list(c.levels)
        assign = np.array([levels.index(v) for v in c.values])
        labels = [str(v) for v in levels]
    elif c.kind == "binary":
        labels = ["0", "1"]
        assign = c.values.astype(int)
    else:
        qs = np.quantile(c.values.astype(np.float64),
                         [i / n_bins for i in range(1, n_bins)])
        assign = np.searchsorted(qs, c.values.astype(np.float64), side="left")
        labels = [f"Q{i + 1}" for i in range(n_bins)]
    sizes = np.bincount(assign, minlength=len(labels))
    if (sizes == 0).any():
        empty = [labels[i] for i in np.flatnonzero(sizes == 0)]
        raise DataError(f"moderator {moderator!r}: empty level(s) {empty}")
    return assign, labels, sizes


def estimate_cate(model: AnalysisModel, moderator: str, n_bins: int = 4,
                  unit_draws=None) -> CateResult:
    """Subgroup effect draws by moderator level (quartile bins for
    numeric moderators), with pairwise level contrasts."""
    if moderator == model.dataset.treatment:
        raise ConfigError("the treatment cannot moderate itself")
    U = unit_draws if unit_draws is not None else unit_effect_draws(model)
    assign, labels, sizes = _moderator_groups(model, moderator, n_bins)
    if assign.size != U.shape[1]:
        raise DataError("unit draws do not cover the full sample")
    G = len(labels)
    sums = np.empty((U.shape[0], G))
    means = np.empty((U.shape[0], G))
    for g in range(G):
        cols = U[:, assign == g]
        sums[:, g] = cols.sum(axis=1)
        means[:, g] = cols.mean(axis=1)
    pairwise = {}
    for i in range(G):
        for j in range(i + 1, G):
            pairwise[(i, j)] = EffectDraws(
                label=f"{labels[i]}-{labels[j]}", draws=means[:, i] - means[:, j],
                n_units=int(sizes[i] + sizes[j]),
                meta={"kind": "cate_contrast", "moderator": moderator})
    return CateResult(moderator=moderator, levels=labels, sizes=sizes,
                      draws=means, sum_draws=sums, pairwise=pairwise,
                      n_units=U.shape[1])


def recombine_cate(cate: CateResult) -> np.ndarray:
    """ATE draws rebuilt from subgroup sums; exact because snapped unit
    draws sum without rounding."""
    return cate.sum_draws.sum(axis=1) / cate.n_units


def pool_adrf(contributions: list, level: float = 0.95) -> DoseResponseCurve:
    """Pointwise Rubin pooling of per-imputation curves."""
    from .pooling import pool_curve
    if not contributions:
        raise DataError("no curves to pool")
    grid = contributions[0].grid
    for c in contributions[1:]:
        if not np.array_equal(c.grid, grid):
            raise DataError("curves disagree on the grid")
    means = np.stack([c.mean for c in contributions])
    variances = np.stack([c.variance for c in contributions])
    pooled = pool_curve(means, variances, level=level)
    warns = [w for c in contributions for w in c.warnings]
    return DoseResponseCurve(grid=grid, per_imputation=means, pooled=pooled,
                             warnings=sorted(set(warns)))
