"""Synthetic data generators with known ground truth.

Two families: a binary-treatment design with confounded assignment, and a
continuous-dose design on [0, 80] whose dose-response shape is chosen from
flat / linear / plateau (rising to dose 40, flat afterwards). Both share a
covariate block of iid standard normals and an additive outcome model, so
every estimand has a closed form; a Monte Carlo route is kept alongside as
an independent check.

Missingness is injected separately so the complete table stays available
as an oracle. Mechanisms: MCAR (uniform), MAR (deletion odds driven by
fully observed predictors, optionally hard-thresholded), NMAR (deletion
driven by the value itself). Each mechanism removes an exact cell count,
round(rate * n), so the achieved rate is within rounding of the request.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dataset import Column, Dataset
from .errors import ConfigError, DataError

DOSE_MAX = 80.0
PLATEAU_KNEE = 40.0
DEFAULT_GRID = tuple(float(a) for a in range(0, 81, 10))

# fixed loadings; confounding strength scales the treatment side only
_BASE_COEF = (0.8, 0.6, -0.5)
_CONF_COEF = (0.6, -0.4, 0.2)
_DOSE_COEF = (0.5, -0.3)
_DOSE_CENTER = 37.0
_DOSE_SCALE = 24.0
_NONLIN_STEP = 0.5


@dataclass
class DgpSpec:
    """Recipe for one synthetic table.

    kind is ``binary`` or ``dose``. ``effect`` applies to the binary
    family: {"form": "null"|"constant"|"subgroup", "tau": float}; the
    subgroup form switches the effect on where the first covariate is
    positive. ``response`` applies to the dose family: {"shape":
    "flat"|"linear"|"plateau", "height": float}. ``missingness`` is a list
    of mechanism dicts, applied in order by apply_missingness.
    """

    kind: str = "binary"
    n: int = 500
    effect: dict = field(default_factory=lambda: {"form": "constant", "tau": 3.0})
    response: dict = field(default_factory=lambda: {"shape": "plateau", "height": 4.0})
    baseline: str = "linear"
    confounding: float = 1.0
    noise_sd: float = 1.0
    n_covariates: int = 5
    missingness: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("binary", "dose"):
            raise ConfigError(f"unknown dgp kind {self.kind!r}")
        if self.n < 1:
            raise ConfigError("n must be positive")
        if self.n_covariates < 3:
            raise ConfigError("need at least 3 covariates for the fixed loadings")
        if self.baseline not in ("linear", "nonlinear"):
            raise ConfigError(f"unknown baseline {self.baseline!r}")
        if self.kind == "binary" and self.effect.get("form") not in ("null", "constant", "subgroup"):
            raise ConfigError(f"unknown effect form {self.effect.get('form')!r}")
        if self.kind == "dose" and self.response.get("shape") not in ("flat", "linear", "plateau"):
            raise ConfigError(f"unknown response shape {self.response.get('shape')!r}")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")


def _covariates(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((spec.n, spec.n_covariates))


def _baseline(spec: DgpSpec, X: np.ndarray) -> np.ndarray:
    b = 1.0 + _BASE_COEF[0] * X[:, 0] + _BASE_COEF[1] * X[:, 1] + _BASE_COEF[2] * X[:, 2]
    if spec.baseline == "nonlinear":
        b = b + 0.5 * X[:, 0] * X[:, 1] + np.where(X[:, 2] > _NONLIN_STEP, 1.0, 0.0)
    return b


def baseline_mean(spec: DgpSpec) -> float:
    """E[baseline(X)] under the covariate law, closed form."""
    m = 1.0
    if spec.baseline == "nonlinear":
        m += stats.norm.sf(_NONLIN_STEP)
    return m


def _unit_effect(spec: DgpSpec, X: np.ndarray) -> np.ndarray:
    form = spec.effect["form"]
    tau = float(spec.effect.get("tau", 0.0))
    if form == "null":
        return np.zeros(len(X))
    if form == "constant":
        return np.full(len(X), tau)
    return np.where(X[:, 0] > 0.0, tau, 0.0)


def dose_response(spec: DgpSpec, dose) -> np.ndarray:
    """The structural dose effect g(a), vectorized over doses."""
    a = np.asarray(dose, dtype=float)
    shape = spec.response["shape"]
    h = float(spec.response.get("height", 0.0))
    if shape == "flat":
        return np.zeros_like(a)
    if shape == "linear":
        return h * a / DOSE_MAX
    return h * np.minimum(a, PLATEAU_KNEE) / PLATEAU_KNEE


def _assemble(spec: DgpSpec, X, treat_col: Column, y: np.ndarray) -> Dataset:
    cov_names = [f"x{j + 1}" for j in range(spec.n_covariates)]
    cols = [Column(nm, "continuous", X[:, j], np.ones(spec.n, bool)) for j, nm in enumerate(cov_names)]
    cols.append(treat_col)
    cols.append(Column("y", "continuous", y, np.ones(spec.n, bool)))
    roles = {"outcome": ("y",), "treatment": (treat_col.name,), "covariate": tuple(cov_names)}
    return Dataset(cols, roles)


def gen_binary_dgp(spec: DgpSpec) -> Dataset:
    """Confounded binary-treatment table: P(z=1|x) is logistic in x."""
    if spec.kind != "binary":
        raise ConfigError("spec.kind must be 'binary'")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    X = _covariates(spec, rng)
    eta = spec.confounding * (
        _CONF_COEF[0] * X[:, 0] + _CONF_COEF[1] * X[:, 1] + _CONF_COEF[2] * X[:, 2]
    )
    z = (rng.uniform(size=spec.n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    y = _baseline(spec, X) + _unit_effect(spec, X) * z + spec.noise_sd * rng.standard_normal(spec.n)
    return _assemble(spec, X, Column("z", "binary", z, np.ones(spec.n, bool)), y)


def gen_dose_dgp(spec: DgpSpec) -> Dataset:
    """Confounded integer dose on [0, 80] with additive response g(dose)."""
    if spec.kind != "dose":
        raise ConfigError("spec.kind must be 'dose'")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(0,)))
    X = _covariates(spec, rng)
    lin = spec.confounding * (_DOSE_COEF[0] * X[:, 0] + _DOSE_COEF[1] * X[:, 1])
    lin = lin + rng.standard_normal(spec.n)
    lin_sd = np.sqrt(spec.confounding ** 2 * (_DOSE_COEF[0] ** 2 + _DOSE_COEF[1] ** 2) + 1.0)
    dose = np.clip(_DOSE_CENTER + _DOSE_SCALE * lin / lin_sd, 0.0, DOSE_MAX)
    dose = np.round(dose)
    y = _baseline(spec, X) + dose_response(spec, dose) + spec.noise_sd * rng.standard_normal(spec.n)
    return _assemble(spec, X, Column("dose", "count", dose, np.ones(spec.n, bool)), y)


def generate(spec: DgpSpec) -> Dataset:
    """Complete table for the spec, missingness not yet applied."""
    if spec.kind == "binary":
        return gen_binary_dgp(spec)
    return gen_dose_dgp(spec)


def _zscore(v: np.ndarray) -> np.ndarray:
    s = v.std()
    return (v - v.mean()) / s if s > 0 else np.zeros_like(v)


def _mechanism_weights(mech: dict, d: Dataset, col_values: np.ndarray) -> np.ndarray:
    kind = mech.get("kind")
    if kind == "MCAR":
        return np.ones(len(col_values))
    if kind == "MAR":
        preds = mech.get("predictors")
        if not preds:
            raise ConfigError("MAR mechanism needs 'predictors'")
        combo = np.zeros(len(col_values))
        for name in preds:
            pc = d.column(name)
            if pc.n_missing:
                raise DataError(f"MAR predictor {name!r} has missing cells")
            combo += _zscore(pc.values.astype(float))
        combo /= len(preds)
        if "threshold" in mech:
            return (combo > float(mech["threshold"])).astype(float)
        slope = float(mech.get("slope", 1.0))
        return 1.0 / (1.0 + np.exp(-slope * combo))
    if kind == "NMAR":
        style = mech.get("style", "top")
        if style == "top":
            # handled separately: deletes the k largest values outright
            return col_values.astype(float)
        slope = float(mech.get("slope", 1.0))
        return 1.0 / (1.0 + np.exp(-slope * _zscore(col_values.astype(float))))
    raise ConfigError(f"unknown missingness kind {kind!r}")


def apply_missingness(d: Dataset, spec: DgpSpec) -> Dataset:
    """Apply spec.missingness mechanisms in order, returning a new Dataset.

    Each mechanism deletes exactly round(rate * n) cells from its column.
    MCAR picks them uniformly; MAR samples without replacement with
    probability proportional to a logistic (or hard-threshold) function of
    its predictors; NMAR style "top" deletes the largest values, style
    "logistic" samples proportional to a logistic in the value itself.
    """
    out = d.copy()
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(1,)))
    for mech in spec.missingness:
        name = mech.get("column")
        if name is None:
            raise ConfigError("missingness mechanism needs 'column'")
        col = out.column(name)
        rate = float(mech.get("rate", 0.0))
        if not 0.0 <= rate < 1.0:
            raise ConfigError(f"missingness rate {rate} outside [0, 1)")
        k = int(round(rate * col.n))
        if k == 0:
            continue
        obs_idx = np.flatnonzero(col.mask)
        if k >= obs_idx.size:
            raise DataError(f"rate {rate} would empty column {name!r}")
        vals = col.values[obs_idx]
        if mech.get("kind") == "NMAR" and mech.get("style", "top") == "top":
            order = np.argsort(vals.astype(float), kind="stable")
            drop = obs_idx[order[-k:]]
        else:
            w = _mechanism_weights(mech, out, vals)
            if mech.get("kind") == "MCAR":
                drop = rng.choice(obs_idx, size=k, replace=False)
            else:
                eligible = w > 0
                if eligible.sum() < k:
                    raise DataError(
                        f"mechanism on {name!r}: only {int(eligible.sum())} eligible cells for {k} deletions"
                    )
                p = np.where(eligible, w, 0.0)
                drop = rng.choice(obs_idx, size=k, replace=False, p=p / p.sum())
        mask = col.mask.copy()
        mask[drop] = False
        values = col.values.copy()
        if col.kind == "categorical":
            values[drop] = ""
        else:
            values[drop] = np.nan
        out = out.replace_column(Column(col.name, col.kind, values, mask))
    return out


def _mc_covariates(spec: DgpSpec, n_draws: int, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((n_draws, spec.n_covariates))


def oracle_truth(spec: DgpSpec, estimand, grid=None, method: str = "auto",
                 mc_draws: int = 1_000_000) -> dict:
    """Ground-truth value of an estimand under the spec.

    estimand: "ate", "adrf", or ("leap", a0, a1). Closed forms are exact
    (mc_se 0); method="mc" forces a Monte Carlo evaluation with reported
    Monte Carlo standard error.
    """
    if method not in ("auto", "analytic", "mc"):
        raise ConfigError(f"unknown oracle method {method!r}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(2,)))
    if estimand == "ate":
        if spec.kind != "binary":
            raise ConfigError("ate oracle needs a binary dgp")
        if method in ("auto", "analytic"):
            form = spec.effect["form"]
            tau = float(spec.effect.get("tau", 0.0))
            value = {"null": 0.0, "constant": tau, "subgroup": 0.5 * tau}[form]
            return {"estimand": "ate", "value": value, "mc_se": 0.0}
        X = _mc_covariates(spec, mc_draws, rng)
        eff = _unit_effect(spec, X)
        return {"estimand": "ate", "value": float(eff.mean()),
                "mc_se": float(eff.std(ddof=1) / np.sqrt(mc_draws))}
    if estimand == "adrf":
        if spec.kind != "dose":
            raise ConfigError("adrf oracle needs a dose dgp")
        g = np.asarray(DEFAULT_GRID if grid is None else grid, dtype=float)
        if method in ("auto", "analytic"):
            curve = baseline_mean(spec) + dose_response(spec, g)
            return {"estimand": "adrf", "grid": g.tolist(), "curve": curve.tolist(),
                    "mc_se": [0.0] * len(g)}
        X = _mc_covariates(spec, mc_draws, rng)
        base = _baseline(spec, X)
        curve = [float(base.mean() + dose_response(spec, a)) for a in g]
        se = float(base.std(ddof=1) / np.sqrt(mc_draws))
        return {"estimand": "adrf", "grid": g.tolist(), "curve": curve, "mc_se": [se] * len(g)}
    if isinstance(estimand, (tuple, list)) and len(estimand) == 3 and estimand[0] == "leap":
        if spec.kind != "dose":
            raise ConfigError("leap oracle needs a dose dgp")
        a0, a1 = float(estimand[1]), float(estimand[2])
        value = float(dose_response(spec, a1) - dose_response(spec, a0))
        return {"estimand": f"leap_{a0:g}_{a1:g}", "value": value, "mc_se": 0.0}
    raise ConfigError(f"unknown estimand {estimand!r}")
