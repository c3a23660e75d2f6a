"""Common-support screening from posterior predictive spread.

A counterfactual prediction is trusted only where the model is about as
sure of it as it is of factual predictions. Per unit we compare the
posterior sd of the counterfactual prediction against a threshold built
from the factual-prediction sds: the relaxed rule allows up to the
largest factual sd plus one sd of those sds, the conservative rule cuts
at their 90th percentile. Binary mode computes thresholds within each
treatment group (a unit is judged against its own group); continuous
mode uses one whole-sample threshold and screens every grid dose.

Thresholds and flags are deterministic functions of the retained
posterior draws, so recomputing from a persisted fit reproduces them
exactly. The conservative cut never exceeds the relaxed one, so its
kept set is a subset by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bart import predict_posterior
from .causal import AnalysisModel, _with_treat_value
from .errors import ConfigError, DataError

RULES = ("relaxed", "conservative")
CONSERVATIVE_PCT = 90.0


@dataclass
class SupportReport:
    """Kept/dropped flags for one screening rule."""

    mode: str
    rule: str
    factual_sd: np.ndarray
    counterfactual_sd: np.ndarray  # (n,) binary, (n, n_grid) continuous
    thresholds: np.ndarray         # per group (binary) or length-1 (continuous)
    kept: np.ndarray               # bool, same shape as counterfactual_sd
    group: np.ndarray | None = None
    grid: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kept_fraction(self):
        return self.kept.mean(axis=0)

    def exclude_mask(self) -> np.ndarray:
        """Units to drop from effect averages (binary mode)."""
        if self.mode != "binary":
            raise ConfigError("per-unit exclusion is a binary-mode notion")
        return ~self.kept


def _posterior_sd(model: AnalysisModel, X) -> np.ndarray:
    draws = predict_posterior(model.fit, X)
    if draws.shape[0] < 2:
        raise DataError("need at least two retained draws for support sds")
    return draws.std(axis=0, ddof=1)


def _threshold(sds: np.ndarray, rule: str) -> float:
    if sds.size < 2:
        raise DataError("need at least two units per group for a support threshold")
    if rule == "relaxed":
        return float(sds.max() + sds.std(ddof=1))
    return float(np.percentile(sds, CONSERVATIVE_PCT))


def assess_support(model: AnalysisModel, rule: str = "relaxed",
                   grid=None) -> SupportReport:
    """Screen counterfactual predictions under one rule."""
    if rule not in RULES:
        raise ConfigError(f"unknown support rule {rule!r}")
    if model.spec.mode == "binary":
        return _assess_binary(model, rule)
    return _assess_continuous(model, rule, grid)


def _assess_binary(model: AnalysisModel, rule: str) -> SupportReport:
    z = model.z.astype(int)
    fact_sd = _posterior_sd(model, model.design)
    cf_sd = np.empty_like(fact_sd)
    for arm in (0, 1):
        rows = z == arm
        if rows.sum() < 2:
            raise DataError(f"treatment group {arm} has fewer than 2 units")
        Xcf = model.design[rows].copy()
        Xcf[:, model.treat_index] = 1.0 - arm
        cf_sd[rows] = _posterior_sd(model, Xcf)
    thr = np.array([_threshold(fact_sd[z == arm], rule) for arm in (0, 1)])
    kept = cf_sd <= thr[z]
    return SupportReport(mode="binary", rule=rule, factual_sd=fact_sd,
                         counterfactual_sd=cf_sd, thresholds=thr, kept=kept,
                         group=z, meta={"cutoff": model.cutoff})


def _assess_continuous(model: AnalysisModel, rule: str, grid) -> SupportReport:
    grid = np.asarray(model.spec.grid if grid is None else grid, dtype=np.float64)
    fact_sd = _posterior_sd(model, model.design)
    thr = np.array([_threshold(fact_sd, rule)])
    cf_sd = np.column_stack(
        [_posterior_sd(model, _with_treat_value(model, a)) for a in grid])
    kept = cf_sd <= thr[0]
    return SupportReport(mode="continuous", rule=rule, factual_sd=fact_sd,
                         counterfactual_sd=cf_sd, thresholds=thr, kept=kept,
                         grid=grid)


def support_summary(report: SupportReport) -> dict:
    """Flat dict for reporting: rule, thresholds, kept fractions."""
    out = {"mode": report.mode, "rule": report.rule,
           "thresholds": [float(t) for t in report.thresholds]}
    if report.mode == "binary":
        out["kept_fraction"] = float(report.kept.mean())
        for arm in (0, 1):
            rows = report.group == arm
            out[f"kept_fraction_group{arm}"] = float(report.kept[rows].mean())
    else:
        out["grid"] = [float(a) for a in report.grid]
        out["kept_fraction"] = [float(v) for v in report.kept.mean(axis=0)]
    return out
