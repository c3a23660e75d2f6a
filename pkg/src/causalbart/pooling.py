"""Combining rules for estimates computed on multiply imputed data.

Given per-imputation point estimates q_i and their variances u_i, the
pooled estimate is the mean of the q_i; total variance is the within-
imputation mean plus the between-imputation variance inflated by (1+1/m).
Degrees of freedom follow the classical large-sample formula, with the
small-sample correction of Barnard and Rubin available behind a flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError


@dataclass
class PooledEffect:
    qbar: float
    within: float
    between: float
    total: float
    riv: float
    df: float
    fmi: float
    ci_low: float
    ci_high: float
    m: int
    level: float

    @property
    def se(self) -> float:
        return float(np.sqrt(self.total))

    def as_row(self, label: str) -> dict:
        """Summary-table row shape used by reports."""
        return {
            "outcome": label,
            "estimate": self.qbar,
            "se": self.se,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "fmi": self.fmi,
            "riv": self.riv,
        }


def fmi_from_riv(riv: float, m: int) -> float:
    """Fraction of missing information implied by a relative variance
    increase under the classical df formula."""
    if riv == 0.0:
        return 0.0
    df = (m - 1) * (1.0 + 1.0 / riv) ** 2
    return (riv + 2.0 / (df + 3.0)) / (1.0 + riv)


def pool_rubin(estimates, variances, level: float = 0.95,
               barnard_rubin: bool = False, df_complete: float | None = None) -> PooledEffect:
    """Pool per-imputation estimates and variances.

    With zero between-imputation variance the relative increase and the
    fraction of missing information are exactly 0, degrees of freedom are
    infinite, and the interval uses the normal quantile.
    """
    est = np.asarray(estimates, dtype=np.float64)
    var = np.asarray(variances, dtype=np.float64)
    if est.ndim != 1 or est.shape != var.shape:
        raise DataError("estimates and variances must be equal-length vectors")
    m = est.size
    if m < 2:
        raise DataError("need at least two imputations to pool")
    if not np.all(np.isfinite(est)) or not np.all(np.isfinite(var)):
        raise DataError("estimates and variances must be finite")
    if np.any(var < 0):
        raise DataError("variances must be nonnegative")
    if not 0.0 < level < 1.0:
        raise ConfigError("level must be in (0, 1)")
    qbar = float(est.mean())
    W = float(var.mean())
    B = float(est.var(ddof=1))
    T = W + (1.0 + 1.0 / m) * B
    if B == 0.0:
        riv, fmi, df = 0.0, 0.0, np.inf
    elif W == 0.0:
        # degenerate limit: all information is between-imputation
        riv, fmi, df = np.inf, 1.0, float(m - 1)
    else:
        riv = (1.0 + 1.0 / m) * B / W
        df = (m - 1) * (1.0 + 1.0 / riv) ** 2
        fmi = (riv + 2.0 / (df + 3.0)) / (1.0 + riv)
    if barnard_rubin:
        if df_complete is None or df_complete <= 0:
            raise ConfigError("barnard_rubin correction needs a positive df_complete")
        lam = riv / (1.0 + riv) if np.isfinite(riv) else 1.0
        df_obs = df_complete * (df_complete + 1.0) / (df_complete + 3.0) * (1.0 - lam)
        if df_obs == 0.0:
            df = 0.0 if not np.isfinite(df) else df
        elif np.isfinite(df):
            df = 1.0 / (1.0 / df + 1.0 / df_obs)
        else:
            df = df_obs
    if np.isfinite(df) and df > 0:
        q = float(stats.t.ppf(0.5 * (1.0 + level), df))
    else:
        q = float(stats.norm.ppf(0.5 * (1.0 + level)))
    half = q * np.sqrt(T)
    return PooledEffect(qbar, W, B, float(T), float(riv), float(df), float(fmi),
                        float(qbar - half), float(qbar + half), m, level)


def pool_curve(curves, variances, level: float = 0.95) -> list:
    """Pointwise pooling of per-imputation curves.

    ``curves`` and ``variances`` are (m, n_points) arrays; returns one
    PooledEffect per point.
    """
    C = np.asarray(curves, dtype=np.float64)
    V = np.asarray(variances, dtype=np.float64)
    if C.ndim != 2 or C.shape != V.shape:
        raise DataError("curves and variances must be matching 2-d arrays")
    return [pool_rubin(C[:, j], V[:, j], level=level) for j in range(C.shape[1])]
