"""Shared generators for the test suite."""

from __future__ import annotations

import numpy as np


def friedman(n: int, sigma: float = 1.0, p: int = 10, seed: int = 0):
    """The classic 5-signal benchmark surface on U(0,1)^p covariates."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, p))
    f = (10.0 * np.sin(np.pi * X[:, 0] * X[:, 1]) + 20.0 * (X[:, 2] - 0.5) ** 2
         + 10.0 * X[:, 3] + 5.0 * X[:, 4])
    y = f + sigma * rng.standard_normal(n)
    return X, y, f


def snap_grid(values):
    """Snap to the same binary grid the effect estimators use."""
    q = float(2.0 ** 30)
    return np.round(np.asarray(values, dtype=np.float64) * q) / q
