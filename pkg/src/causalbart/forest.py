"""Random forests with out-of-bag bookkeeping and predictive leaf draws.

Single trees come from scikit-learn; everything that makes them a forest
here (bootstrap resampling, out-of-bag index tracking, aggregation,
permutation importance, imputation draws, shadow-feature screening) is
owned by this module so the contracts stay exact. Per-tree seeds derive
from the master seed through named spawns, so results do not depend on
fitting order or scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from .errors import ConfigError, DataError

TASKS = ("regression", "classification")


@dataclass
class ForestParams:
    """Forest hyperparameters.

    mtry defaults to ceil(p/3) for regression and ceil(sqrt(p)) for
    classification when left as None.
    """

    n_trees: int = 500
    mtry: int | None = None
    min_leaf: int = 5
    max_depth: int | None = None
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be positive")
        if self.min_leaf < 1:
            raise ConfigError("min_leaf must be positive")
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError("mtry must be positive")


def resolve_mtry(params: ForestParams, n_features: int, task: str) -> int:
    if params.mtry is not None:
        if params.mtry > n_features:
            raise ConfigError(f"mtry {params.mtry} exceeds feature count {n_features}")
        return params.mtry
    if task == "regression":
        return max(1, math.ceil(n_features / 3))
    return max(1, math.ceil(math.sqrt(n_features)))


@dataclass
class Forest:
    task: str
    trees: list
    inbag_indices: list
    oob_indices: list
    X_train: np.ndarray
    y_train: np.ndarray
    classes: np.ndarray | None
    params: ForestParams
    _leaf_members: list = field(default_factory=list, repr=False)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _check_matrix(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise DataError("X must be 2-d and y 1-d with matching rows")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains missing or non-finite cells")
    if not np.all(np.isfinite(y)):
        raise DataError("y contains missing or non-finite cells")
    return X, y


def fit_forest(X, y, params: ForestParams | None = None, task: str = "regression") -> Forest:
    """Fit a bootstrap ensemble of decision trees.

    Regression trees split on variance reduction, classification trees on
    Gini. A constant-feature matrix yields root-only trees rather than an
    error. Identical params and seed give an identical forest.
    """
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    params = params or ForestParams()
    X, y = _check_matrix(X, y)
    n, p = X.shape
    if n < 2 * params.min_leaf:
        raise DataError(f"need at least {2 * params.min_leaf} rows, got {n}")
    mtry = resolve_mtry(params, p, task)
    classes = None
    if task == "classification":
        classes = np.unique(y)
        y = y.astype(np.float64)
    trees, inbag, oob = [], [], []
    for child in np.random.SeedSequence(params.seed).spawn(params.n_trees):
        boot_ss, tree_ss = child.spawn(2)
        if params.bootstrap:
            idx = np.random.default_rng(boot_ss).integers(0, n, size=n)
        else:
            idx = np.arange(n)
        rs = int(tree_ss.generate_state(1)[0])
        if task == "regression":
            t = DecisionTreeRegressor(
                criterion="squared_error", min_samples_leaf=params.min_leaf,
                max_depth=params.max_depth, max_features=mtry, random_state=rs)
        else:
            t = DecisionTreeClassifier(
                criterion="gini", min_samples_leaf=params.min_leaf,
                max_depth=params.max_depth, max_features=mtry, random_state=rs)
        t.fit(X[idx], y[idx])
        trees.append(t)
        inbag.append(idx)
        oob.append(np.setdiff1d(np.arange(n), idx, assume_unique=False))
    return Forest(task, trees, inbag, oob, X, y, classes, params)


def _tree_proba(forest: Forest, tree, X: np.ndarray) -> np.ndarray:
    # bootstrap samples can miss classes; align per-tree columns to the global set
    probs = tree.predict_proba(X)
    if len(tree.classes_) == len(forest.classes):
        return probs
    full = np.zeros((X.shape[0], len(forest.classes)))
    cols = np.searchsorted(forest.classes, tree.classes_)
    full[:, cols] = probs
    return full


def predict_forest(f: Forest, Xnew) -> np.ndarray:
    """Mean of per-tree predictions: values for regression, class
    probabilities (rows summing to 1) for classification."""
    Xnew = np.asarray(Xnew, dtype=np.float64)
    if Xnew.ndim != 2 or Xnew.shape[1] != f.X_train.shape[1]:
        raise DataError("Xnew has wrong number of features")
    if not np.all(np.isfinite(Xnew)):
        raise DataError("Xnew contains missing or non-finite cells")
    if f.task == "regression":
        stack = np.stack([t.predict(Xnew) for t in f.trees])
    else:
        stack = np.stack([_tree_proba(f, t, Xnew) for t in f.trees])
    return stack.mean(axis=0)


def oob_predict(f: Forest) -> np.ndarray:
    """Out-of-bag aggregate prediction per training row.

    Rows that were in-bag for every tree come back NaN; with bootstrap
    disabled there are no out-of-bag rows at all.
    """
    n = f.X_train.shape[0]
    if f.task == "regression":
        acc = np.zeros(n)
    else:
        acc = np.zeros((n, len(f.classes)))
    count = np.zeros(n)
    for t, oob in zip(f.trees, f.oob_indices):
        if oob.size == 0:
            continue
        if f.task == "regression":
            acc[oob] += t.predict(f.X_train[oob])
        else:
            acc[oob] += _tree_proba(f, t, f.X_train[oob])
        count[oob] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        if f.task == "regression":
            out = acc / count
        else:
            out = acc / count[:, None]
    out[count == 0] = np.nan
    return out


def _leaf_member_map(f: Forest, t_idx: int) -> dict:
    while len(f._leaf_members) < f.n_trees:
        f._leaf_members.append(None)
    if f._leaf_members[t_idx] is None:
        leaves = f.trees[t_idx].apply(f.X_train)
        members: dict = {}
        for i, leaf in enumerate(leaves):
            members.setdefault(int(leaf), []).append(i)
        f._leaf_members[t_idx] = {k: np.asarray(v) for k, v in members.items()}
    return f._leaf_members[t_idx]


def leaf_draws(f: Forest, Xnew, rng: np.random.Generator) -> np.ndarray:
    """Predictive draw per row: route the row through one randomly chosen
    tree and sample one observed training y from the leaf it lands in.

    Drawn values therefore always lie in the observed support, which is
    what makes these draws usable as imputations for any column kind.
    """
    Xnew = np.asarray(Xnew, dtype=np.float64)
    if Xnew.ndim != 2 or Xnew.shape[1] != f.X_train.shape[1]:
        raise DataError("Xnew has wrong number of features")
    m = Xnew.shape[0]
    picks = rng.integers(0, f.n_trees, size=m)
    leaf_of = {}
    for t_idx in np.unique(picks):
        leaf_of[int(t_idx)] = f.trees[t_idx].apply(Xnew)
    out = np.empty(m)
    for i in range(m):
        t_idx = int(picks[i])
        members = _leaf_member_map(f, t_idx)[int(leaf_of[t_idx][i])]
        out[i] = f.y_train[members[rng.integers(0, members.size)]]
    return out


def _loss(f: Forest, tree, X: np.ndarray, y: np.ndarray) -> float:
    if f.task == "regression":
        r = y - tree.predict(X)
        return float(r @ r / r.size)
    return float((tree.predict(X) != y).mean())


def permutation_importance(f: Forest, X, y, seed: int = 0) -> np.ndarray:
    """Mean out-of-bag loss increase per feature after permuting it.

    Loss is mean squared error for regression and misclassification rate
    for classification; a constant-y regression forest scores exactly zero
    everywhere. Deterministic for a given seed.
    """
    X, y = _check_matrix(X, y)
    p = X.shape[1]
    if X.shape != f.X_train.shape:
        raise DataError("X must match the training matrix shape")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    imp = np.zeros(p)
    used = 0
    for t, oob in zip(f.trees, f.oob_indices):
        if oob.size < 2:
            continue
        used += 1
        Xo, yo = X[oob], y[oob]
        base = _loss(f, t, Xo, yo)
        for j in range(p):
            perm = rng.permutation(oob.size)
            Xp = Xo.copy()
            Xp[:, j] = Xo[perm, j]
            imp[j] += _loss(f, t, Xp, yo) - base
    if used == 0:
        raise DataError("no tree has out-of-bag rows (bootstrap disabled?)")
    return imp / used


def select_covariates(X, y, rounds: int = 20, seed: int = 0,
                      params: ForestParams | None = None, task: str = "regression",
                      alpha: float = 0.01) -> dict:
    """Shadow-feature screening.

    Each round appends a column-permuted copy of X, fits a forest on the
    doubled matrix, and credits a win to every real feature whose
    permutation importance beats the best shadow importance. Features whose
    win count is binomially significant against p=0.5 at ``alpha`` are
    accepted. Needs rounds >= 10.
    """
    if rounds < 10:
        raise ConfigError("rounds must be at least 10")
    X, y = _check_matrix(X, y)
    n, p = X.shape
    base = params or ForestParams(n_trees=100)
    wins = np.zeros(p, dtype=int)
    for r, child in enumerate(np.random.SeedSequence(seed, spawn_key=(11,)).spawn(rounds)):
        rng = np.random.default_rng(child)
        shadow = np.empty_like(X)
        for j in range(p):
            shadow[:, j] = X[rng.permutation(n), j]
        Xr = np.hstack([X, shadow])
        fp = ForestParams(n_trees=base.n_trees, mtry=base.mtry, min_leaf=base.min_leaf,
                          max_depth=base.max_depth, bootstrap=base.bootstrap,
                          seed=int(child.generate_state(1)[0]))
        forest = fit_forest(Xr, y, fp, task=task)
        imp = permutation_importance(forest, Xr, y, seed=fp.seed)
        wins += imp[:p] > imp[p:].max()
    pvalues = np.array([stats.binomtest(int(w), rounds, 0.5, alternative="greater").pvalue
                        for w in wins])
    accepted = [j for j in range(p) if pvalues[j] < alpha]
    return {"accepted": accepted, "wins": wins, "pvalues": pvalues, "rounds": rounds}
