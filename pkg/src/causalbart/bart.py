"""Sum-of-trees regression fit by backfitting MCMC.

The response is shifted and scaled so its observed extremes sit at -0.5
and +0.5. Each of ``n_trees`` trees carries a Normal(0, sigma_mu^2) prior
on its leaf values with sigma_mu = 0.5 / (k * sqrt(n_trees)); the residual
variance carries a scaled inverse chi-square prior whose scale puts
probability q below the sample sd of least-squares residuals. Tree
structures follow the standard depth-decaying split prior: a node at
depth d splits with probability alpha * (1 + d)^(-beta).

One sweep visits every tree in turn. For tree j the partial residual
R_j = y_std - sum_{l != j} tree_l(X) is formed, one structural move is
proposed (GROW with probability 0.25, PRUNE 0.25, CHANGE 0.50; no SWAP),
and accepted by Metropolis-Hastings on the likelihood with leaf values
integrated out. Leaf values are then redrawn from their Normal full
conditional, and after all trees the residual variance is redrawn from
its scaled inverse chi-square full conditional.

Numeric features split at midpoints of adjacent observed values;
categorical features (integer level codes) split on uniformly sampled
nonempty proper subsets of the observed levels, stored as bitmasks. Every
leaf must keep at least one training row; proposals violating that are
rejected outright.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError, NumericError

MOVE_PROBS = {"grow": 0.25, "prune": 0.25, "change": 0.50}
NUMERIC_FEATURE_KINDS = ("continuous", "count", "binary")
_SIGMA_FLOOR = 1e-8


@dataclass
class BartParams:
    """Sampler configuration.

    leaf_scale overrides the derived sigma_mu when set (0 is allowed and
    makes every tree inert, which is useful for prior-recovery checks).
    """

    n_trees: int = 200
    k: float = 2.0
    alpha: float = 0.95
    beta: float = 2.0
    nu: float = 3.0
    q: float = 0.90
    n_burn: int = 200
    n_keep: int = 1000
    seed: int = 0
    leaf_scale: float | None = None

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError("n_trees must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if self.k <= 0:
            raise ConfigError("k must be positive")
        if self.nu <= 0 or not 0.0 < self.q < 1.0:
            raise ConfigError("nu must be positive and q in (0, 1)")
        if self.n_burn < 0 or self.n_keep < 1:
            raise ConfigError("n_burn must be >= 0 and n_keep >= 1")
        if self.leaf_scale is not None and self.leaf_scale < 0:
            raise ConfigError("leaf_scale must be nonnegative")

    def sigma_mu(self) -> float:
        if self.leaf_scale is not None:
            return self.leaf_scale
        return 0.5 / (self.k * np.sqrt(self.n_trees))


class _Tree:
    """Mutable binary tree over preallocated parallel arrays.

    feature[i] holds -1 for a leaf; freed node slots are recycled through
    a free list, so reachable structure must be read by walking from the
    root (node 0), never by scanning the arrays.
    """

    __slots__ = ("feature", "threshold", "subset", "left", "right", "value",
                 "depth", "parent", "leaf_of_row", "free")

    def __init__(self, n_rows: int, cap: int = 16):
        self.feature = np.full(cap, -1, dtype=np.int32)
        self.threshold = np.zeros(cap, dtype=np.float64)
        self.subset = np.zeros(cap, dtype=np.int64)
        self.left = np.full(cap, -1, dtype=np.int32)
        self.right = np.full(cap, -1, dtype=np.int32)
        self.value = np.zeros(cap, dtype=np.float64)
        self.depth = np.zeros(cap, dtype=np.int32)
        self.parent = np.full(cap, -1, dtype=np.int32)
        self.leaf_of_row = np.zeros(n_rows, dtype=np.int32)
        self.free = list(range(cap - 1, 0, -1))

    def _alloc(self) -> int:
        if not self.free:
            old = len(self.feature)
            for name in ("feature", "threshold", "subset", "left", "right",
                         "value", "depth", "parent"):
                arr = getattr(self, name)
                grown = np.concatenate([arr, np.zeros(old, dtype=arr.dtype)])
                if name in ("feature", "left", "right", "parent"):
                    grown[old:] = -1
                setattr(self, name, grown)
            self.free = list(range(2 * old - 1, old - 1, -1))
        return self.free.pop()

    def walk(self):
        """Preorder (nodes, leaves, prunables) over reachable structure."""
        nodes, leaves, prunables = [], [], []
        stack = [0]
        while stack:
            u = stack.pop()
            nodes.append(u)
            if self.feature[u] < 0:
                leaves.append(u)
            else:
                l, r = self.left[u], self.right[u]
                if self.feature[l] < 0 and self.feature[r] < 0:
                    prunables.append(u)
                stack.append(r)
                stack.append(l)
        return nodes, leaves, prunables

    def compact(self):
        """Reachable structure as fresh arrays with local preorder ids."""
        nodes, _, _ = self.walk()
        order = np.asarray(nodes, dtype=np.int64)
        local = {g: i for i, g in enumerate(nodes)}
        feature = self.feature[order].copy()
        left = np.full(order.size, -1, dtype=np.int32)
        right = np.full(order.size, -1, dtype=np.int32)
        for i, g in enumerate(nodes):
            if feature[i] >= 0:
                left[i] = local[self.left[g]]
                right[i] = local[self.right[g]]
        return (feature, self.threshold[order].copy(), self.subset[order].copy(),
                left, right, self.value[order].copy())


def _route(tree: _Tree, rows: np.ndarray, start: int, X: np.ndarray,
           is_cat: np.ndarray, override=None) -> np.ndarray:
    """Leaf index for each row descending from ``start``.

    ``override`` = (feature, threshold, subset) replaces the rule at the
    start node without mutating the tree.
    """
    node = np.full(rows.size, start, dtype=np.int32)
    while True:
        feat = tree.feature[node]
        if override is not None:
            feat = np.where(node == start, override[0], feat)
        active = feat >= 0
        if not active.any():
            return node
        a_idx = np.flatnonzero(active)
        an = node[a_idx]
        af = feat[a_idx]
        xv = X[rows[a_idx], af]
        thr = tree.threshold[an]
        sub = tree.subset[an]
        if override is not None:
            at_start = an == start
            thr = np.where(at_start, override[1], thr)
            sub = np.where(at_start, override[2], sub)
        cat = is_cat[af]
        go_left = np.empty(a_idx.size, dtype=bool)
        if cat.any():
            codes = xv[cat].astype(np.int64)
            go_left[cat] = (sub[cat] >> codes) & 1 == 1
        ncat = ~cat
        if ncat.any():
            go_left[ncat] = xv[ncat] <= thr[ncat]
        node[a_idx] = np.where(go_left, tree.left[an], tree.right[an])


class _Sampler:
    """Full MCMC state; one instance per fit."""

    def __init__(self, X, y_std, params: BartParams, is_cat, candidates, n_levels):
        self.X = X
        self.y = y_std
        self.p = params
        self.is_cat = is_cat
        self.candidates = candidates
        self.n_levels = n_levels
        # features with at least one admissible rule
        self.eligible = np.array(
            [j for j in range(X.shape[1])
             if (n_levels[j] >= 2 if is_cat[j] else len(candidates[j]) > 0)],
            dtype=np.int64)
        n = X.shape[0]
        self.trees = [_Tree(n) for _ in range(params.n_trees)]
        self.contrib = np.zeros((params.n_trees, n))
        self.total = np.zeros(n)
        self.sigma_mu2 = params.sigma_mu() ** 2
        shat = self._residual_sd()
        self.lam = shat ** 2 * stats.chi2.ppf(1.0 - params.q, params.nu) / params.nu
        self.sigma2 = shat ** 2
        self.counts = {m: {"proposed": 0, "accepted": 0} for m in MOVE_PROBS}
        self.sweeps_done = 0

    def _residual_sd(self) -> float:
        n, p = self.X.shape
        if n > p + 1:
            A = np.column_stack([np.ones(n), self.X])
            beta, *_ = np.linalg.lstsq(A, self.y, rcond=None)
            resid = self.y - A @ beta
        else:
            resid = self.y - self.y.mean()
        s = float(resid.std(ddof=1)) if n > 1 else 0.0
        return max(s, _SIGMA_FLOOR)

    def _p_split(self, depth) -> float:
        return self.p.alpha * (1.0 + depth) ** (-self.p.beta)

    def _leaf_term(self, n_l, s_l):
        # log marginal likelihood contribution of a leaf, constant parts dropped
        denom = self.sigma2 + n_l * self.sigma_mu2
        return (0.5 * np.log(self.sigma2 / denom)
                + self.sigma_mu2 * s_l * s_l / (2.0 * self.sigma2 * denom))

    def _draw_rule(self, rng):
        f = int(self.eligible[rng.integers(0, self.eligible.size)])
        if self.is_cat[f]:
            L = self.n_levels[f]
            bits = int(rng.integers(1, (1 << L) - 1))
            return f, 0.0, bits
        cand = self.candidates[f]
        return f, float(cand[rng.integers(0, cand.size)]), 0

    def _grow(self, tree: _Tree, R, rng) -> bool:
        _, leaves, prunables = tree.walk()
        Lf = len(leaves)
        leaf = leaves[rng.integers(0, Lf)]
        f, thr, sub = self._draw_rule(rng)
        rows = np.flatnonzero(tree.leaf_of_row == leaf)
        xv = self.X[rows, f]
        if self.is_cat[f]:
            go_left = (sub >> xv.astype(np.int64)) & 1 == 1
        else:
            go_left = xv <= thr
        nL = int(go_left.sum())
        nR = rows.size - nL
        if nL == 0 or nR == 0:
            return False
        r = R[rows]
        sL = float(r[go_left].sum())
        sAll = float(r.sum())
        d = int(tree.depth[leaf])
        dlik = (self._leaf_term(nL, sL) + self._leaf_term(nR, sAll - sL)
                - self._leaf_term(rows.size, sAll))
        ps, ps1 = self._p_split(d), self._p_split(d + 1)
        dprior = np.log(ps) + 2.0 * np.log1p(-ps1) - np.log1p(-ps)
        # prunable count after growing: the new node, minus its parent if
        # that parent had two leaf children before
        m_after = len(prunables) + 1
        par = tree.parent[leaf]
        if par >= 0 and tree.feature[tree.left[par]] < 0 and tree.feature[tree.right[par]] < 0:
            m_after -= 1
        log_a = (dlik + dprior + np.log(Lf) - np.log(m_after)
                 + np.log(MOVE_PROBS["prune"]) - np.log(MOVE_PROBS["grow"]))
        if np.log(rng.uniform()) >= log_a:
            return False
        cl, cr = tree._alloc(), tree._alloc()
        tree.feature[leaf] = f
        tree.threshold[leaf] = thr
        tree.subset[leaf] = sub
        tree.left[leaf] = cl
        tree.right[leaf] = cr
        for c in (cl, cr):
            tree.feature[c] = -1
            tree.value[c] = 0.0
            tree.depth[c] = d + 1
            tree.parent[c] = leaf
        tree.leaf_of_row[rows[go_left]] = cl
        tree.leaf_of_row[rows[~go_left]] = cr
        return True

    def _prune(self, tree: _Tree, R, rng) -> bool:
        _, leaves, prunables = tree.walk()
        if not prunables:
            return False
        u = prunables[rng.integers(0, len(prunables))]
        cl, cr = tree.left[u], tree.right[u]
        mask_l = tree.leaf_of_row == cl
        mask_r = tree.leaf_of_row == cr
        nL, nR = int(mask_l.sum()), int(mask_r.sum())
        sL, sR = float(R[mask_l].sum()), float(R[mask_r].sum())
        d = int(tree.depth[u])
        dlik = (self._leaf_term(nL + nR, sL + sR)
                - self._leaf_term(nL, sL) - self._leaf_term(nR, sR))
        ps, ps1 = self._p_split(d), self._p_split(d + 1)
        dprior = -(np.log(ps) + 2.0 * np.log1p(-ps1) - np.log1p(-ps))
        leaves_after = len(leaves) - 1
        log_a = (dlik + dprior + np.log(len(prunables)) - np.log(leaves_after)
                 + np.log(MOVE_PROBS["grow"]) - np.log(MOVE_PROBS["prune"]))
        if np.log(rng.uniform()) >= log_a:
            return False
        tree.feature[u] = -1
        tree.value[u] = 0.0
        tree.leaf_of_row[mask_l | mask_r] = u
        for c in (int(cl), int(cr)):
            tree.parent[c] = -1
            tree.free.append(c)
        return True

    def _change(self, tree: _Tree, R, rng) -> bool:
        nodes, _, _ = tree.walk()
        internals = [u for u in nodes if tree.feature[u] >= 0]
        if not internals:
            return False
        u = internals[rng.integers(0, len(internals))]
        f, thr, sub = self._draw_rule(rng)
        desc_stack, desc_leaves = [u], []
        while desc_stack:
            v = desc_stack.pop()
            if tree.feature[v] < 0:
                desc_leaves.append(v)
            else:
                desc_stack.extend((int(tree.left[v]), int(tree.right[v])))
        marks = np.zeros(len(tree.feature), dtype=bool)
        marks[desc_leaves] = True
        rows = np.flatnonzero(marks[tree.leaf_of_row])
        new_leaf = _route(tree, rows, u, self.X, self.is_cat, override=(f, thr, sub))
        old_leaf = tree.leaf_of_row[rows]
        cap = len(tree.feature)
        n_new = np.bincount(new_leaf, minlength=cap)
        if np.any(n_new[desc_leaves] == 0):
            return False
        s_new = np.bincount(new_leaf, weights=R[rows], minlength=cap)
        n_old = np.bincount(old_leaf, minlength=cap)
        s_old = np.bincount(old_leaf, weights=R[rows], minlength=cap)
        dlik = 0.0
        for v in desc_leaves:
            dlik += self._leaf_term(int(n_new[v]), float(s_new[v]))
            dlik -= self._leaf_term(int(n_old[v]), float(s_old[v]))
        # structure and rule priors cancel against the symmetric proposal
        if np.log(rng.uniform()) >= dlik:
            return False
        tree.feature[u] = f
        tree.threshold[u] = thr
        tree.subset[u] = sub
        tree.leaf_of_row[rows] = new_leaf
        return True

    def _redraw_leaves(self, tree: _Tree, j: int, R, rng) -> None:
        _, leaves, _ = tree.walk()
        cap = len(tree.feature)
        n_l = np.bincount(tree.leaf_of_row, minlength=cap)
        s_l = np.bincount(tree.leaf_of_row, weights=R, minlength=cap)
        if self.sigma_mu2 == 0.0:
            for u in leaves:
                tree.value[u] = 0.0
        else:
            for u in leaves:
                post_var = 1.0 / (1.0 / self.sigma_mu2 + n_l[u] / self.sigma2)
                post_mean = post_var * s_l[u] / self.sigma2
                tree.value[u] = post_mean + np.sqrt(post_var) * rng.standard_normal()
        new_contrib = tree.value[tree.leaf_of_row]
        self.total += new_contrib - self.contrib[j]
        self.contrib[j] = new_contrib

    def sweep(self, rng: np.random.Generator) -> None:
        moves = list(MOVE_PROBS)
        probs = np.array([MOVE_PROBS[m] for m in moves])
        for j, tree in enumerate(self.trees):
            R = self.y - (self.total - self.contrib[j])
            move = moves[rng.choice(len(moves), p=probs)]
            self.counts[move]["proposed"] += 1
            accepted = {"grow": self._grow, "prune": self._prune,
                        "change": self._change}[move](tree, R, rng)
            if accepted:
                self.counts[move]["accepted"] += 1
            self._redraw_leaves(tree, j, R, rng)
        err = self.y - self.total
        draw = rng.chisquare(self.p.nu + self.y.size)
        self.sigma2 = (self.p.nu * self.lam + float(err @ err)) / draw
        self.sweeps_done += 1
        if self.sweeps_done % 50 == 0:
            # bound float drift from incremental updates
            self.total = self.contrib.sum(axis=0)


def backfit_sweep(sampler: _Sampler, rng: np.random.Generator) -> _Sampler:
    """Advance the sampler by one full sweep (all trees plus sigma)."""
    sampler.sweep(rng)
    return sampler


@dataclass
class BartFit:
    """Retained posterior draws in flat array form.

    Nodes of all kept ensembles are concatenated; tree t of draw d lives
    in the slice [tree_offsets[d * n_trees + t], tree_offsets[d * n_trees + t + 1])
    with child pointers local to that slice.
    """

    params: BartParams
    center: float
    scale: float
    kinds: list
    names: list
    is_cat: np.ndarray
    n_levels: np.ndarray
    tree_offsets: np.ndarray
    node_feature: np.ndarray
    node_threshold: np.ndarray
    node_subset: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_value: np.ndarray
    sigma_draws: np.ndarray
    n_train: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_keep(self) -> int:
        return len(self.sigma_draws)

    @property
    def n_features(self) -> int:
        return len(self.kinds)


def _prepare_features(X, kinds):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DataError("X must be 2-d")
    if not np.all(np.isfinite(X)):
        raise DataError("X contains missing or non-finite cells")
    p = X.shape[1]
    kinds = list(kinds) if kinds is not None else ["continuous"] * p
    if len(kinds) != p:
        raise ConfigError("kinds length must match feature count")
    is_cat = np.zeros(p, dtype=bool)
    n_levels = np.zeros(p, dtype=np.int64)
    candidates = []
    for j, kind in enumerate(kinds):
        if kind == "categorical":
            codes = X[:, j]
            if not np.allclose(codes, np.round(codes)) or codes.min() < 0:
                raise DataError(f"feature {j}: categorical codes must be nonnegative integers")
            is_cat[j] = True
            n_levels[j] = int(codes.max()) + 1
            if n_levels[j] > 62:
                raise DataError(f"feature {j}: more than 62 levels unsupported")
            candidates.append(np.empty(0))
        elif kind in NUMERIC_FEATURE_KINDS:
            uniq = np.unique(X[:, j])
            candidates.append((uniq[1:] + uniq[:-1]) / 2.0)
        else:
            raise ConfigError(f"feature {j}: unknown kind {kind!r}")
    return X, kinds, is_cat, n_levels, candidates


def fit_bart(X, y, params: BartParams | None = None, kinds=None, names=None) -> BartFit:
    """Run the backfitting sampler and keep ``n_keep`` post-burn draws.

    y may be constant: the response scale then degenerates to 1, every
    draw predicts the constant, and sigma concentrates at the prior
    floor. Identical params and seed reproduce identical draws.
    """
    params = params or BartParams()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise DataError("y must be 1-d")
    if not np.all(np.isfinite(y)):
        raise DataError("y contains missing or non-finite cells")
    X, kinds, is_cat, n_levels, candidates = _prepare_features(X, kinds)
    if X.shape[0] != y.size:
        raise DataError("X and y disagree on the number of rows")
    if y.size < 10:
        raise DataError("need at least 10 rows")
    lo, hi = float(y.min()), float(y.max())
    center = (lo + hi) / 2.0
    scale = hi - lo if hi > lo else 1.0
    y_std = (y - center) / scale
    sampler = _Sampler(X, y_std, params, is_cat, n_levels=n_levels, candidates=candidates)
    rng = np.random.default_rng(np.random.SeedSequence(params.seed))
    for _ in range(params.n_burn):
        sampler.sweep(rng)
    per_tree: list = []
    offsets = [0]
    sigma_draws = np.empty(params.n_keep)
    running = 0
    for d in range(params.n_keep):
        sampler.sweep(rng)
        for tree in sampler.trees:
            arrs = tree.compact()
            per_tree.append(arrs)
            running += arrs[0].size
            offsets.append(running)
        sigma_draws[d] = np.sqrt(sampler.sigma2) * scale
    fit = BartFit(
        params=params, center=center, scale=scale, kinds=kinds,
        names=list(names) if names is not None else [f"f{j}" for j in range(X.shape[1])],
        is_cat=is_cat, n_levels=n_levels,
        tree_offsets=np.asarray(offsets, dtype=np.int64),
        node_feature=np.concatenate([a[0] for a in per_tree]),
        node_threshold=np.concatenate([a[1] for a in per_tree]),
        node_subset=np.concatenate([a[2] for a in per_tree]),
        node_left=np.concatenate([a[3] for a in per_tree]),
        node_right=np.concatenate([a[4] for a in per_tree]),
        node_value=np.concatenate([a[5] for a in per_tree]),
        sigma_draws=sigma_draws, n_train=y.size,
        diagnostics={"moves": sampler.counts, "sigma2_std_final": sampler.sigma2},
    )
    if not np.all(np.isfinite(fit.node_value)):
        raise NumericError("non-finite leaf values in retained draws")
    return fit


def _eval_flat(feature, threshold, subset, left, right, value, X, is_cat) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    if feature[0] < 0:
        return np.full(X.shape[0], value[0])
    while True:
        feat = feature[node]
        active = feat >= 0
        if not active.any():
            return value[node]
        a_idx = np.flatnonzero(active)
        an = node[a_idx]
        af = feat[a_idx]
        xv = X[a_idx, af]
        cat = is_cat[af]
        go_left = np.empty(a_idx.size, dtype=bool)
        if cat.any():
            codes = xv[cat].astype(np.int64)
            go_left[cat] = (subset[an[cat]] >> codes) & 1 == 1
        ncat = ~cat
        if ncat.any():
            go_left[ncat] = xv[ncat] <= threshold[an[ncat]]
        node[a_idx] = np.where(go_left, left[an], right[an])


def _check_predict_input(fit: BartFit, Xnew) -> np.ndarray:
    Xnew = np.asarray(Xnew, dtype=np.float64)
    if Xnew.ndim != 2 or Xnew.shape[1] != fit.n_features:
        raise DataError(f"Xnew must have {fit.n_features} columns")
    if not np.all(np.isfinite(Xnew)):
        raise DataError("Xnew contains missing or non-finite cells")
    return Xnew


def predict_trees(fit: BartFit, Xnew, draw: int) -> np.ndarray:
    """Per-tree contributions (standardized scale) for one kept draw.

    predict_posterior for that draw equals center + scale * (sequential
    sum over rows of this matrix), exactly.
    """
    Xnew = _check_predict_input(fit, Xnew)
    if not 0 <= draw < fit.n_keep:
        raise ConfigError(f"draw index {draw} out of range")
    T = fit.params.n_trees
    out = np.empty((T, Xnew.shape[0]))
    for t in range(T):
        a, b = fit.tree_offsets[draw * T + t], fit.tree_offsets[draw * T + t + 1]
        out[t] = _eval_flat(fit.node_feature[a:b], fit.node_threshold[a:b],
                            fit.node_subset[a:b], fit.node_left[a:b],
                            fit.node_right[a:b], fit.node_value[a:b],
                            Xnew, fit.is_cat)
    return out


def predict_posterior(fit: BartFit, Xnew) -> np.ndarray:
    """Posterior draws of f(Xnew): array (n_keep, n_rows), original scale."""
    Xnew = _check_predict_input(fit, Xnew)
    T = fit.params.n_trees
    out = np.empty((fit.n_keep, Xnew.shape[0]))
    for d in range(fit.n_keep):
        acc = np.zeros(Xnew.shape[0])
        for t in range(T):
            a, b = fit.tree_offsets[d * T + t], fit.tree_offsets[d * T + t + 1]
            acc += _eval_flat(fit.node_feature[a:b], fit.node_threshold[a:b],
                              fit.node_subset[a:b], fit.node_left[a:b],
                              fit.node_right[a:b], fit.node_value[a:b],
                              Xnew, fit.is_cat)
        out[d] = fit.center + fit.scale * acc
    return out


def posterior_summary(draws, level: float = 0.90) -> dict:
    """Pointwise mean, sd (ddof=1) and central interval of draw matrix rows.

    ``draws`` is (n_draws, n_points); the interval bounds are empirical
    quantiles at (1 -/+ level)/2.
    """
    D = np.asarray(draws, dtype=np.float64)
    if D.ndim != 2:
        raise DataError("draws must be a 2-d array")
    if not 0.0 < level < 1.0:
        raise ConfigError("level must be in (0, 1)")
    lo = (1.0 - level) / 2.0
    return {
        "mean": D.mean(axis=0),
        "sd": D.std(axis=0, ddof=1),
        "lo": np.quantile(D, lo, axis=0),
        "hi": np.quantile(D, 1.0 - lo, axis=0),
    }


def save_fit(fit: BartFit, path) -> None:
    """Persist a fit; load_fit restores it with bit-identical predictions."""
    header = json.dumps({
        "params": {k: getattr(fit.params, k) for k in
                   ("n_trees", "k", "alpha", "beta", "nu", "q", "n_burn",
                    "n_keep", "seed", "leaf_scale")},
        "kinds": fit.kinds, "names": fit.names,
        "center": fit.center, "scale": fit.scale, "n_train": fit.n_train,
        "diagnostics": fit.diagnostics,
    })
    with open(path, "wb") as fh:
        np.savez(fh, header=np.frombuffer(header.encode(), dtype=np.uint8),
                 tree_offsets=fit.tree_offsets,
                 node_feature=fit.node_feature, node_threshold=fit.node_threshold,
                 node_subset=fit.node_subset, node_left=fit.node_left,
                 node_right=fit.node_right, node_value=fit.node_value,
                 sigma_draws=fit.sigma_draws,
                 is_cat=fit.is_cat, n_levels=fit.n_levels)


def load_fit(path) -> BartFit:
    with open(path, "rb") as fh:
        data = np.load(io.BytesIO(fh.read()))
    header = json.loads(bytes(data["header"]).decode())
    params = BartParams(**header["params"])
    return BartFit(
        params=params, center=header["center"], scale=header["scale"],
        kinds=header["kinds"], names=header["names"],
        is_cat=data["is_cat"], n_levels=data["n_levels"],
        tree_offsets=data["tree_offsets"],
        node_feature=data["node_feature"], node_threshold=data["node_threshold"],
        node_subset=data["node_subset"], node_left=data["node_left"],
        node_right=data["node_right"], node_value=data["node_value"],
        sigma_draws=data["sigma_draws"], n_train=header["n_train"],
        diagnostics=header.get("diagnostics", {}),
    )
