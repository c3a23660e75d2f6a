"""Chained-equation imputation with random-forest conditional models.

Missing cells are first filled by random draws from each column's
observed marginal. Each of ``n_iter`` sweeps then visits the incomplete
columns in decreasing-missingness order (ties by column position), fits a
forest of the column on all other non-id columns, and replaces the
column's missing cells with predictive leaf draws. Because a leaf draw
returns an observed training value, imputed cells always lie in the
observed support and observed cells are never touched.

``m`` chains run independently from seeds derived per chain, giving m
completed datasets. Per-variable chain traces (mean and sd of the
imputed cells after each sweep) support a crude convergence flag; the
observed-vs-imputed diagnostics compare cell distributions per
imputation. When the missingness mechanism depends on the deleted value
itself but no predictor carries signal, those diagnostics cannot raise a
flag: the imputations then reproduce the observed marginal by
construction. A disparity flag indicates strongly selective (or badly
modeled) missingness, not NMAR specifically.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import Column, Dataset, load_table, schema_of
from .errors import ConfigError, DataError
from .forest import Forest, ForestParams, fit_forest, leaf_draws

SMD_FLAG_THRESHOLD = 0.25
DEFAULT_IMPUTE_TREES = 50


@dataclass
class ImputationStack:
    """m completed datasets plus the source table and chain traces."""

    source: Dataset
    datasets: list
    n_iter: int
    seed: int
    visit_order: list
    traces: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.datasets)


def _working_arrays(d: Dataset):
    """Numeric working copy: categorical columns as sorted-level codes."""
    work, levels = {}, {}
    for c in d.columns:
        if c.kind == "categorical":
            lv = list(c.levels)
            if not lv:
                raise DataError(f"column {c.name!r} has no observed cells")
            levels[c.name] = lv
            code = {v: i for i, v in enumerate(lv)}
            vals = np.array([code[v] if m else np.nan
                             for v, m in zip(c.values, c.mask)], dtype=np.float64)
        else:
            vals = c.values.astype(np.float64).copy()
        work[c.name] = vals
    return work, levels


def _predictor_matrix(d: Dataset, work: dict, levels: dict, target: str) -> np.ndarray:
    """Design from all non-id columns except the target; categorical
    predictors are one-hot expanded over their observed levels."""
    id_cols = set(d.role_columns("id"))
    blocks = []
    for c in d.columns:
        if c.name == target or c.name in id_cols:
            continue
        v = work[c.name]
        if c.kind == "categorical":
            lv = levels[c.name]
            for i in range(len(lv)):
                blocks.append((v == i).astype(np.float64))
        else:
            blocks.append(v)
    if not blocks:
        return np.empty((d.n, 0))
    return np.column_stack(blocks)


def visit_order_for(d: Dataset) -> list:
    """Incomplete non-id columns, most missing first, ties by position."""
    id_cols = set(d.role_columns("id"))
    order = [(c.n_missing, pos, c.name) for pos, c in enumerate(d.columns)
             if c.n_missing > 0 and c.name not in id_cols]
    order.sort(key=lambda t: (-t[0], t[1]))
    return [name for _, _, name in order]


def _run_chain(d: Dataset, n_iter: int, params: ForestParams, chain_seed,
               order: list) -> tuple:
    rng = np.random.default_rng(chain_seed)
    work, levels = _working_arrays(d)
    miss_idx = {name: np.flatnonzero(~d.column(name).mask) for name in order}
    for name in order:
        col = work[name]
        obs = col[d.column(name).mask]
        col[miss_idx[name]] = rng.choice(obs, size=miss_idx[name].size, replace=True)
    trace = {name: np.empty((n_iter, 2)) for name in order}
    for it in range(n_iter):
        for name in order:
            col = d.column(name)
            mask = col.mask
            mis = miss_idx[name]
            X = _predictor_matrix(d, work, levels, name)
            if X.shape[1] == 0:
                work[name][mis] = rng.choice(work[name][mask], size=mis.size, replace=True)
            else:
                task = "classification" if col.kind in ("binary", "categorical") else "regression"
                fp = ForestParams(n_trees=params.n_trees, mtry=params.mtry,
                                  min_leaf=params.min_leaf, max_depth=params.max_depth,
                                  bootstrap=params.bootstrap,
                                  seed=int(rng.integers(0, 2 ** 31)))
                forest = fit_forest(X[mask], work[name][mask], fp, task=task)
                work[name][mis] = leaf_draws(forest, X[mis], rng)
            imputed = work[name][mis]
            trace[name][it] = (imputed.mean(), imputed.std())
    completed = []
    for c in d.columns:
        if c.name in order:
            if c.kind == "categorical":
                lv = levels[c.name]
                vals = np.array([lv[int(round(v))] for v in work[c.name]], dtype=object)
            else:
                vals = c.values.copy()
                vals[miss_idx[c.name]] = work[c.name][miss_idx[c.name]]
            completed.append(Column(c.name, c.kind, vals, np.ones(c.n, bool)))
        else:
            completed.append(Column(c.name, c.kind, c.values.copy(), np.ones(c.n, bool) if c.n_missing == 0 else c.mask.copy()))
    return Dataset(completed, dict(d.roles)), trace


def impute_mice(d: Dataset, m: int = 5, n_iter: int = 10,
                params: ForestParams | None = None, seed: int = 0) -> ImputationStack:
    """Run m independent chains and return their completed datasets.

    A fully observed table comes back as m identical copies. Every column
    needs at least one observed cell; id columns are neither imputed nor
    used as predictors.
    """
    if m < 2:
        raise ConfigError("m must be at least 2")
    if n_iter < 1:
        raise ConfigError("n_iter must be at least 1")
    for c in d.columns:
        if c.n_missing == c.n:
            raise DataError(f"column {c.name!r} has no observed cells")
    for name in d.role_columns("id"):
        if d.column(name).n_missing:
            raise DataError(f"id column {name!r} has missing cells")
    params = params or ForestParams(n_trees=DEFAULT_IMPUTE_TREES)
    order = visit_order_for(d)
    datasets, chain_traces = [], []
    for chain_ss in np.random.SeedSequence(seed).spawn(m):
        completed, trace = _run_chain(d, n_iter, params, chain_ss, order)
        datasets.append(completed)
        chain_traces.append(trace)
    traces = {name: np.stack([ct[name] for ct in chain_traces]) for name in order}
    return ImputationStack(source=d.copy(), datasets=datasets, n_iter=n_iter,
                           seed=seed, visit_order=order, traces=traces)


def chain_trace(stack: ImputationStack, variable: str) -> dict:
    """Per-chain mean/sd series for one imputed variable.

    The convergence flag compares the across-chain sd of chain-level
    means against pooled within-chain sd over the final 3 sweeps; it is
    None (not assessable) when fewer than 3 sweeps were run.
    """
    if variable not in stack.traces:
        raise ConfigError(f"variable {variable!r} had no missing cells")
    tr = stack.traces[variable]
    means, sds = tr[:, :, 0], tr[:, :, 1]
    converged = None
    if stack.n_iter >= 3:
        last_means = means[:, -3:]
        chain_means = last_means.mean(axis=1)
        across = float(chain_means.std(ddof=1))
        pooled_within = float(sds[:, -3:].mean())
        converged = bool(across <= 0.1 * pooled_within)
    return {"mean": means, "sd": sds, "converged": converged}


def _smd(obs: np.ndarray, imp: np.ndarray) -> float:
    vo = obs.var(ddof=1) if obs.size > 1 else 0.0
    vi = imp.var(ddof=1) if imp.size > 1 else 0.0
    n_o, n_i = obs.size, imp.size
    denom = n_o + n_i - 2
    pooled = np.sqrt(((n_o - 1) * vo + (n_i - 1) * vi) / denom) if denom > 0 else 0.0
    diff = imp.mean() - obs.mean()
    if pooled == 0.0:
        return 0.0 if diff == 0.0 else float(np.inf) * np.sign(diff)
    return float(diff / pooled)


def imputation_diagnostics(stack: ImputationStack, variable: str) -> dict:
    """Standardized mean difference and variance ratio, observed versus
    imputed cells, per imputation and pooled (mean over imputations).

    The flag trips when |pooled SMD| exceeds 0.25. Values are compared on
    the numeric scale; categorical cells via their sorted-level codes.
    """
    src = stack.source.column(variable)
    if src.n_missing == 0:
        raise ConfigError(f"variable {variable!r} had no missing cells")
    mis = ~src.mask
    per = []
    for ds in stack.datasets:
        c = ds.column(variable)
        if c.kind == "categorical":
            lv = list(src.levels)
            code = {v: i for i, v in enumerate(lv)}
            vals = np.array([code[v] for v in c.values], dtype=np.float64)
        else:
            vals = c.values.astype(np.float64)
        obs, imp = vals[src.mask], vals[mis]
        vo = obs.var(ddof=1) if obs.size > 1 else 0.0
        vi = imp.var(ddof=1) if imp.size > 1 else 0.0
        if vo == 0.0:
            ratio = 1.0 if vi == 0.0 else float(np.inf)
        else:
            ratio = float(vi / vo)
        smd = _smd(obs, imp)
        per.append({"mean_observed": float(obs.mean()), "mean_imputed": float(imp.mean()),
                    "sd_observed": float(np.sqrt(vo)), "sd_imputed": float(np.sqrt(vi)),
                    "smd": smd, "variance_ratio": ratio,
                    "flag": bool(abs(smd) > SMD_FLAG_THRESHOLD)})
    pooled_smd = float(np.mean([p["smd"] for p in per]))
    pooled_ratio = float(np.mean([p["variance_ratio"] for p in per]))
    return {"per_imputation": per, "smd": pooled_smd, "variance_ratio": pooled_ratio,
            "flag": bool(abs(pooled_smd) > SMD_FLAG_THRESHOLD)}


def save_stack(stack: ImputationStack, outdir) -> None:
    """Write source + m completed CSVs, traces, and a manifest."""
    os.makedirs(outdir, exist_ok=True)
    from .dataset import save_table
    save_table(stack.source, os.path.join(outdir, "source.csv"))
    names = []
    for i, ds in enumerate(stack.datasets, start=1):
        name = f"imp_{i:03d}.csv"
        save_table(ds, os.path.join(outdir, name))
        names.append(name)
    trace_files = {}
    for var, tr in stack.traces.items():
        fname = f"trace_{var}.csv"
        with open(os.path.join(outdir, fname), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "iteration", "mean", "sd"])
            for chain in range(tr.shape[0]):
                for it in range(tr.shape[1]):
                    w.writerow([chain, it, repr(float(tr[chain, it, 0])),
                                repr(float(tr[chain, it, 1]))])
        trace_files[var] = fname
    manifest = {
        "m": stack.m, "n_iter": stack.n_iter, "seed": stack.seed,
        "visit_order": stack.visit_order, "imputations": names,
        "traces": trace_files, "schema": schema_of(stack.source),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_stack(outdir) -> ImputationStack:
    try:
        with open(os.path.join(outdir, "manifest.json")) as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read stack manifest: {exc}") from None
    schema = manifest["schema"]
    source = load_table(os.path.join(outdir, "source.csv"), schema)
    datasets = [load_table(os.path.join(outdir, f), schema) for f in manifest["imputations"]]
    traces = {}
    for var, fname in manifest["traces"].items():
        rows = []
        with open(os.path.join(outdir, fname), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for chain, it, mean, sd in reader:
                rows.append((int(chain), int(it), float(mean), float(sd)))
        n_chain = max(r[0] for r in rows) + 1
        n_it = max(r[1] for r in rows) + 1
        tr = np.empty((n_chain, n_it, 2))
        for chain, it, mean, sd in rows:
            tr[chain, it] = (mean, sd)
        traces[var] = tr
    return ImputationStack(source=source, datasets=datasets, n_iter=manifest["n_iter"],
                           seed=manifest["seed"], visit_order=manifest["visit_order"],
                           traces=traces)
