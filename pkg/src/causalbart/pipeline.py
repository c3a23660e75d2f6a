"""End-to-end orchestration with staged, re-runnable artifacts.

A run lives in one output directory: ``data/`` (source table, schema,
simulation truth), ``imputations/`` (completed tables + traces),
``fits/`` (persisted posterior draws and design matrices, one pair of
files per outcome and imputation), ``effects/`` and ``support/``
(per-imputation results), and ``report/`` (the deliverable). Each stage
reads only the previous stage's files, so the CLI can re-run any stage
in isolation.

Determinism contract: every random choice derives from the single
master seed via fixed spawn keys, per-imputation work is seeded up
front (results do not depend on the worker-thread count), and report
files are serialized with sorted keys and repr-exact floats, so a rerun
with the same config and seed reproduces summary.json and every CSV
sidecar byte for byte. Wall-clock timings would break that, so they go
to a separate timings.json next to the report.

The treatment cutoff for binary-mode runs is resolved once, from the
observed (pre-imputation) dose cells, and shared by all imputations.
"""

from __future__ import annotations

import json
import os
import shutil
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields as dc_fields

import numpy as np

from .bart import BartFit, BartParams, load_fit, save_fit
from .causal import (AnalysisModel, DEFAULT_GRID, EffectDraws, TreatmentSpec,
                     estimate_adrf, estimate_ate, estimate_cate, estimate_leap,
                     pool_adrf, unit_effect_draws)
from .dataset import Dataset, NUMERIC_KINDS, load_table, schema_of, save_table
from .errors import ConfigError, DataError, StageError
from .forest import ForestParams
from .mice import (DEFAULT_IMPUTE_TREES, chain_trace, imputation_diagnostics,
                   impute_mice, load_stack, save_stack)
from .pooling import pool_rubin
from .support import RULES, assess_support
from .synth import DgpSpec, apply_missingness, generate, oracle_truth

REPORT_VERSION = 1
STAGES = ("data", "impute", "fit", "effects", "support", "report")
_ROW_FIELDS = ("outcome", "estimate", "se", "ci_low", "ci_high", "fmi", "riv")


# ---------------------------------------------------------------- config

_TOP_KEYS = {"seed", "threads", "data", "impute", "model", "effects", "support", "out"}
_BART_KEYS = {f.name for f in dc_fields(BartParams)} - {"seed"}
_DGP_KEYS = {f.name for f in dc_fields(DgpSpec)} - {"seed"}
_ESTIMANDS = {"binary": ("ate", "cate"), "continuous": ("adrf", "leap")}


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return normalize_config(raw)


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def normalize_config(raw: dict) -> dict:
    """Validate and fill defaults; raises before any work is done."""
    _require(isinstance(raw, dict), "config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    _require("seed" in raw, "config must set a seed")
    seed = raw["seed"]
    _require(isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0,
             "seed must be a nonnegative integer")
    threads = raw.get("threads", 1)
    _require(isinstance(threads, int) and threads >= 1, "threads must be >= 1")

    data = raw.get("data")
    _require(isinstance(data, dict), "config must declare a data section")
    _require(("path" in data) != ("simulate" in data),
             "data needs exactly one of 'path' or 'simulate'")
    if "simulate" in data:
        sim = data["simulate"]
        _require(isinstance(sim, dict), "data.simulate must be an object")
        _require("seed" not in sim, "the master seed drives simulation; drop data.simulate.seed")
        bad = set(sim) - _DGP_KEYS
        _require(not bad, f"unknown simulate keys: {sorted(bad)}")
    else:
        _require(isinstance(data.get("path"), str), "data.path must be a file path")
        _require("schema" in data, "loading a table requires data.schema")

    imp = dict(raw.get("impute") or {})
    bad = set(imp) - {"m", "n_iter", "trees"}
    _require(not bad, f"unknown impute keys: {sorted(bad)}")
    m = imp.get("m", 5)
    _require(isinstance(m, int) and m >= 2, "impute.m must be an integer >= 2")
    n_iter = imp.get("n_iter", 5)
    _require(isinstance(n_iter, int) and n_iter >= 1, "impute.n_iter must be >= 1")
    trees = imp.get("trees", DEFAULT_IMPUTE_TREES)
    _require(isinstance(trees, int) and trees >= 1, "impute.trees must be >= 1")

    model = dict(raw.get("model") or {})
    bad = set(model) - {"mode", "outcomes", "cutoff", "grid", "bart"}
    _require(not bad, f"unknown model keys: {sorted(bad)}")
    mode = model.get("mode", "binary")
    _require(mode in ("binary", "continuous"), f"unknown model.mode {mode!r}")
    outcomes = model.get("outcomes")
    if outcomes is not None:
        _require(isinstance(outcomes, list) and outcomes
                 and all(isinstance(o, str) for o in outcomes),
                 "model.outcomes must be a nonempty list of column names")
    cutoff = model.get("cutoff")
    _require(cutoff is None or isinstance(cutoff, (int, float)),
             "model.cutoff must be a number")
    grid = model.get("grid")
    if grid is not None:
        _require(isinstance(grid, list) and len(grid) >= 2
                 and all(isinstance(a, (int, float)) for a in grid),
                 "model.grid must be a list of at least two numbers")
        grid = [float(a) for a in grid]
    bart = dict(model.get("bart") or {})
    bad = set(bart) - _BART_KEYS
    _require(not bad, f"unknown model.bart keys: {sorted(bad)}")

    eff = dict(raw.get("effects") or {})
    bad = set(eff) - {"estimands", "leaps", "cate", "level"}
    _require(not bad, f"unknown effects keys: {sorted(bad)}")
    estimands = eff.get("estimands")
    if estimands is None:
        estimands = ["ate"] if mode == "binary" else ["adrf", "leap"]
    _require(isinstance(estimands, list) and estimands, "effects.estimands must be nonempty")
    for e in estimands:
        _require(e in _ESTIMANDS[mode],
                 f"estimand {e!r} is not valid in {mode} mode")
    cate = eff.get("cate") or []
    _require(all(isinstance(c, str) for c in cate), "effects.cate must list column names")
    _require("cate" not in estimands or cate,
             "estimand 'cate' needs moderators in effects.cate")
    leaps = eff.get("leaps") or []
    for pair in leaps:
        _require(isinstance(pair, list) and len(pair) == 2
                 and all(isinstance(a, (int, float)) for a in pair),
                 "effects.leaps entries must be [a0, a1] pairs")
    level = eff.get("level", 0.95)
    _require(isinstance(level, (int, float)) and 0.0 < level < 1.0,
             "effects.level must be in (0, 1)")

    sup = dict(raw.get("support") or {})
    bad = set(sup) - {"rule", "apply"}
    _require(not bad, f"unknown support keys: {sorted(bad)}")
    rule = sup.get("rule", "relaxed")
    _require(rule in RULES, f"unknown support.rule {rule!r}")
    apply_rule = bool(sup.get("apply", False))

    out = raw.get("out")
    _require(out is None or isinstance(out, str), "out must be a directory path")

    return {
        "seed": seed, "threads": threads, "data": data,
        "impute": {"m": m, "n_iter": n_iter, "trees": trees},
        "model": {"mode": mode, "outcomes": outcomes, "cutoff": cutoff,
                  "grid": grid, "bart": bart},
        "effects": {"estimands": list(estimands), "leaps": [list(map(float, p)) for p in leaps],
                    "cate": list(cate), "level": float(level)},
        "support": {"rule": rule, "apply": apply_rule},
        "out": out,
    }


def _derive_seed(master: int, key: tuple) -> int:
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# ------------------------------------------------------------- serialization

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if np.isnan(v):
            return "nan"
        if np.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def write_json(path, obj) -> None:
    text = json.dumps(_jsonable(obj), sort_keys=True, indent=2,
                      ensure_ascii=False, allow_nan=False)
    _atomic_write_text(path, text + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header: list, rows: list) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    _atomic_write_text(path, "\n".join(lines) + "\n")


# ------------------------------------------------------------- model store

def _save_model(model: AnalysisModel, fit_path, model_path) -> None:
    save_fit(model.fit, fit_path)
    header = {
        "feature_names": list(model.feature_names),
        "feature_kinds": list(model.feature_kinds),
        "treat_index": model.treat_index,
        "outcome": model.outcome,
        "mode": model.spec.mode,
        "cutoff": model.cutoff,
        "grid": [float(a) for a in model.spec.grid],
    }
    blob = np.frombuffer(json.dumps(header, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    empty = np.zeros(0)
    tmp = f"{model_path}.tmp.npz"
    np.savez(tmp, header=blob, design=model.design,
             z=model.z if model.z is not None else empty,
             propensity=model.propensity if model.propensity is not None else empty)
    os.replace(tmp, model_path)


def _load_model(fit_path, model_path, dataset: Dataset) -> AnalysisModel:
    fit = load_fit(fit_path)
    try:
        with np.load(model_path) as z:
            header = json.loads(bytes(z["header"].tobytes()).decode("utf-8"))
            design = z["design"]
            zvec = z["z"]
            prop = z["propensity"]
    except OSError as exc:
        raise DataError(f"cannot read model file: {exc}") from None
    spec = TreatmentSpec(mode=header["mode"], grid=tuple(header["grid"]),
                         cutoff=header["cutoff"])
    return AnalysisModel(fit=fit, dataset=dataset, spec=spec,
                         outcome=header["outcome"], design=design,
                         feature_names=header["feature_names"],
                         feature_kinds=header["feature_kinds"],
                         treat_index=int(header["treat_index"]),
                         z=zvec if zvec.size else None,
                         propensity=prop if prop.size else None,
                         cutoff=header["cutoff"])


# ------------------------------------------------------------------ stages

def _dirs(out):
    return {s: os.path.join(out, s) for s in
            ("data", "imputations", "fits", "effects", "support", "report")}


def stage_data(cfg: dict, out) -> None:
    """Materialize the source table (simulate or copy/validate)."""
    ddir = _dirs(out)["data"]
    os.makedirs(ddir, exist_ok=True)
    if "simulate" in cfg["data"]:
        spec = DgpSpec(seed=_derive_seed(cfg["seed"], (0,)), **cfg["data"]["simulate"])
        d = generate(spec)
        truth: dict = {"spec": {f.name: getattr(spec, f.name) for f in dc_fields(spec)}}
        if spec.kind == "binary":
            truth["oracle"] = {"ate": oracle_truth(spec, "ate")}
        else:
            truth["oracle"] = {"adrf": oracle_truth(spec, "adrf")}
        if spec.missingness:
            d = apply_missingness(d, spec)
        write_json(os.path.join(ddir, "truth.json"), truth)
    else:
        schema = cfg["data"]["schema"]
        if isinstance(schema, str):
            with open(schema, encoding="utf-8") as fh:
                schema = json.load(fh)
        d = load_table(cfg["data"]["path"], schema)
    save_table(d, os.path.join(ddir, "source.csv"))
    write_json(os.path.join(ddir, "schema.json"), schema_of(d))


def _load_source(out) -> Dataset:
    ddir = _dirs(out)["data"]
    path = os.path.join(ddir, "schema.json")
    try:
        with open(path, encoding="utf-8") as fh:
            schema = json.load(fh)
    except OSError:
        raise DataError("data stage has not run (missing data/schema.json)") from None
    return load_table(os.path.join(ddir, "source.csv"), schema)


def stage_impute(cfg: dict, out) -> None:
    """Fill missing cells m times; persist the stack."""
    d = _load_source(out)
    params = ForestParams(n_trees=cfg["impute"]["trees"])
    stack = impute_mice(d, m=cfg["impute"]["m"], n_iter=cfg["impute"]["n_iter"],
                        params=params, seed=_derive_seed(cfg["seed"], (1,)))
    save_stack(stack, _dirs(out)["imputations"])


def _outcome_list(cfg: dict, d: Dataset) -> list:
    outcomes = cfg["model"]["outcomes"]
    if outcomes is None:
        outcomes = list(d.role_columns("outcome"))
    if not outcomes:
        raise ConfigError("no outcome columns declared")
    for o in outcomes:
        if o not in d.names:
            raise ConfigError(f"outcome column {o!r} not in the data")
    return outcomes


def _resolve_cutoff(cfg: dict, source: Dataset) -> float | None:
    if cfg["model"]["mode"] != "binary":
        return None
    if cfg["model"]["cutoff"] is not None:
        return float(cfg["model"]["cutoff"])
    dose = source.column(source.treatment)
    if dose.kind == "binary":
        return None
    obs = dose.observed()
    if obs.size == 0:
        raise DataError("treatment column has no observed cells; cannot place a cutoff")
    return float(np.median(obs.astype(np.float64)))


def _treatment_spec(cfg: dict, cutoff) -> TreatmentSpec:
    grid = cfg["model"]["grid"]
    return TreatmentSpec(mode=cfg["model"]["mode"],
                         grid=tuple(grid) if grid else DEFAULT_GRID,
                         cutoff=cutoff)


def stage_fit(cfg: dict, out, threads: int | None = None) -> None:
    """Fit one outcome model per (outcome, imputation); persist all."""
    from .causal import fit_binary_model, fit_dose_model
    stack = load_stack(_dirs(out)["imputations"])
    fdir = _dirs(out)["fits"]
    os.makedirs(fdir, exist_ok=True)
    outcomes = _outcome_list(cfg, stack.source)
    cutoff = _resolve_cutoff(cfg, stack.source)
    spec = _treatment_spec(cfg, cutoff)
    threads = threads or cfg["threads"]
    mode = cfg["model"]["mode"]
    bart_over = cfg["model"]["bart"]

    jobs = []
    for oi, outcome in enumerate(outcomes):
        odir = os.path.join(fdir, f"outcome_{oi:02d}")
        os.makedirs(odir, exist_ok=True)
        for ii, d in enumerate(stack.datasets):
            jobs.append((oi, outcome, odir, ii, d))

    def _fit_one(job):
        oi, outcome, odir, ii, d = job
        bp = BartParams(seed=_derive_seed(cfg["seed"], (2, oi, ii, 0)), **bart_over)
        if mode == "binary":
            fp = ForestParams(n_trees=200, seed=_derive_seed(cfg["seed"], (2, oi, ii, 1)))
            model = fit_binary_model(d, outcome, spec, bart_params=bp, forest_params=fp)
        else:
            model = fit_dose_model(d, outcome, spec, bart_params=bp)
        base = os.path.join(odir, f"imp_{ii + 1:03d}")
        _save_model(model, f"{base}.fit.npz", f"{base}.model.npz")

    with ThreadPoolExecutor(max_workers=threads) as ex:
        list(ex.map(_fit_one, jobs))

    write_json(os.path.join(fdir, "meta.json"), {
        "mode": mode, "outcomes": outcomes,
        "dirs": {o: f"outcome_{oi:02d}" for oi, o in enumerate(outcomes)},
        "cutoff": cutoff, "grid": list(spec.grid), "m": stack.m,
    })


def _load_fit_meta(out) -> dict:
    path = os.path.join(_dirs(out)["fits"], "meta.json")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError:
        raise DataError("fit stage has not run (missing fits/meta.json)") from None


def _iter_models(out, meta: dict, outcome: str, stack):
    odir = os.path.join(_dirs(out)["fits"], meta["dirs"][outcome])
    for ii in range(meta["m"]):
        base = os.path.join(odir, f"imp_{ii + 1:03d}")
        yield ii, _load_model(f"{base}.fit.npz", f"{base}.model.npz", stack.datasets[ii])


def _leap_pairs(cfg: dict, source: Dataset) -> list:
    if cfg["effects"]["leaps"]:
        return [tuple(p) for p in cfg["effects"]["leaps"]]
    obs = source.column(source.treatment).observed().astype(np.float64)
    if obs.size == 0:
        raise DataError("treatment column has no observed cells; cannot place leap anchors")
    lo, mid, hi = float(obs.min()), float(np.median(obs)), float(obs.max())
    return [(lo, mid), (mid, hi), (lo, hi)]


def _leap_label(a0: float, a1: float) -> str:
    return f"leap({a0:g},{a1:g})"


def stage_effects(cfg: dict, out, only: str | None = None) -> None:
    """Per-imputation effect draws, pooled with Rubin's rules."""
    meta = _load_fit_meta(out)
    stack = load_stack(_dirs(out)["imputations"])
    edir = _dirs(out)["effects"]
    os.makedirs(edir, exist_ok=True)
    estimands = cfg["effects"]["estimands"] if only is None else [only]
    for e in estimands:
        if e not in _ESTIMANDS[meta["mode"]]:
            raise ConfigError(f"estimand {e!r} is not valid in {meta['mode']} mode")
    if "cate" in estimands and not cfg["effects"]["cate"]:
        raise ConfigError("estimand 'cate' needs moderators in effects.cate")
    level = cfg["effects"]["level"]
    single = len(meta["outcomes"]) == 1

    pooled: dict = {"level": level, "outcomes": meta["outcomes"], "rows": [],
                    "curves": {}, "notes": []}
    for oi, outcome in enumerate(meta["outcomes"]):
        draw_rows = []            # (imputation, draw, estimand, value)
        curve_rows = []           # (imputation, dose, value)
        scalar: dict = {}         # label -> ([estimates], [variances])
        contributions = []

        def _collect(ii: int, label: str, eff: EffectDraws):
            est, var = scalar.setdefault(label, ([], []))
            est.append(eff.estimate)
            var.append(eff.variance)
            for di, v in enumerate(eff.draws, start=1):
                draw_rows.append((ii + 1, di, label, float(v)))

        for ii, model in _iter_models(out, meta, outcome, stack):
            if meta["mode"] == "binary":
                U = unit_effect_draws(model)
                if "ate" in estimands:
                    _collect(ii, "ate", estimate_ate(model, unit_draws=U))
                    if cfg["support"]["apply"]:
                        rep = assess_support(model, cfg["support"]["rule"])
                        if rep.kept.all():
                            _collect(ii, "ate_on_support",
                                     estimate_ate(model, unit_draws=U))
                        elif not rep.kept.any():
                            pooled["notes"].append(
                                f"{outcome} imp {ii + 1}: no units on support; filtered row skipped")
                        else:
                            Uk = U[:, rep.kept]
                            _collect(ii, "ate_on_support", EffectDraws(
                                label=outcome, draws=Uk.mean(axis=1),
                                n_units=int(rep.kept.sum())))
                if "cate" in estimands:
                    for mod_name in cfg["effects"]["cate"]:
                        cate = estimate_cate(model, mod_name, unit_draws=U)
                        for gi, lab in enumerate(cate.levels):
                            _collect(ii, f"cate({mod_name}:{lab})", EffectDraws(
                                label=outcome, draws=cate.draws[:, gi],
                                n_units=int(cate.sizes[gi])))
                        for (i, j), eff in sorted(cate.pairwise.items()):
                            lab = f"cate({mod_name}:{cate.levels[i]}-{cate.levels[j]})"
                            _collect(ii, lab, eff)
            else:
                if "adrf" in estimands:
                    contrib = estimate_adrf(model)
                    contributions.append(contrib)
                    for dose, mean in zip(contrib.grid, contrib.mean):
                        curve_rows.append((ii + 1, float(dose), float(mean)))
                if "leap" in estimands:
                    for a0, a1 in _leap_pairs(cfg, stack.source):
                        _collect(ii, _leap_label(a0, a1),
                                 estimate_leap(model, a0, a1))

        for label in sorted(scalar):
            est, var = scalar[label]
            if len(est) < 2:
                raise DataError(f"estimand {label!r} needs at least 2 imputations to pool")
            p = pool_rubin(est, var, level=level)
            row = p.as_row(outcome)
            row["estimand"] = label
            pooled["rows"].append(row)
        if contributions:
            curve = pool_adrf(contributions, level=level)
            pooled["curves"][outcome] = {
                "grid": [float(a) for a in curve.grid],
                "points": [{"dose": float(a), **p.as_row(outcome)}
                           for a, p in zip(curve.grid, curve.pooled)],
                "warnings": curve.warnings,
            }

        suffix = "" if single else f"_{oi:02d}"
        if draw_rows:
            write_csv(os.path.join(edir, f"draws{suffix}.csv"),
                      ["imputation", "draw", "estimand", "value"], draw_rows)
        if curve_rows:
            write_csv(os.path.join(edir, f"curves{suffix}.csv"),
                      ["imputation", "dose", "value"], curve_rows)
    write_json(os.path.join(edir, "pooled.json"), pooled)


def stage_support(cfg: dict, out) -> None:
    """Kept-fraction sidecar rows for both rules, all imputations."""
    meta = _load_fit_meta(out)
    stack = load_stack(_dirs(out)["imputations"])
    sdir = _dirs(out)["support"]
    os.makedirs(sdir, exist_ok=True)
    single = len(meta["outcomes"]) == 1
    summary: dict = {}
    for oi, outcome in enumerate(meta["outcomes"]):
        rows = []  # (imputation, dose, rule, fraction)
        agg: dict = {r: [] for r in RULES}
        for ii, model in _iter_models(out, meta, outcome, stack):
            for rule in RULES:
                rep = assess_support(model, rule)
                if rep.mode == "binary":
                    rows.append((ii + 1, "", rule, float(rep.kept.mean())))
                    agg[rule].append(float(rep.kept.mean()))
                else:
                    fracs = rep.kept.mean(axis=0)
                    for dose, frac in zip(rep.grid, fracs):
                        rows.append((ii + 1, float(dose), rule, float(frac)))
                    agg[rule].append([float(v) for v in fracs])
        suffix = "" if single else f"_{oi:02d}"
        write_csv(os.path.join(sdir, f"support{suffix}.csv"),
                  ["imputation", "dose", "rule", "fraction"], rows)
        summary[outcome] = {
            rule: {"mean_kept_fraction": _jsonable(np.mean(agg[rule], axis=0))}
            for rule in RULES
        }
    write_json(os.path.join(sdir, "summary.json"), summary)


def _mice_section(out) -> dict:
    stack = load_stack(_dirs(out)["imputations"])
    convergence = {}
    diagnostics = {}
    for var in stack.visit_order:
        tr = chain_trace(stack, var)
        convergence[var] = tr["converged"]
        if stack.source.column(var).kind in NUMERIC_KINDS:
            diag = imputation_diagnostics(stack, var)
            diagnostics[var] = {"smd": diag["smd"],
                                "variance_ratio": diag["variance_ratio"],
                                "flag": diag["flag"]}
    return {"visit_order": stack.visit_order, "convergence": convergence,
            "diagnostics": diagnostics}


def stage_report(cfg: dict, out, timings: dict | None = None) -> dict:
    """Assemble the deliverable: summary.json plus CSV sidecars."""
    meta = _load_fit_meta(out)
    edir, sdir, rdir = (_dirs(out)[k] for k in ("effects", "support", "report"))
    os.makedirs(rdir, exist_ok=True)
    try:
        with open(os.path.join(edir, "pooled.json"), encoding="utf-8") as fh:
            pooled = json.load(fh)
    except OSError:
        raise DataError("effects stage has not run (missing effects/pooled.json)") from None

    single = len(meta["outcomes"]) == 1
    notes = list(pooled.get("notes", []))
    warnings = []

    effects: dict = {}
    eff_csv_rows = []
    for row in pooled["rows"]:
        label = row["estimand"]
        clean = {k: row[k] for k in _ROW_FIELDS}
        effects.setdefault(label, []).append(clean)
        eff_csv_rows.append((label, row["outcome"], row["estimate"], row["se"],
                             row["ci_low"], row["ci_high"], row["fmi"], row["riv"]))
    write_csv(os.path.join(rdir, "effects.csv"),
              ["estimand", "outcome", "estimate", "se", "ci_low", "ci_high", "fmi", "riv"],
              eff_csv_rows)

    files = {"effects": "effects.csv", "timings": "timings.json"}
    for oi, outcome in enumerate(meta["outcomes"]):
        suffix = "" if single else f"_{oi:02d}"
        for src_name, dst_name, key in (
                (f"draws{suffix}.csv", f"effect_draws{suffix}.csv", "effect_draws"),
                (f"curves{suffix}.csv", f"adrf_curves{suffix}.csv", "adrf_curves")):
            src = os.path.join(edir, src_name)
            if os.path.exists(src):
                shutil.copyfile(src, os.path.join(rdir, dst_name))
                files.setdefault(key, []).append(dst_name)
        sup = os.path.join(sdir, f"support{suffix}.csv")
        if os.path.exists(sup):
            shutil.copyfile(sup, os.path.join(rdir, f"support{suffix}.csv"))
            files.setdefault("support", []).append(f"support{suffix}.csv")
    if "adrf_curves" not in files and meta["mode"] == "binary":
        notes.append("no dose-response curves in binary mode; curve sidecar omitted")
    if "support" not in files:
        notes.append("support stage not run; support sidecar omitted")

    support_summary = {}
    spath = os.path.join(sdir, "summary.json")
    if os.path.exists(spath):
        with open(spath, encoding="utf-8") as fh:
            support_summary = json.load(fh)

    for curve in pooled.get("curves", {}).values():
        warnings.extend(curve.get("warnings", []))

    import importlib.metadata
    import platform
    try:
        pkg_version = importlib.metadata.version("causalbart")
    except importlib.metadata.PackageNotFoundError:
        pkg_version = "unknown"
    summary = {
        "report_version": REPORT_VERSION,
        "meta": {
            "seed": cfg["seed"], "m": meta["m"], "mode": meta["mode"],
            "outcomes": meta["outcomes"], "cutoff": meta["cutoff"],
            "grid": meta["grid"], "level": cfg["effects"]["level"],
            "versions": {"package": pkg_version,
                         "python": platform.python_version(),
                         "numpy": np.__version__},
            "files": files,
        },
        "effects": effects,
        "curves": pooled.get("curves", {}),
        "support": support_summary,
        "imputation": _mice_section(out),
        "notes": sorted(set(notes)),
        "warnings": sorted(set(warnings)),
    }
    write_json(os.path.join(rdir, "summary.json"), summary)
    write_json(os.path.join(rdir, "timings.json"),
               {"seconds_by_stage": timings or {}, "note":
                "wall-clock times; kept out of summary.json so reports are reproducible"})
    return summary


_STAGE_FUNCS = {
    "data": stage_data,
    "impute": stage_impute,
    "fit": stage_fit,
    "effects": stage_effects,
    "support": stage_support,
}


def run_stage(name: str, cfg: dict, out, **kw):
    """Run one stage; on failure remove its partial outputs and rethrow
    wrapped with the stage name."""
    stage_dir = {"data": "data", "impute": "imputations", "fit": "fits",
                 "effects": "effects", "support": "support", "report": "report"}[name]
    target = os.path.join(out, stage_dir)
    try:
        if name == "report":
            return stage_report(cfg, out, **kw)
        return _STAGE_FUNCS[name](cfg, out, **kw)
    except StageError:
        raise
    except Exception as exc:
        shutil.rmtree(target, ignore_errors=True)
        raise StageError(name, exc) from exc


def run_pipeline(cfg: dict, out=None, threads: int | None = None) -> dict:
    """Full run: data -> impute -> fit -> effects -> support -> report."""
    cfg = normalize_config(cfg)
    out = out or cfg["out"]
    if not out:
        raise ConfigError("no output directory (set config 'out' or pass one)")
    os.makedirs(out, exist_ok=True)
    timings = {}
    for name in ("data", "impute", "fit", "effects", "support"):
        t0 = time.perf_counter()
        kw = {"threads": threads} if name == "fit" else {}
        run_stage(name, cfg, out, **kw)
        timings[name] = time.perf_counter() - t0
    t0 = time.perf_counter()
    summary = run_stage("report", cfg, out, timings=timings)
    timings["report"] = time.perf_counter() - t0
    return summary
