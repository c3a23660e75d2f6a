"""Golden-value fixtures: reference numbers bound to executable checks.

A fixture names a registered producer (the command that computes actual
values) and an expected-values file. Every expected value carries a
provenance tag: "reference" for externally published numbers we check
consistency against, "direct" for values that must hold by
construction, "oracle" for simulation ground truth. Comparisons are
absolute-tolerance by default; "ge" expects actual >= expected.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

PROVENANCE_TAGS = ("reference", "direct", "oracle")


@dataclass
class Fixture:
    name: str
    command: str
    expected_path: str
    tolerance: float
    expected: dict = field(default_factory=dict)


def load_manifest(path) -> list:
    """Fixtures from a manifest file, expected values loaded eagerly."""
    try:
        with open(path, encoding="utf-8") as fh:
            entries = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read fixture manifest: {exc}") from None
    base = os.path.dirname(os.path.abspath(path))
    fixtures = []
    for e in entries:
        missing = {"name", "command", "expected", "tolerance"} - set(e)
        if missing:
            raise ConfigError(f"fixture entry missing fields: {sorted(missing)}")
        epath = os.path.join(base, e["expected"])
        try:
            with open(epath, encoding="utf-8") as fh:
                expected = json.load(fh)["values"]
        except OSError as exc:
            raise DataError(f"fixture {e['name']}: missing artifact: {exc}") from None
        for label, spec in expected.items():
            if spec.get("provenance") not in PROVENANCE_TAGS:
                raise ConfigError(
                    f"fixture {e['name']}: value {label!r} lacks a provenance tag")
            if "tolerance" not in spec and "tolerance" not in e:
                raise ConfigError(
                    f"fixture {e['name']}: value {label!r} has no tolerance")
        fixtures.append(Fixture(name=e["name"], command=e["command"],
                                expected_path=epath, tolerance=float(e["tolerance"]),
                                expected=expected))
    return fixtures


def check_fixture(f: Fixture) -> dict:
    """Run the fixture's producer and compare against expected values."""
    if f.command not in PRODUCERS:
        raise ConfigError(f"fixture {f.name}: unknown command {f.command!r}")
    actual = PRODUCERS[f.command]()
    deltas = {}
    failures = []
    for label, spec in f.expected.items():
        if label not in actual:
            failures.append(f"{label}: producer emitted no value")
            continue
        got = float(actual[label])
        want = float(spec["value"])
        tol = float(spec.get("tolerance", f.tolerance))
        mode = spec.get("comparison", "abs")
        if mode == "abs":
            deltas[label] = got - want
            if abs(got - want) > tol:
                failures.append(f"{label}: got {got!r}, want {want!r} +/- {tol!r}")
        elif mode == "ge":
            deltas[label] = got - want
            if got < want:
                failures.append(f"{label}: got {got!r}, want >= {want!r}")
        else:
            raise ConfigError(f"fixture {f.name}: unknown comparison {mode!r}")
    return {"name": f.name, "passed": not failures, "deltas": deltas,
            "failures": failures}


# --------------------------------------------------------------- producers

def _produce_pooled_consistency() -> dict:
    """fmi recomputed from each stored riv at m=100."""
    from .pooling import fmi_from_riv
    rivs = {"row1": 0.432, "row2": 0.120, "row3": 0.154, "row4": 0.331}
    return {f"{k}_fmi": fmi_from_riv(v, m=100) for k, v in rivs.items()}


def _small_dose_model(seed: int = 7, n: int = 80):
    from .bart import BartParams
    from .causal import TreatmentSpec, fit_dose_model
    from .synth import DgpSpec, generate
    spec = DgpSpec(kind="dose", n=n, response={"shape": "plateau", "height": 4.0},
                   noise_sd=2.0, seed=seed)
    d = generate(spec)
    params = BartParams(n_trees=20, n_burn=30, n_keep=60, seed=seed + 1)
    return fit_dose_model(d, "y", TreatmentSpec(mode="continuous"), bart_params=params), spec


def _produce_leap_telescoping() -> dict:
    """Two-step dose contrasts must chain to the direct contrast."""
    from .causal import estimate_leap
    model, _ = _small_dose_model()
    lo, mid, hi = 0.0, 37.0, 80.0
    two_step = estimate_leap(model, lo, mid).draws + estimate_leap(model, mid, hi).draws
    direct = estimate_leap(model, lo, hi).draws
    return {"max_abs_gap": float(np.max(np.abs(two_step - direct)))}


def _produce_plateau_recovery() -> dict:
    """Pooled dose curve vs simulation oracle: grid points covered."""
    from .bart import BartParams
    from .causal import TreatmentSpec, estimate_adrf, fit_dose_model, pool_adrf
    from .synth import DgpSpec, generate, oracle_truth
    spec = DgpSpec(kind="dose", n=400, response={"shape": "plateau", "height": 4.0},
                   noise_sd=2.0, seed=11)
    d = generate(spec)
    oracle = np.asarray(oracle_truth(spec, "adrf")["curve"])
    tspec = TreatmentSpec(mode="continuous")
    contribs = []
    for rep in range(2):
        params = BartParams(n_trees=50, n_burn=100, n_keep=200, seed=100 + rep)
        model = fit_dose_model(d, "y", tspec, bart_params=params)
        contribs.append(estimate_adrf(model))
    curve = pool_adrf(contribs, level=0.95)
    covered = sum(1 for p, truth in zip(curve.pooled, oracle)
                  if p.ci_low <= truth <= p.ci_high)
    return {"points_covered": float(covered)}


PRODUCERS = {
    "pooled_consistency": _produce_pooled_consistency,
    "leap_telescoping": _produce_leap_telescoping,
    "plateau_recovery": _produce_plateau_recovery,
}
