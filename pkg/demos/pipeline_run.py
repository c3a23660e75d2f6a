"""One-config pipeline run: every stage, one seed, one report.

Builds a small run config, executes the full chain into a scratch
directory, and prints the report highlights. The equivalent shell
command is

    causalbart run --config cfg.json --out rundir

and each stage is also its own subcommand (simulate, impute, fit,
effects, support, report) against the same directory.
"""

import json
import tempfile
from pathlib import Path

from causalbart.pipeline import run_pipeline

cfg = {
    "seed": 20260822,
    "data": {"simulate": {
        "kind": "binary", "n": 300,
        "effect": {"form": "constant", "tau": 3.0},
        "confounding": 1.0, "noise_sd": 1.0, "n_covariates": 4,
        "missingness": [{"kind": "MCAR", "column": "y", "rate": 0.15}],
    }},
    "impute": {"m": 3, "n_iter": 3, "trees": 30},
    "model": {"mode": "binary",
              "bart": {"n_trees": 40, "n_burn": 100, "n_keep": 200}},
    "effects": {"estimands": ["ate", "cate"], "cate": ["x1"], "level": 0.95},
    "support": {"rule": "relaxed", "apply": False},
}

out = Path(tempfile.mkdtemp(prefix="causalbart-demo-"))
print(f"running into {out}")
summary = run_pipeline(cfg, out=out)

print(f"\nreport version {summary['report_version']}, "
      f"m={summary['meta']['m']}, mode={summary['meta']['mode']}")
for label, rows in summary["effects"].items():
    for row in rows:
        print(f"  {label}: {row['estimate']:+.3f} "
              f"[{row['ci_low']:+.3f}, {row['ci_high']:+.3f}] "
              f"fmi {row['fmi']:.3f}")
for outcome, rules in summary["support"].items():
    kept = {r: f"{100 * v['mean_kept_fraction']:.1f}%" for r, v in rules.items()}
    print(f"  support on {outcome}: {kept}")
if summary["notes"]:
    print("  notes: " + "; ".join(summary["notes"]))

files = sorted(p.name for p in (out / "report").iterdir())
print(f"\nreport directory: {', '.join(files)}")
print(json.dumps(summary["imputation"]["diagnostics"], indent=2))
