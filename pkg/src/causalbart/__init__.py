"""Multiply-imputed causal effect estimation with tree ensembles.

The pieces, bottom up: typed tabular data (``dataset``), synthetic
benchmark generators with known truth (``synth``), random forests for
imputation and propensity work (``forest``), chained-equation multiple
imputation (``mice``), a sum-of-trees Bayesian outcome model (``bart``),
counterfactual effect estimation (``causal``), common-support screening
(``support``), Rubin's-rules pooling (``pooling``), and an end-to-end
staged pipeline with a CLI (``pipeline``, ``cli``).
"""

from .bart import (BartFit, BartParams, fit_bart, load_fit, posterior_summary,
                   predict_posterior, predict_trees, save_fit)
from .causal import (AnalysisModel, CateResult, EffectDraws, TreatmentSpec,
                     binarize_by_median, estimate_adrf, estimate_ate,
                     estimate_cate, estimate_leap, estimate_leap_preset,
                     fit_binary_model, fit_dose_model, fit_propensity,
                     pool_adrf, recombine_cate, unit_effect_draws)
from .dataset import (Column, Dataset, load_table, missingness_profile,
                      save_table, schema_of, summarize)
from .errors import (CausalBartError, ConfigError, DataError, NumericError,
                     StageError)
from .forest import (Forest, ForestParams, fit_forest, leaf_draws, oob_predict,
                     permutation_importance, predict_forest, select_covariates)
from .fixtures import Fixture, check_fixture, load_manifest
from .mice import (ImputationStack, chain_trace, imputation_diagnostics,
                   impute_mice, load_stack, save_stack)
from .pipeline import (load_config, normalize_config, run_pipeline, run_stage)
from .pooling import PooledEffect, fmi_from_riv, pool_curve, pool_rubin
from .support import SupportReport, assess_support, support_summary
from .synth import (DgpSpec, apply_missingness, generate, oracle_truth)

__version__ = "0.1.0"

__all__ = [
    "AnalysisModel", "BartFit", "BartParams", "CateResult", "CausalBartError",
    "Column", "ConfigError", "DataError", "Dataset", "DgpSpec", "EffectDraws",
    "Fixture", "Forest", "ForestParams", "ImputationStack", "NumericError",
    "PooledEffect", "StageError", "SupportReport", "TreatmentSpec",
    "apply_missingness", "assess_support", "binarize_by_median", "chain_trace",
    "check_fixture", "estimate_adrf", "estimate_ate", "estimate_cate",
    "estimate_leap", "estimate_leap_preset", "fit_bart", "fit_binary_model",
    "fit_dose_model", "fit_forest", "fit_propensity", "fmi_from_riv",
    "generate", "imputation_diagnostics", "impute_mice", "leaf_draws",
    "load_config", "load_fit", "load_manifest", "load_stack", "load_table",
    "missingness_profile", "normalize_config", "oob_predict", "oracle_truth",
    "permutation_importance", "pool_adrf", "pool_curve", "pool_rubin",
    "posterior_summary", "predict_forest", "predict_posterior", "predict_trees",
    "recombine_cate", "run_pipeline", "run_stage", "save_fit", "save_stack",
    "save_table", "schema_of", "select_covariates", "summarize",
    "support_summary", "unit_effect_draws",
]
