"""Per-diagnosis boosted-tree models on tabular ECG features.

Thin re-export of the native ``_core`` module. Feature matrices are float64
arrays of shape (n, 10) in ``FEATURE_NAMES`` order with NaN for missing ECG
measurements; labels are 0/1 arrays.
"""

from ._core import (
    FEATURE_NAMES,
    Cohort,
    EcgdxError,
    Model,
    auroc,
    beeswarm,
    bootstrap_ci,
    evaluate,
    load_cohort,
    make_folds,
    parse_cohort_csv,
    run_cli,
    shap_values,
    synth_cohort,
    train,
)

__all__ = [
    "FEATURE_NAMES",
    "Cohort",
    "EcgdxError",
    "Model",
    "auroc",
    "beeswarm",
    "bootstrap_ci",
    "evaluate",
    "load_cohort",
    "make_folds",
    "parse_cohort_csv",
    "run_cli",
    "shap_values",
    "synth_cohort",
    "train",
]
