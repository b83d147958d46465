"""Fast feature conformal prediction (C++ core with Python bindings)."""

from ._core import (
    MlpModel,
    conformal_quantile,
    fcp_scores,
    ffcp_scores,
    gen_classification,
    gen_synthetic,
    gen_synthetic_hetero,
    pearson,
    raps,
    run_method,
    vanilla_scores,
    weighted_conformal_quantile,
)

__all__ = [
    "MlpModel",
    "conformal_quantile",
    "fcp_scores",
    "ffcp_scores",
    "gen_classification",
    "gen_synthetic",
    "gen_synthetic_hetero",
    "pearson",
    "raps",
    "run_method",
    "vanilla_scores",
    "weighted_conformal_quantile",
]
