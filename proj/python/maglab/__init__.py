from ._core import (
    AggregationError,
    MagParams,
    aggregate_magface_plus,
    aggregate_mean,
    ahc,
    bcubed_f,
    dbscan,
    fnmr_at_fmr,
    kmeans,
    lambda_lower_bound,
    lemma1_probability,
    margin,
    nmi,
    optimal_magnitude,
    regularizer,
    run,
    scalar_loss,
)

__all__ = [
    "AggregationError",
    "MagParams",
    "aggregate_magface_plus",
    "aggregate_mean",
    "ahc",
    "bcubed_f",
    "dbscan",
    "fnmr_at_fmr",
    "kmeans",
    "lambda_lower_bound",
    "lemma1_probability",
    "margin",
    "nmi",
    "optimal_magnitude",
    "regularizer",
    "run",
    "scalar_loss",
]
