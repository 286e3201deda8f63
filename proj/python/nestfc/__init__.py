"""Bayesian clustering of functional data with (nested) generalized Dirichlet process priors."""

from ._nestfc import (
    DataError,
    NumericalError,
    adjusted_rand,
    diagnose,
    expected_clusters,
    expected_new_cluster,
    fit,
    posterior_partition,
    psrf,
    read_dataset,
    simulate,
    simulate_partition,
    summarize,
    truncation_bound,
)

__all__ = [
    "DataError",
    "NumericalError",
    "adjusted_rand",
    "diagnose",
    "expected_clusters",
    "expected_new_cluster",
    "fit",
    "posterior_partition",
    "psrf",
    "read_dataset",
    "simulate",
    "simulate_partition",
    "summarize",
    "truncation_bound",
]
