"""Tabletop layout priors: synthetic data, evaluation metrics and rearrangement planning."""

from ._core import (
    DataError,
    Error,
    NumericalError,
    UsageError,
    coverage_score,
    generate,
    kl_divergence,
    plan,
    run_cli,
    sigma,
    simulate,
    vocab,
)

__all__ = [
    "DataError",
    "Error",
    "NumericalError",
    "UsageError",
    "coverage_score",
    "generate",
    "kl_divergence",
    "plan",
    "run_cli",
    "sigma",
    "simulate",
    "vocab",
]
