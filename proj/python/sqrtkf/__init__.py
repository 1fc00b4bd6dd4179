"""Differentiable square-root Kalman filtering."""

from ._core import (
    DegenerateInnovationError,
    DenseFilterResult,
    FilterResult,
    ModelParams,
    ShapeError,
    SingularSystemError,
    Triangularization,
    ValidationError,
    dense_filter,
    filter,
    filter_jvp,
    gradient,
    jvp_triangularize,
    rank_sweep_model,
    run_experiment,
    triangularize,
    vjp_triangularize,
)

__all__ = [
    "DegenerateInnovationError",
    "DenseFilterResult",
    "FilterResult",
    "ModelParams",
    "ShapeError",
    "SingularSystemError",
    "Triangularization",
    "ValidationError",
    "dense_filter",
    "filter",
    "filter_jvp",
    "gradient",
    "jvp_triangularize",
    "rank_sweep_model",
    "run_experiment",
    "triangularize",
    "vjp_triangularize",
]
