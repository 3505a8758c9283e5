"""Adaptive two-copy collective-measurement negativity estimation."""

from negadapt._core import (
    ConfigError,
    IoError,
    Model,
    NumericError,
    __version__,
    bell_projector,
    build_effective_operator,
    build_two_copy,
    collective_probability,
    collective_probability_dense,
    default_basis_list,
    evaluate,
    negativity,
    partial_transpose,
    probability_gradient,
    random_density_matrix,
    train,
)

__all__ = [
    "ConfigError",
    "IoError",
    "Model",
    "NumericError",
    "__version__",
    "bell_projector",
    "build_effective_operator",
    "build_two_copy",
    "collective_probability",
    "collective_probability_dense",
    "default_basis_list",
    "evaluate",
    "negativity",
    "partial_transpose",
    "probability_gradient",
    "random_density_matrix",
    "train",
]
