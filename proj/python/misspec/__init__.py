"""Joint learning-and-optimization schemes for misspecified problems."""

from ._core import (
    ConfigError,
    DimensionMismatch,
    FeasibleSet,
    InadmissibleParameter,
    averaging_bound,
    contraction_factor,
    extragradient_step_bound,
    learning_bound,
    run_config,
    run_config_file,
    strongly_convex_bound,
    subgradient_bound,
    tikhonov_step,
)

__all__ = [
    "ConfigError",
    "DimensionMismatch",
    "FeasibleSet",
    "InadmissibleParameter",
    "averaging_bound",
    "contraction_factor",
    "extragradient_step_bound",
    "learning_bound",
    "run_config",
    "run_config_file",
    "strongly_convex_bound",
    "subgradient_bound",
    "tikhonov_step",
]
