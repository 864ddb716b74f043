"""Proper calibration error, refinement, and sharpness estimation.

Thin wrapper around the C++ core. All estimators take numpy arrays:
an (n, k) prediction matrix of simplex rows and an (n,) integer label vector.
"""

from ._core import (
    DEFAULT_BANDWIDTH_GRID,
    InputError,
    bandwidth_loo_mle,
    binned_classwise_ce1,
    binned_toplabel_ece,
    ce_direct,
    classwise_ce,
    cond_expectation,
    decompose,
    generate,
    ground_truth_ce,
    isotonic_apply,
    isotonic_fit,
    layer_sharpness,
    make_prob_vector,
    softmax_extended,
    temp_map,
    temperature_apply,
    temperature_fit,
)
from ._core import __version__

__all__ = [
    "DEFAULT_BANDWIDTH_GRID",
    "InputError",
    "__version__",
    "bandwidth_loo_mle",
    "binned_classwise_ce1",
    "binned_toplabel_ece",
    "ce_direct",
    "classwise_ce",
    "cond_expectation",
    "decompose",
    "generate",
    "ground_truth_ce",
    "isotonic_apply",
    "isotonic_fit",
    "layer_sharpness",
    "make_prob_vector",
    "softmax_extended",
    "temp_map",
    "temperature_apply",
    "temperature_fit",
]
