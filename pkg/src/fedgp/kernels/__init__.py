"""Kernel families, composition trees, matrices, gradients, and MC expectations."""

from .backend import ENV_VAR, active_backend, available_backends, numba_import_error
from .evaluate import (
    JITTER_REL,
    eval_arc_cosine,
    eval_ard_se,
    eval_composite,
    eval_neural_net,
    eval_periodic,
    kernel_matrix,
    kernel_matrix_grad,
    kernel_pairs,
)
from .spec import (
    KernelSpec,
    arc_cosine,
    ard_se,
    default_params,
    from_dict,
    from_json,
    kproduct,
    ksum,
    leaves,
    neural_net,
    param_count,
    param_names,
    param_slices,
    periodic,
)
from .uncertain import GaussianInput, expected_kernel_mc, expected_kernel_mc_stats

__all__ = [
    "ENV_VAR",
    "JITTER_REL",
    "GaussianInput",
    "KernelSpec",
    "active_backend",
    "arc_cosine",
    "ard_se",
    "available_backends",
    "default_params",
    "eval_arc_cosine",
    "eval_ard_se",
    "eval_composite",
    "eval_neural_net",
    "eval_periodic",
    "expected_kernel_mc",
    "expected_kernel_mc_stats",
    "from_dict",
    "from_json",
    "kernel_matrix",
    "kernel_matrix_grad",
    "kernel_pairs",
    "kproduct",
    "ksum",
    "leaves",
    "neural_net",
    "numba_import_error",
    "param_count",
    "param_names",
    "param_slices",
    "periodic",
]
