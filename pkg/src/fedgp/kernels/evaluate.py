"""Kernel evaluation over spec trees: scalars, matrices, and gradients.

All hyper-parameters arrive log-domain in one flat vector (see
:mod:`fedgp.kernels.spec` for the layout); gradients are returned with respect
to those log parameters.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError, NumericalError
from . import _arccos, backend
from .spec import KernelSpec, ard_se, arc_cosine, neural_net, param_count, param_slices, periodic

# Relative jitter every downstream factorization adds to a Gram matrix diagonal
# before the first attempt (scaled by the mean diagonal).
JITTER_REL = 1e-10

# exp() of a log parameter beyond this leaves the positive normal float range
# (underflow to 0 divides by zero inside kernels; overflow poisons the Gram
# matrix with inf), so such iterates are rejected as numerical failures.
_LOG_PARAM_LIMIT = 700.0


def _as_matrix(X, d: int, name: str):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if d == 1 else X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != d:
        raise ArgumentError(f"{name} must be (n, {d}), got shape {X.shape}")
    if X.size and not np.all(np.isfinite(X)):
        raise ArgumentError(f"{name} contains non-finite values")
    return X


def _check_params(spec: KernelSpec, params):
    params = np.asarray(params, dtype=float)
    p = param_count(spec)
    if params.shape != (p,):
        raise ArgumentError(f"params must have shape ({p},) for this spec, got {params.shape}")
    if p and not np.all(np.isfinite(params)):
        raise ArgumentError("params contain non-finite values")
    if p and np.max(np.abs(params), initial=0.0) > _LOG_PARAM_LIMIT:
        raise NumericalError(
            f"log-domain kernel parameter magnitude exceeds {_LOG_PARAM_LIMIT:.0f}; "
            "exp() would underflow to zero or overflow to inf")
    return params


def _leaf_matrix(leaf: KernelSpec, theta, X1, X2, impl):
    if leaf.family == "ARD_SE":
        return impl.ard_se_matrix(X1, X2, np.exp(theta[0]), np.exp(theta[1:]))
    if leaf.family == "PERIODIC":
        return impl.periodic_matrix(X1, X2, np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2]))
    if leaf.family == "NEURAL_NET":
        return impl.nn_matrix(X1, X2, np.exp(theta))
    return _arccos.arc_cosine_matrix(X1, X2, leaf.q, leaf.layers)


def _leaf_grads(leaf: KernelSpec, theta, X1, X2, impl):
    if leaf.family == "ARD_SE":
        return impl.ard_se_grads(X1, X2, np.exp(theta[0]), np.exp(theta[1:]))
    if leaf.family == "PERIODIC":
        return impl.periodic_grads(X1, X2, np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2]))
    if leaf.family == "NEURAL_NET":
        return impl.nn_grads(X1, X2, np.exp(theta))
    return np.zeros((0, X1.shape[0], X2.shape[0]))


def _matrix_rec(spec: KernelSpec, params, X1, X2, impl):
    if spec.is_leaf:
        return _leaf_matrix(spec, params, X1, X2, impl)
    offset = 0
    parts = []
    for child in spec.children:
        p = param_count(child)
        parts.append(_matrix_rec(child, params[offset:offset + p], X1, X2, impl))
        offset += p
    if spec.op == "SUM":
        out = parts[0].copy()
        for part in parts[1:]:
            out += part
        return out
    out = parts[0].copy()
    for part in parts[1:]:
        out *= part
    return out


def _matrix_grads_rec(spec: KernelSpec, params, X, impl):
    """Returns (K, list of per-parameter gradient matrices)."""
    if spec.is_leaf:
        K = _leaf_matrix(spec, params, X, X, impl)
        return K, list(_leaf_grads(spec, params, X, X, impl))
    offset = 0
    child_K = []
    child_G = []
    for child in spec.children:
        p = param_count(child)
        K_c, G_c = _matrix_grads_rec(child, params[offset:offset + p], X, impl)
        child_K.append(K_c)
        child_G.append(G_c)
        offset += p
    if spec.op == "SUM":
        K = child_K[0].copy()
        for K_c in child_K[1:]:
            K += K_c
        grads = [g for G_c in child_G for g in G_c]
        return K, grads
    K = child_K[0].copy()
    for K_c in child_K[1:]:
        K *= K_c
    grads = []
    for i, G_c in enumerate(child_G):
        if not G_c:
            continue
        rest = None
        for j, K_c in enumerate(child_K):
            if j == i:
                continue
            rest = K_c.copy() if rest is None else rest * K_c
        for g in G_c:
            grads.append(g if rest is None else g * rest)
    return K, grads


def kernel_matrix(spec: KernelSpec, params, X, X2=None):
    """Cross-covariance matrix K[i, j] = k(X[i], X2[j]); X2=None means X."""
    d = spec.dim
    X = _as_matrix(X, d, "X")
    X2m = X if X2 is None else _as_matrix(X2, d, "X2")
    params = _check_params(spec, params)
    return _matrix_rec(spec, params, X, X2m, backend.impl())


def kernel_matrix_grad(spec: KernelSpec, params, X):
    """Gradient of K(X, X) w.r.t. each log hyper-parameter.

    Returns (K, grads) where grads is a list of (n, n) matrices in the flat
    parameter layout order.
    """
    d = spec.dim
    X = _as_matrix(X, d, "X")
    params = _check_params(spec, params)
    return _matrix_grads_rec(spec, params, X, backend.impl())


def kernel_pairs(spec: KernelSpec, params, A, B):
    """Elementwise kernels k(A[i], B[i]) for row-aligned (n, d) inputs.

    Shared numpy path (used by the Monte-Carlo expectation, which is not a
    training hot loop).
    """
    d = spec.dim
    A = _as_matrix(A, d, "A")
    B = _as_matrix(B, d, "B")
    if A.shape[0] != B.shape[0]:
        raise ArgumentError(f"A and B must have equal row counts, got {A.shape[0]} and {B.shape[0]}")
    params = _check_params(spec, params)
    return _pairs_rec(spec, params, A, B)


def _pairs_rec(spec: KernelSpec, params, A, B):
    if spec.is_leaf:
        theta = params
        if spec.family == "ARD_SE":
            s = np.exp(theta[0])
            ell = np.exp(theta[1:])
            diff = A - B
            return s * np.exp(-np.sum(diff * diff / ell, axis=1))
        if spec.family == "PERIODIC":
            s, ell, p = np.exp(theta)
            diff = A - B
            r = np.sqrt(np.sum(diff * diff, axis=1))
            su = np.sin(np.pi * r / p)
            return s * np.exp(-2.0 * su * su / (ell * ell))
        if spec.family == "NEURAL_NET":
            sig = np.exp(theta)
            At = np.concatenate([np.ones((A.shape[0], 1)), A], axis=1)
            Bt = np.concatenate([np.ones((B.shape[0], 1)), B], axis=1)
            a = np.sum(At * sig * Bt, axis=1)
            nb = 1.0 + 2.0 * np.sum(At * At * sig, axis=1)
            mc = 1.0 + 2.0 * np.sum(Bt * Bt * sig, axis=1)
            g = np.clip(2.0 * a / np.sqrt(nb * mc), -1.0, 1.0)
            return (2.0 / np.pi) * np.arcsin(g)
        return _arccos.arc_cosine_pairs(A, B, spec.q, spec.layers)
    offset = 0
    parts = []
    for child in spec.children:
        p = param_count(child)
        parts.append(_pairs_rec(child, params[offset:offset + p], A, B))
        offset += p
    out = parts[0].copy()
    for part in parts[1:]:
        if spec.op == "SUM":
            out += part
        else:
            out *= part
    return out


def eval_composite(spec: KernelSpec, x, x2, params) -> float:
    """Scalar kernel value for a single input pair under any spec tree."""
    d = spec.dim
    x = _as_matrix(np.atleast_1d(np.asarray(x, dtype=float)), d, "x")
    x2 = _as_matrix(np.atleast_1d(np.asarray(x2, dtype=float)), d, "x2")
    if x.shape[0] != 1 or x2.shape[0] != 1:
        raise ArgumentError("eval_composite takes single d-vectors; use kernel_matrix for batches")
    params = _check_params(spec, params)
    return float(_matrix_rec(spec, params, x, x2, backend.impl())[0, 0])


def eval_ard_se(x, x2, params) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return eval_composite(ard_se(x.shape[-1]), x, x2, params)


def eval_periodic(t, t2, params) -> float:
    return eval_composite(periodic(1), [float(t)], [float(t2)], params)


def eval_neural_net(x, x2, params) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return eval_composite(neural_net(x.shape[-1]), x, x2, params)


def eval_arc_cosine(x, x2, q: int, layers: int = 1) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return eval_composite(arc_cosine(x.shape[-1], q=q, layers=layers), x, x2, np.zeros(0))
