"""Pure-numpy kernel matrix builders (fallback backend).

Each family exposes ``<name>_matrix(X1, X2, ...)`` and ``<name>_grads(X1, X2, ...)``.
Parameters arrive already exponentiated (positive quantities); gradient stacks
are returned with respect to the *log* parameters, one (n, m) slab per slot in
the documented layout order.
"""

from __future__ import annotations

import numpy as np

# Floor on 1 - g^2 in the neural-net gradient; only reachable in degenerate
# near-parallel huge-variance configurations.
_NN_GRAD_EPS = 1e-15


def ard_se_matrix(X1, X2, s, ell):
    diff = X1[:, None, :] - X2[None, :, :]
    d2 = np.sum(diff * diff / ell, axis=-1)
    return s * np.exp(-d2)


def ard_se_grads(X1, X2, s, ell):
    n, d = X1.shape
    m = X2.shape[0]
    diff = X1[:, None, :] - X2[None, :, :]
    w = diff * diff / ell
    K = s * np.exp(-np.sum(w, axis=-1))
    out = np.empty((d + 1, n, m))
    out[0] = K
    for j in range(d):
        out[1 + j] = K * w[:, :, j]
    return out


def periodic_matrix(X1, X2, s, ell, p):
    diff = X1[:, None, :] - X2[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    sin_u = np.sin(np.pi * r / p)
    return s * np.exp(-2.0 * sin_u * sin_u / (ell * ell))


def periodic_grads(X1, X2, s, ell, p):
    n = X1.shape[0]
    m = X2.shape[0]
    diff = X1[:, None, :] - X2[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    u = np.pi * r / p
    sin_u = np.sin(u)
    ell2 = ell * ell
    K = s * np.exp(-2.0 * sin_u * sin_u / ell2)
    out = np.empty((3, n, m))
    out[0] = K
    out[1] = K * (4.0 * sin_u * sin_u / ell2)
    out[2] = K * (2.0 * np.pi * r / (ell2 * p)) * np.sin(2.0 * u)
    return out


def _nn_pieces(X1, X2, sig):
    n = X1.shape[0]
    m = X2.shape[0]
    Xt1 = np.concatenate([np.ones((n, 1)), X1], axis=1)
    Xt2 = np.concatenate([np.ones((m, 1)), X2], axis=1)
    A = (Xt1 * sig) @ Xt2.T
    b = np.sum(Xt1 * Xt1 * sig, axis=1)
    c = np.sum(Xt2 * Xt2 * sig, axis=1)
    N = 1.0 + 2.0 * b
    M = 1.0 + 2.0 * c
    D = np.sqrt(N[:, None] * M[None, :])
    g = np.clip(2.0 * A / D, -1.0, 1.0)
    return Xt1, Xt2, N, M, D, g


def nn_matrix(X1, X2, sig):
    _, _, _, _, _, g = _nn_pieces(X1, X2, sig)
    return (2.0 / np.pi) * np.arcsin(g)


def nn_grads(X1, X2, sig):
    n = X1.shape[0]
    m = X2.shape[0]
    dp1 = sig.shape[0]
    Xt1, Xt2, N, M, D, g = _nn_pieces(X1, X2, sig)
    dk_dg = (2.0 / np.pi) / np.sqrt(np.maximum(1.0 - g * g, _NN_GRAD_EPS))
    out = np.empty((dp1, n, m))
    for i in range(dp1):
        xi = Xt1[:, i][:, None]
        yi = Xt2[:, i][None, :]
        dg = 2.0 * xi * yi / D - g * (xi * xi / N[:, None] + yi * yi / M[None, :])
        out[i] = dk_dg * dg * sig[i]
    return out
