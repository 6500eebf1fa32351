"""Numba-compiled kernel matrix builders (default backend when numba imports).

Mirrors the _numpy_impl function-for-function. Loops are sequential (no
prange) so results are bit-identical regardless of thread count.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

_NN_GRAD_EPS = 1e-15


@njit(cache=True)
def ard_se_matrix(X1, X2, s, ell):
    n, d = X1.shape
    m = X2.shape[0]
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            d2 = 0.0
            for k in range(d):
                diff = X1[i, k] - X2[j, k]
                d2 += diff * diff / ell[k]
            K[i, j] = s * math.exp(-d2)
    return K


@njit(cache=True)
def ard_se_grads(X1, X2, s, ell):
    n, d = X1.shape
    m = X2.shape[0]
    out = np.empty((d + 1, n, m))
    for i in range(n):
        for j in range(m):
            d2 = 0.0
            for k in range(d):
                diff = X1[i, k] - X2[j, k]
                out[1 + k, i, j] = diff * diff / ell[k]
                d2 += out[1 + k, i, j]
            kij = s * math.exp(-d2)
            out[0, i, j] = kij
            for k in range(d):
                out[1 + k, i, j] = kij * out[1 + k, i, j]
    return out


@njit(cache=True)
def periodic_matrix(X1, X2, s, ell, p):
    n, d = X1.shape
    m = X2.shape[0]
    ell2 = ell * ell
    K = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                diff = X1[i, k] - X2[j, k]
                r2 += diff * diff
            su = math.sin(math.pi * math.sqrt(r2) / p)
            K[i, j] = s * math.exp(-2.0 * su * su / ell2)
    return K


@njit(cache=True)
def periodic_grads(X1, X2, s, ell, p):
    n, d = X1.shape
    m = X2.shape[0]
    ell2 = ell * ell
    out = np.empty((3, n, m))
    for i in range(n):
        for j in range(m):
            r2 = 0.0
            for k in range(d):
                diff = X1[i, k] - X2[j, k]
                r2 += diff * diff
            r = math.sqrt(r2)
            u = math.pi * r / p
            su = math.sin(u)
            kij = s * math.exp(-2.0 * su * su / ell2)
            out[0, i, j] = kij
            out[1, i, j] = kij * (4.0 * su * su / ell2)
            out[2, i, j] = kij * (2.0 * math.pi * r / (ell2 * p)) * math.sin(2.0 * u)
    return out


@njit(cache=True)
def nn_matrix(X1, X2, sig):
    n, d = X1.shape
    m = X2.shape[0]
    K = np.empty((n, m))
    b = np.empty(n)
    c = np.empty(m)
    for i in range(n):
        acc = sig[0]
        for k in range(d):
            acc += sig[k + 1] * X1[i, k] * X1[i, k]
        b[i] = 1.0 + 2.0 * acc
    for j in range(m):
        acc = sig[0]
        for k in range(d):
            acc += sig[k + 1] * X2[j, k] * X2[j, k]
        c[j] = 1.0 + 2.0 * acc
    for i in range(n):
        for j in range(m):
            a = sig[0]
            for k in range(d):
                a += sig[k + 1] * X1[i, k] * X2[j, k]
            g = 2.0 * a / math.sqrt(b[i] * c[j])
            if g > 1.0:
                g = 1.0
            elif g < -1.0:
                g = -1.0
            K[i, j] = (2.0 / math.pi) * math.asin(g)
    return K


@njit(cache=True)
def nn_grads(X1, X2, sig):
    n, d = X1.shape
    m = X2.shape[0]
    dp1 = sig.shape[0]
    out = np.empty((dp1, n, m))
    N = np.empty(n)
    M = np.empty(m)
    for i in range(n):
        acc = sig[0]
        for k in range(d):
            acc += sig[k + 1] * X1[i, k] * X1[i, k]
        N[i] = 1.0 + 2.0 * acc
    for j in range(m):
        acc = sig[0]
        for k in range(d):
            acc += sig[k + 1] * X2[j, k] * X2[j, k]
        M[j] = 1.0 + 2.0 * acc
    for i in range(n):
        for j in range(m):
            a = sig[0]
            for k in range(d):
                a += sig[k + 1] * X1[i, k] * X2[j, k]
            D = math.sqrt(N[i] * M[j])
            g = 2.0 * a / D
            if g > 1.0:
                g = 1.0
            elif g < -1.0:
                g = -1.0
            one_m_g2 = 1.0 - g * g
            if one_m_g2 < _NN_GRAD_EPS:
                one_m_g2 = _NN_GRAD_EPS
            dk_dg = (2.0 / math.pi) / math.sqrt(one_m_g2)
            for p_idx in range(dp1):
                if p_idx == 0:
                    xi = 1.0
                    yj = 1.0
                else:
                    xi = X1[i, p_idx - 1]
                    yj = X2[j, p_idx - 1]
                dg = 2.0 * xi * yj / D - g * (xi * xi / N[i] + yj * yj / M[j])
                out[p_idx, i, j] = dk_dg * dg * sig[p_idx]
    return out
