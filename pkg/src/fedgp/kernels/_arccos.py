"""Arc-cosine kernel, closed form, with multi-layer composition.

Normalization: k_q(x, x') = (1/pi) ||x||^q ||x'||^q J_q(theta), theta the angle
between x and x'. This equals twice the Gaussian half-space integral
2 E_w[Theta(w.x) Theta(w.x') (w.x)^q (w.x')^q], w ~ N(0, I_d); e.g. q=0 with
orthogonal inputs gives 1/2 and parallel inputs give 1.

Layer recursion (composition of the same feature map):
    k_(l+1)(x, y) = (1/pi) [k_l(x,x) k_l(y,y)]^(q/2) J_q(theta_l),
    theta_l = arccos( k_l(x,y) / sqrt(k_l(x,x) k_l(y,y)) ).

This module is shared by both backends: the closed form is a handful of BLAS
and elementwise matrix ops with nothing for a compiled per-pair loop to win.
"""

from __future__ import annotations

import numpy as np

from ..errors import ArgumentError

# J_q(0) / pi: value of (1/pi) J_q at zero angle, used for the diagonal.
_J0_OVER_PI = {0: 1.0, 1: 1.0, 2: 3.0}


def j_fn(q: int, theta):
    """Angular factor J_q(theta) for q in {0, 1, 2}."""
    if q == 0:
        return np.pi - theta
    if q == 1:
        return np.sin(theta) + (np.pi - theta) * np.cos(theta)
    if q == 2:
        ct = np.cos(theta)
        return 3.0 * np.sin(theta) * ct + (np.pi - theta) * (1.0 + 2.0 * ct * ct)
    raise ArgumentError(f"arc-cosine order q={q} has no implemented closed form (q <= 2)")


def _zero_self_angles(theta, symmetric: bool):
    # The angle between a point and itself is 0 by definition; computing it as
    # arccos(dot / sqrt(kxx * kyy)) can land an ulp off, and each extra layer
    # amplifies that by a square root (1 ulp -> ~2e-8 -> ~3e-5 by layer 2).
    if symmetric:
        if theta.ndim == 2:
            np.fill_diagonal(theta, 0.0)
        else:
            theta[...] = 0.0
    return theta


def _compose(dot, kxx, kyy, q: int, layers: int, symmetric: bool = False):
    """Run the layer recursion given first-layer geometry.

    dot: inner products, any shape broadcastable with kxx (x-side squared
    norms) and kyy (y-side squared norms). symmetric means the 2-D diagonal
    (or every entry of a 1-D dot) is a point paired with itself.
    """
    denom = np.sqrt(kxx * kyy)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(denom > 0.0, dot / np.where(denom > 0.0, denom, 1.0), 0.0)
    theta = _zero_self_angles(np.arccos(np.clip(ratio, -1.0, 1.0)), symmetric)
    if q == 0:
        k = (1.0 / np.pi) * j_fn(0, theta)
    else:
        k = (1.0 / np.pi) * (kxx * kyy) ** (q / 2.0) * j_fn(q, theta)
    kxx = kxx ** q * _J0_OVER_PI[q]
    kyy = kyy ** q * _J0_OVER_PI[q]
    for _ in range(1, layers):
        denom = np.sqrt(kxx * kyy)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denom > 0.0, k / np.where(denom > 0.0, denom, 1.0), 0.0)
        theta = _zero_self_angles(np.arccos(np.clip(ratio, -1.0, 1.0)), symmetric)
        if q == 0:
            k = (1.0 / np.pi) * j_fn(0, theta)
        else:
            k = (1.0 / np.pi) * (kxx * kyy) ** (q / 2.0) * j_fn(q, theta)
        kxx = kxx ** q * _J0_OVER_PI[q]
        kyy = kyy ** q * _J0_OVER_PI[q]
    return k


def arc_cosine_matrix(X1, X2, q: int, layers: int):
    """Full (n, m) kernel matrix."""
    j_fn(q, 0.0)  # validates q
    sq1 = np.sum(X1 * X1, axis=1)
    sq2 = np.sum(X2 * X2, axis=1)
    if q == 0 and (np.any(sq1 == 0.0) or np.any(sq2 == 0.0)):
        raise ArgumentError("arc-cosine with q=0 is undefined for zero-norm inputs")
    # First-layer inputs to the recursion: dot products and squared norms, with
    # k_1 built from the raw geometry. _compose's first step IS layer 1 when fed
    # dot/||x||^2/||y||^2 because k_1(x,x) = ||x||^(2q) * J_q(0)/pi.
    return _compose(X1 @ X2.T, sq1[:, None], sq2[None, :], q, layers,
                    symmetric=X1 is X2)


def arc_cosine_pairs(X1, X2, q: int, layers: int):
    """Elementwise kernels k(X1[i], X2[i]) for row-aligned inputs."""
    j_fn(q, 0.0)
    sq1 = np.sum(X1 * X1, axis=1)
    sq2 = np.sum(X2 * X2, axis=1)
    if q == 0 and (np.any(sq1 == 0.0) or np.any(sq2 == 0.0)):
        raise ArgumentError("arc-cosine with q=0 is undefined for zero-norm inputs")
    return _compose(np.sum(X1 * X2, axis=1), sq1, sq2, q, layers,
                    symmetric=X1 is X2)
