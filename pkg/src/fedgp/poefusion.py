"""Generalized product-of-experts fusion of per-client GP predictions.

Experts report Gaussian marginals (mean_i, var_i) per test point; fusion with
weights beta combines precisions:

    1/var   = sum_i beta_i / var_i
    mean    = var * sum_i beta_i * mean_i / var_i

Weights on the probability simplex keep the fused variance calibrated when
experts agree. Weight fitting is projected gradient descent on held-out MSE
or NLPD, keeping the best iterate seen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

_CRITERIA = ("mse", "nlpd")


@dataclass(frozen=True)
class ExpertPrediction:
    """Per-point Gaussian marginals from one expert: mean (m,), var (m,) > 0."""

    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        var = np.asarray(self.var, dtype=float).ravel()
        if mean.shape != var.shape:
            raise ArgumentError(f"mean {mean.shape} vs var {var.shape}")
        if mean.size == 0:
            raise ArgumentError("empty expert prediction")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise ArgumentError("expert prediction contains non-finite values")
        if np.any(var <= 0):
            raise ArgumentError("expert variances must be strictly positive")
        mean = mean.copy()
        var = var.copy()
        mean.setflags(write=False)
        var.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    def __len__(self) -> int:
        return self.mean.shape[0]


@dataclass(frozen=True)
class FusionWeights:
    """Fitted simplex weights plus the fitting trace."""

    betas: np.ndarray
    criterion: str
    value: float
    history: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.asarray(self.betas, dtype=float).ravel()
        h = np.asarray(self.history, dtype=float).ravel()
        b.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "betas", b)
        object.__setattr__(self, "history", h)


def uniform_weights(k: int) -> np.ndarray:
    if k < 1:
        raise ArgumentError("need at least one expert")
    return np.full(k, 1.0 / k)


def _stack(predictions) -> tuple[np.ndarray, np.ndarray]:
    predictions = list(predictions)
    if not predictions:
        raise ArgumentError("need at least one expert prediction")
    m = len(predictions[0])
    for p in predictions:
        if len(p) != m:
            raise ArgumentError("experts disagree on the number of test points")
    means = np.stack([p.mean for p in predictions])
    variances = np.stack([p.var for p in predictions])
    return means, variances


def _check_betas(betas, k: int) -> np.ndarray:
    betas = np.asarray(betas, dtype=float).ravel()
    if betas.shape != (k,):
        raise ArgumentError(f"expected {k} weights, got shape {betas.shape}")
    if not np.all(np.isfinite(betas)):
        raise ArgumentError("weights contain non-finite values")
    if np.any(betas < 0):
        raise ArgumentError("weights must be nonnegative")
    if not betas.sum() > 0:
        raise ArgumentError("weights must not all be zero")
    return betas


def gpoe_fuse_arrays(means: np.ndarray, variances: np.ndarray,
                     betas) -> tuple[np.ndarray, np.ndarray]:
    """Fuse stacked expert marginals: means/variances (k, m), betas (k,)."""
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    if means.ndim != 2 or means.shape != variances.shape:
        raise ArgumentError(f"means {means.shape} vs variances {variances.shape}; need matching (k, m)")
    if np.any(variances <= 0):
        raise ArgumentError("expert variances must be strictly positive")
    betas = _check_betas(betas, means.shape[0])
    s = 1.0 / variances
    precision = betas @ s
    fused_var = 1.0 / precision
    fused_mean = fused_var * (betas @ (means * s))
    return fused_mean, fused_var


def gpoe_fuse(predictions, betas) -> tuple[np.ndarray, np.ndarray]:
    """Fuse a list of ExpertPrediction with weights betas -> (mean, var)."""
    means, variances = _stack(predictions)
    return gpoe_fuse_arrays(means, variances, betas)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1}."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ArgumentError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ArgumentError("cannot project non-finite values")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    tau = css[rho] / (rho + 1.0)
    return np.maximum(v - tau, 0.0)


def _criterion_and_grad(means, s, betas, targets, criterion):
    """Value and d/dbeta of the fitting criterion at the current weights.

    s = 1/variances, shape (k, m). Fused moments: B = beta @ s (precision),
    mu = (beta @ (means * s)) / B, v = 1/B.
    """
    B = betas @ s
    A = betas @ (means * s)
    mu = A / B
    resid = mu - targets
    dmu = s * (means - mu) / B
    if criterion == "mse":
        value = float(np.mean(resid**2))
        grad = np.mean(2.0 * resid * dmu, axis=1)
    else:
        v = 1.0 / B
        dv = -s * v**2
        value = float(np.mean(0.5 * np.log(2.0 * np.pi * v) + 0.5 * resid**2 / v))
        grad = np.mean(0.5 * dv / v + resid * dmu / v - 0.5 * resid**2 * dv / v**2,
                       axis=1)
    return value, grad


def optimize_fusion_weights(predictions, targets, *, criterion: str = "mse",
                            step: float = 0.1, n_iters: int = 500,
                            init_betas=None) -> FusionWeights:
    """Fit simplex weights by projected gradient descent on held-out data.

    Fixed step size; every iterate is projected back onto the simplex and the
    best iterate (lowest criterion) is returned, so the result is never worse
    than the uniform-weight start.
    """
    if criterion not in _CRITERIA:
        raise ArgumentError(f"criterion must be one of {_CRITERIA}, got {criterion!r}")
    if step <= 0 or n_iters < 0:
        raise ArgumentError("step must be > 0 and n_iters >= 0")
    means, variances = _stack(predictions)
    k, m = means.shape
    targets = np.asarray(targets, dtype=float).ravel()
    if targets.shape != (m,):
        raise ArgumentError(f"expected {m} targets, got shape {targets.shape}")
    if not np.all(np.isfinite(targets)):
        raise ArgumentError("targets contain non-finite values")
    s = 1.0 / variances
    betas = uniform_weights(k) if init_betas is None else project_simplex(_check_betas(init_betas, k))
    history = np.empty(n_iters + 1)
    value, grad = _criterion_and_grad(means, s, betas, targets, criterion)
    history[0] = value
    best_value, best_betas = value, betas
    for it in range(1, n_iters + 1):
        betas = project_simplex(betas - step * grad)
        value, grad = _criterion_and_grad(means, s, betas, targets, criterion)
        history[it] = value
        if value < best_value:
            best_value, best_betas = value, betas
    return FusionWeights(betas=best_betas, criterion=criterion,
                         value=best_value, history=history)
