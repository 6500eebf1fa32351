"""Exact zero-mean GP regression over any KernelSpec.

Objective (a shifted negative log-marginal likelihood; the n*log(2*pi)
constant is omitted throughout and documented here once):

    l(theta) = y^T C^-1 y + log det C,     C = K(X, X) + sigma_e^2 I.

Gradient, chain-ruled to the log-domain parameters:

    dl/dtheta_i = tr(C^-1 dC/dtheta_i) - y^T C^-1 (dC/dtheta_i) C^-1 y.

theta is the flat kernel parameter vector with log(sigma_e^2) appended last.
The posterior covariance INCLUDES observation noise on the test block, i.e. it
predicts noisy outputs y*, not latent f*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .errors import ArgumentError, NumericalError, OptimizationError
from .kernels import (JITTER_REL, KernelSpec, kernel_matrix, kernel_matrix_grad,
                      kernel_pairs, param_count)
from .kernels import from_dict as spec_from_dict

# Escalating jitter ladder, as fractions of the mean diagonal of C; the first
# rung is always applied (JITTER_REL from the kernels module).
_JITTER_LADDER = (JITTER_REL, 1e-9, 1e-8, 1e-7, 1e-6)


@dataclass(frozen=True)
class Dataset:
    """Immutable supervised dataset: inputs (n, d), outputs (n,)."""

    inputs: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float).ravel()
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ArgumentError(f"inputs must be 2-D, got shape {X.shape}")
        if X.shape[0] < 1:
            raise ArgumentError("a Dataset needs at least one row")
        if X.shape[0] != y.shape[0]:
            raise ArgumentError(f"inputs have {X.shape[0]} rows but outputs have {y.shape[0]}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ArgumentError("Dataset contains non-finite values")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def dim(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class GPModel:
    """Kernel spec plus flat log-domain theta (kernel params, then log noise)."""

    spec: KernelSpec
    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel().copy()
        expected = param_count(self.spec) + 1
        if theta.shape != (expected,):
            raise ArgumentError(f"theta must have length {expected} "
                                f"(kernel params + log noise), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ArgumentError("theta contains non-finite values")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def kernel_params(self) -> np.ndarray:
        return self.theta[:-1]

    @property
    def noise_var(self) -> float:
        return float(np.exp(self.theta[-1]))

    def with_theta(self, theta) -> "GPModel":
        return GPModel(self.spec, theta)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "theta": [float(v) for v in self.theta]}


def model_from_dict(d: dict) -> GPModel:
    if not isinstance(d, dict) or "spec" not in d or "theta" not in d:
        raise ArgumentError("model dict needs 'spec' and 'theta' keys")
    return GPModel(spec_from_dict(d["spec"]), np.asarray(d["theta"], dtype=float))


@dataclass(frozen=True)
class GaussianPrediction:
    """Posterior over m query points: mean (m,), covariance (m, m)."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).ravel()
        cov = np.asarray(self.covariance, dtype=float)
        m = mean.shape[0]
        if cov.shape != (m, m):
            raise ArgumentError(f"covariance must be ({m}, {m}), got {cov.shape}")
        asym = np.max(np.abs(cov - cov.T), initial=0.0)
        if asym > 1e-10 * max(1.0, np.max(np.abs(cov), initial=0.0)):
            raise ArgumentError("prediction covariance is not symmetric within 1e-10")
        diag = np.diag(cov)
        floor = -1e-8 * max(1.0, float(np.max(diag, initial=0.0)))
        if np.min(diag, initial=0.0) < floor:
            raise ArgumentError("prediction covariance has a significantly negative diagonal")
        if np.min(diag, initial=0.0) < 0.0:
            cov = cov.copy()
            idx = np.arange(m)
            cov[idx, idx] = np.maximum(diag, 0.0)
        mean.setflags(write=False)
        cov = np.ascontiguousarray(cov)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.covariance)


def chol_with_jitter(C):
    """Lower Cholesky factor of C + jitter*I, escalating jitter 1e-10 to 1e-6
    of the mean diagonal; NumericalError (with the attempted jitter) beyond."""
    n = C.shape[0]
    scale = float(np.trace(C)) / n
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1.0
    eye = np.eye(n)
    for rel in _JITTER_LADDER:
        jitter = rel * scale
        try:
            return np.linalg.cholesky(C + jitter * eye), jitter
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(
        f"Cholesky factorization failed up to jitter {_JITTER_LADDER[-1] * scale:.3e}",
        attempted_jitter=_JITTER_LADDER[-1] * scale)


def _factorize(model: GPModel, data: Dataset):
    K = kernel_matrix(model.spec, model.kernel_params, data.inputs)
    C = K + model.noise_var * np.eye(len(data))
    L, _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), data.outputs)
    return L, alpha


def nll(model: GPModel, data: Dataset) -> float:
    """y^T C^-1 y + log det C (no n*log(2*pi) term)."""
    L, alpha = _factorize(model, data)
    return float(data.outputs @ alpha + 2.0 * np.sum(np.log(np.diag(L))))


def nll_value_and_grad(model: GPModel, data: Dataset):
    """(nll, gradient w.r.t. log-domain theta) sharing one factorization."""
    n = len(data)
    K, grads = kernel_matrix_grad(model.spec, model.kernel_params, data.inputs)
    noise = model.noise_var
    C = K + noise * np.eye(n)
    L, _ = chol_with_jitter(C)
    alpha = cho_solve((L, True), data.outputs)
    value = float(data.outputs @ alpha + 2.0 * np.sum(np.log(np.diag(L))))
    Cinv = cho_solve((L, True), np.eye(n))
    grad = np.empty(len(grads) + 1)
    for i, dC in enumerate(grads):
        grad[i] = np.sum(Cinv * dC) - alpha @ dC @ alpha
    # dC/dlog(sigma_e^2) = sigma_e^2 * I
    grad[-1] = noise * (np.trace(Cinv) - alpha @ alpha)
    return value, grad


def nll_grad(model: GPModel, data: Dataset) -> np.ndarray:
    return nll_value_and_grad(model, data)[1]


def posterior(model: GPModel, train: Dataset, X_star) -> GaussianPrediction:
    """Full posterior (noisy-output covariance) at query rows X_star."""
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star.reshape(-1, train.dim) if train.dim > 1 else X_star.reshape(-1, 1)
    m = X_star.shape[0]
    if m < 1:
        raise ArgumentError("X_star must contain at least one query row")
    L, alpha = _factorize(model, train)
    Kxs = kernel_matrix(model.spec, model.kernel_params, X_star, train.inputs)
    Kss = kernel_matrix(model.spec, model.kernel_params, X_star)
    mean = Kxs @ alpha
    V = cho_solve((L, True), Kxs.T)
    cov = Kss + model.noise_var * np.eye(m) - Kxs @ V
    cov = 0.5 * (cov + cov.T)
    return GaussianPrediction(mean, cov)


def posterior_diag(model: GPModel, train: Dataset, X_star):
    """(mean, per-point variance) without forming the m x m covariance."""
    X_star = np.asarray(X_star, dtype=float)
    if X_star.ndim == 1:
        X_star = X_star.reshape(-1, train.dim) if train.dim > 1 else X_star.reshape(-1, 1)
    L, alpha = _factorize(model, train)
    Kxs = kernel_matrix(model.spec, model.kernel_params, X_star, train.inputs)
    kss = kernel_pairs(model.spec, model.kernel_params, X_star, X_star)
    V = cho_solve((L, True), Kxs.T)
    var = kss + model.noise_var - np.sum(Kxs * V.T, axis=1)
    return Kxs @ alpha, np.maximum(var, 0.0)


@dataclass(frozen=True)
class FitConfig:
    """Gradient-descent settings for fit_centralized.

    mode 'backtracking' uses Armijo halving with the trial step doubling from
    the last accepted step; mode 'fixed' takes raw learning_rate steps (the
    form federated local updates use). grad_tol, when set, adds a stationarity
    stop on the max-abs gradient.
    """

    max_iters: int = 500
    tol: float = 1e-6
    mode: str = "backtracking"
    learning_rate: float = 0.01
    armijo_c: float = 1e-4
    grad_tol: float | None = None
    step_init: float = 1.0
    step_max: float = 1e6
    step_min: float = 1e-20

    def __post_init__(self):
        if self.mode not in ("backtracking", "fixed"):
            raise ArgumentError(f"unknown fit mode {self.mode!r}")
        if self.max_iters < 1 or self.tol < 0 or self.learning_rate <= 0:
            raise ArgumentError("invalid fit config (max_iters >= 1, tol >= 0, learning_rate > 0)")


@dataclass
class FitResult:
    model: GPModel
    converged: bool
    iterations: int
    nll: float
    nll_history: list = field(default_factory=list)
    theta_history: list = field(default_factory=list)
    grad_evals: int = 0
    value_evals: int = 0


def fit_centralized(model: GPModel, data: Dataset, config: FitConfig | None = None) -> FitResult:
    """Minimize the shifted NLL by gradient descent from model.theta.

    Stops when |l(theta_t) - l(theta_{t+1})| <= tol, when grad_tol (if set) is
    met, or at max_iters. The returned model is the best iterate seen, so its
    nll never exceeds the value at initialization.
    """
    cfg = config or FitConfig()
    theta = np.array(model.theta, dtype=float)
    evals = {"value": 0, "grad": 0}

    def value_and_grad(th):
        evals["value"] += 1
        evals["grad"] += 1
        return nll_value_and_grad(model.with_theta(th), data)

    def value(th):
        evals["value"] += 1
        try:
            return nll(model.with_theta(th), data)
        except (NumericalError, ArgumentError):
            # unfactorizable C or a non-finite iterate: treated as a rejected step
            return np.inf

    f, g = value_and_grad(theta)
    best_f, best_theta = f, theta.copy()
    history = [f]
    thetas = [theta.copy()]
    converged = False
    step = cfg.step_init
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        if cfg.grad_tol is not None and np.max(np.abs(g)) <= cfg.grad_tol:
            converged = True
            iterations -= 1
            break
        if cfg.mode == "fixed":
            theta_new = theta - cfg.learning_rate * g
            f_new = value(theta_new)
            if not np.isfinite(f_new):
                raise OptimizationError("fixed-step iterate produced a non-finite objective")
        else:
            gnorm2 = float(g @ g)
            step = min(2.0 * step, cfg.step_max)
            while True:
                theta_new = theta - step * g
                f_new = value(theta_new)
                if np.isfinite(f_new) and f_new <= f - cfg.armijo_c * step * gnorm2:
                    break
                step *= 0.5
                if step < cfg.step_min:
                    raise OptimizationError(
                        "line search failed: no acceptable step above the minimum step size")
        delta = abs(f - f_new)
        theta = theta_new
        f = f_new
        history.append(f)
        thetas.append(theta.copy())
        if f < best_f:
            best_f, best_theta = f, theta.copy()
        if delta <= cfg.tol:
            converged = True
            break
        if iterations < cfg.max_iters:
            _, g = value_and_grad(theta)
    return FitResult(model=model.with_theta(best_theta), converged=converged,
                     iterations=iterations, nll=best_f, nll_history=history,
                     theta_history=thetas, grad_evals=evals["grad"],
                     value_evals=evals["value"])
