"""Expected kernel under Gaussian input uncertainty, by Monte Carlo.

k~(xd, xd2) = E[k(x, x')] with x ~ N(mean1, cov1), x' ~ N(mean2, cov2),
estimated with paired sampling: one standard-normal block per endpoint role,
and each draw contributes the average of the two orientations

    (k(m1 + B1 e0, m2 + B2 e1) + k(m1 + B1 e1, m2 + B2 e0)) / 2,

which makes swapping the two inputs bit-identical under a shared seed. Zero
covariances short-circuit to the exact plain kernel value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError
from .evaluate import eval_composite, kernel_pairs
from .spec import KernelSpec

_SYM_TOL = 1e-12
_EIG_TOL = -1e-12


@dataclass(frozen=True)
class GaussianInput:
    """A Gaussian-distributed kernel input: mean d-vector, PSD d x d covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1:
            raise ArgumentError(f"mean must be a vector, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ArgumentError(f"covariance must be ({d}, {d}), got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ArgumentError("GaussianInput contains non-finite values")
        if np.max(np.abs(cov - cov.T), initial=0.0) > _SYM_TOL:
            raise ArgumentError("covariance is not symmetric within 1e-12")
        if np.min(np.linalg.eigvalsh(cov)) < _EIG_TOL:
            raise ArgumentError("covariance has an eigenvalue below -1e-12 (not PSD)")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def is_point(self) -> bool:
        return not np.any(self.covariance)


def _psd_sqrt(cov):
    """B with B @ B.T = cov, via eigendecomposition with negative clip."""
    evals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(evals, 0.0, None))


def expected_kernel_mc_stats(spec: KernelSpec, params, xd: GaussianInput,
                             xd2: GaussianInput, n_mc: int, seed: int):
    """(estimate, standard error) of the expected kernel."""
    if not isinstance(xd, GaussianInput):
        xd = GaussianInput(*xd)
    if not isinstance(xd2, GaussianInput):
        xd2 = GaussianInput(*xd2)
    d = spec.dim
    if xd.dim != d or xd2.dim != d:
        raise ArgumentError(f"GaussianInput dims {xd.dim}, {xd2.dim} do not match spec dim {d}")
    if not isinstance(n_mc, (int, np.integer)) or n_mc < 1:
        raise ArgumentError(f"n_mc must be an integer >= 1, got {n_mc!r}")
    if xd.is_point and xd2.is_point:
        return eval_composite(spec, xd.mean, xd2.mean, params), 0.0
    rng = np.random.default_rng(seed)
    e0 = rng.standard_normal((n_mc, d))
    e1 = rng.standard_normal((n_mc, d))
    b1 = _psd_sqrt(xd.covariance)
    b2 = _psd_sqrt(xd2.covariance)
    a0 = xd.mean + e0 @ b1.T
    a1 = xd.mean + e1 @ b1.T
    c0 = xd2.mean + e0 @ b2.T
    c1 = xd2.mean + e1 @ b2.T
    vals = 0.5 * (kernel_pairs(spec, params, a0, c1) + kernel_pairs(spec, params, a1, c0))
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else 0.0
    return est, se


def expected_kernel_mc(spec: KernelSpec, params, xd: GaussianInput,
                       xd2: GaussianInput, n_mc: int, seed: int) -> float:
    """Monte-Carlo estimate of E[k(x, x')] over both Gaussian inputs."""
    return expected_kernel_mc_stats(spec, params, xd, xd2, n_mc, seed)[0]
