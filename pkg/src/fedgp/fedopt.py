"""Federated training of a shared hyper-parameter vector across K clients.

Four methods over the sum-of-local-objectives problem min_theta sum_k l_k(theta),
rewritten as consensus (theta_k = z for all k):

cADMM round (z first, then theta, then dual):
    z      <- (1/|P|) sum_{k in P} (theta_k + u_k / rho_k)
    theta_k <- argmin_theta l_k(theta) + u_k.(theta - z) + (rho_k/2)||theta - z||^2
               (inner quasi-Newton solve, ||grad||_2 <= inner_tol or inner_max_iters)
    u_k    <- u_k + rho_k (theta_k - z)

pxADMM round: same z and dual updates, with the closed-form proximal step
    theta_k <- z - (grad l_k(z) + u_k) / (rho_k + L_k)
costing exactly one local gradient evaluation per client per round.

FedAvg round: participants run `local_iters` fixed-rate gradient steps from z,
then z <- sum w_k theta_k with w_k = n_obs_k / sum over participants. FedProx
is the same with the local gradient augmented by prox_mu * (theta - z);
prox_mu = 0 goes through the identical code path as FedAvg.

Non-participating clients keep (theta_k, u_k) frozen and are excluded from
that round's aggregation. All server-side sums run in fixed client-id order;
with secure aggregation enabled they are routed through fedgp.secureagg.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field, replace
from typing import Protocol

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from .errors import ArgumentError, ConfigError, FederationError, NumericalError
from .gpcore import Dataset, GPModel, nll, nll_value_and_grad
from .kernels import KernelSpec, param_count
from . import secureagg

_METHODS = ("cadmm", "pxadmm", "fedavg", "fedprox")


class LocalObjective(Protocol):
    """A client-side differentiable objective over the shared theta."""

    dim: int

    def value(self, theta) -> float: ...

    def grad(self, theta) -> np.ndarray: ...

    def value_and_grad(self, theta) -> tuple[float, np.ndarray]: ...


class GPNllObjective:
    """Local GP NLL of one client's dataset under the shared kernel spec."""

    def __init__(self, spec: KernelSpec, data: Dataset):
        if data.dim != spec.dim:
            raise ArgumentError(f"dataset dim {data.dim} does not match spec dim {spec.dim}")
        self.spec = spec
        self.data = data
        self.dim = param_count(spec) + 1

    def value_and_grad(self, theta):
        return nll_value_and_grad(GPModel(self.spec, theta), self.data)

    def value(self, theta) -> float:
        return nll(GPModel(self.spec, theta), self.data)

    def grad(self, theta):
        return self.value_and_grad(theta)[1]


class QuadraticObjective:
    """c * ||theta - a||^2: the analytic consensus oracle (z* = mean of a_k)."""

    def __init__(self, a, c: float = 1.0):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.c = float(c)
        self.dim = self.a.shape[0]

    def value(self, theta) -> float:
        diff = np.asarray(theta, dtype=float) - self.a
        return float(self.c * diff @ diff)

    def grad(self, theta):
        return 2.0 * self.c * (np.asarray(theta, dtype=float) - self.a)

    def value_and_grad(self, theta):
        diff = np.asarray(theta, dtype=float) - self.a
        return float(self.c * diff @ diff), 2.0 * self.c * diff


class SumObjective:
    """Sum of several objectives; the centralized view of the federated problem."""

    def __init__(self, objectives):
        objectives = list(objectives)
        if not objectives:
            raise ArgumentError("SumObjective needs at least one component")
        dims = {o.dim for o in objectives}
        if len(dims) != 1:
            raise ArgumentError(f"component objectives disagree on dim: {sorted(dims)}")
        self.objectives = objectives
        self.dim = objectives[0].dim

    def value(self, theta) -> float:
        return float(sum(o.value(theta) for o in self.objectives))

    def grad(self, theta):
        g = np.zeros(self.dim)
        for o in self.objectives:
            g += o.grad(theta)
        return g

    def value_and_grad(self, theta):
        total = 0.0
        g = np.zeros(self.dim)
        for o in self.objectives:
            v, gi = o.value_and_grad(theta)
            total += v
            g += gi
        return total, g


class FrozenParamsObjective:
    """Holds selected coordinates of theta at known values during optimization.

    Every evaluation overwrites the pinned coordinates before calling the
    inner objective and zeroes their gradient entries, so no gradient-driven
    update can move them. Meant for parameters that are domain knowledge
    rather than something the data can identify, e.g. calendar cycle lengths
    when each client only observes a single cycle.
    """

    def __init__(self, inner: LocalObjective, indices, values):
        self.inner = inner
        self.dim = inner.dim
        self.indices = np.atleast_1d(np.asarray(indices, dtype=int))
        self.values = np.atleast_1d(np.asarray(values, dtype=float))
        if self.indices.shape != self.values.shape:
            raise ArgumentError("frozen indices and values must have matching shapes")
        if len(np.unique(self.indices)) != len(self.indices):
            raise ArgumentError("frozen indices must be unique")
        if self.indices.size and not (0 <= self.indices.min() and self.indices.max() < self.dim):
            raise ArgumentError(f"frozen indices must lie in [0, {self.dim})")

    def _pin(self, theta) -> np.ndarray:
        th = np.array(theta, dtype=float)
        th[self.indices] = self.values
        return th

    def value(self, theta) -> float:
        return self.inner.value(self._pin(theta))

    def grad(self, theta):
        g = np.array(self.inner.grad(self._pin(theta)), dtype=float)
        g[self.indices] = 0.0
        return g

    def value_and_grad(self, theta):
        v, g = self.inner.value_and_grad(self._pin(theta))
        g = np.array(g, dtype=float)
        g[self.indices] = 0.0
        return v, g


class CountingObjective:
    """Wraps an objective and counts value/gradient evaluations separately."""

    def __init__(self, inner: LocalObjective):
        self.inner = inner
        self.dim = inner.dim
        self.value_evals = 0
        self.grad_evals = 0

    def reset(self):
        self.value_evals = 0
        self.grad_evals = 0

    def value(self, theta) -> float:
        self.value_evals += 1
        return self.inner.value(theta)

    def grad(self, theta):
        self.grad_evals += 1
        return self.inner.grad(theta)

    def value_and_grad(self, theta):
        self.value_evals += 1
        self.grad_evals += 1
        return self.inner.value_and_grad(theta)


@dataclass
class ClientState:
    """One federation participant: private objective plus consensus variables."""

    id: int
    objective: CountingObjective
    theta: np.ndarray
    dual_u: np.ndarray
    rho: float = 500.0
    lipschitz_L: float = 5000.0
    n_obs: int = 1
    data: Dataset | None = None

    def __post_init__(self):
        if not isinstance(self.objective, CountingObjective):
            self.objective = CountingObjective(self.objective)
        self.theta = np.asarray(self.theta, dtype=float).copy()
        self.dual_u = np.asarray(self.dual_u, dtype=float).copy()
        p = self.objective.dim
        if self.theta.shape != (p,) or self.dual_u.shape != (p,):
            raise ArgumentError(f"client {self.id}: theta/dual_u must have shape ({p},)")
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ArgumentError(f"client {self.id}: rho must be finite positive")
        if not (np.isfinite(self.lipschitz_L) and self.lipschitz_L > 0):
            raise ArgumentError(f"client {self.id}: lipschitz_L must be finite positive")


def make_client(client_id: int, objective: LocalObjective, *, rho: float = 500.0,
                lipschitz_L: float = 5000.0, n_obs: int = 1,
                data: Dataset | None = None) -> ClientState:
    p = objective.dim
    return ClientState(id=client_id, objective=objective, theta=np.zeros(p),
                       dual_u=np.zeros(p), rho=rho, lipschitz_L=lipschitz_L,
                       n_obs=n_obs, data=data)


def make_gp_clients(spec: KernelSpec, datasets, *, rho: float = 500.0,
                    lipschitz_L: float = 5000.0) -> list[ClientState]:
    return [make_client(i, GPNllObjective(spec, ds), rho=rho, lipschitz_L=lipschitz_L,
                        n_obs=len(ds), data=ds)
            for i, ds in enumerate(datasets)]


def make_quadratic_clients(targets, *, c: float = 1.0, rho: float = 2.0,
                           lipschitz_L: float | None = None) -> list[ClientState]:
    L = lipschitz_L if lipschitz_L is not None else 4.0 * c
    return [make_client(i, QuadraticObjective(a, c=c), rho=rho, lipschitz_L=L)
            for i, a in enumerate(targets)]


def local_nll(client: ClientState, theta) -> float:
    """The client's local objective value at theta (NLL for GP clients)."""
    return client.objective.value(np.asarray(theta, dtype=float))


def local_nll_grad(client: ClientState, theta) -> np.ndarray:
    return client.objective.grad(np.asarray(theta, dtype=float))


@dataclass
class RoundRecord:
    round: int
    objective: float
    consensus_gap: float
    wall_ms: float
    participants: tuple[int, ...]
    theta_step: float = np.nan
    z_step: float = np.nan
    secure_err: float = np.nan
    grad_evals: int = 0
    value_evals: int = 0
    warning: str = ""


@dataclass
class ConsensusState:
    """Global consensus variable plus the per-round history."""

    z: np.ndarray
    round: int = 0
    history: list[RoundRecord] = field(default_factory=list)
    converged: bool = False


@dataclass(frozen=True)
class FederationConfig:
    method: str = "cadmm"
    rho: float = 500.0
    lipschitz_L: float = 5000.0
    prox_mu: float = 0.0
    learning_rate: float = 0.01
    local_iters: int = 5
    participation_prob: float = 1.0
    tolerance: float = 1e-3
    max_rounds: int = 200
    seed: int = 0
    secure_agg: bool = False
    inner_tol: float = 1e-4
    inner_max_iters: int = 200
    init_theta: tuple | None = None

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {_METHODS}")
        if not (0.0 < self.participation_prob <= 1.0):
            raise ConfigError("participation_prob must be in (0, 1]")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be > 0")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.rho <= 0 or self.lipschitz_L <= 0:
            raise ConfigError("rho and lipschitz_L must be > 0")
        if self.prox_mu < 0:
            raise ConfigError("prox_mu must be >= 0")
        if self.learning_rate <= 0 or self.local_iters < 1:
            raise ConfigError("learning_rate must be > 0 and local_iters >= 1")
        if self.init_theta is not None:
            object.__setattr__(self, "init_theta", tuple(float(v) for v in self.init_theta))


_BAD_VALUE = 1e30


def minimize_objective(objective, theta0, *, grad_tol: float = 1e-4,
                       max_iters: int = 200, client_id: int | None = None):
    """Quasi-Newton descent to a Euclidean gradient-norm stop (or iteration cap).

    Shared by the cADMM inner solve and the centralized block-diagonal
    baseline. Unfactorizable or non-finite trial points are surfaced to the
    line search as huge values so it backs off. Returns (theta, iterations).
    """
    theta0 = np.asarray(theta0, dtype=float).copy()
    p = theta0.size

    def fun(th):
        try:
            f, g = objective.value_and_grad(th)
        except (NumericalError, ArgumentError):
            return _BAD_VALUE, np.zeros(p)
        if not (np.isfinite(f) and np.all(np.isfinite(g))):
            return _BAD_VALUE, np.zeros(p)
        return f, g

    f0, g0 = fun(theta0)
    if f0 >= _BAD_VALUE:
        raise FederationError("objective non-finite at the inner start point",
                              client_id=client_id)
    if float(np.linalg.norm(g0)) <= grad_tol:
        return theta0, 0
    # ||g||_inf <= grad_tol/sqrt(p) implies ||g||_2 <= grad_tol
    res = scipy_minimize(fun, theta0, jac=True, method="L-BFGS-B",
                         options={"maxiter": max_iters, "ftol": 1e-18,
                                  "gtol": grad_tol / math.sqrt(p)})
    theta = np.asarray(res.x, dtype=float)
    f1, _ = fun(theta)
    if not np.all(np.isfinite(theta)) or f1 >= _BAD_VALUE:
        raise FederationError("inner solver diverged to a non-finite point",
                              client_id=client_id)
    if f1 > f0:
        return theta0, int(res.nit)
    return theta, int(res.nit)


class _AugmentedLocal:
    """l_k(theta) + u.(theta - z) + (rho/2)||theta - z||^2 for the cADMM theta-step."""

    def __init__(self, client: ClientState, z):
        self.client = client
        self.z = z
        self.dim = client.objective.dim

    def value(self, theta) -> float:
        diff = theta - self.z
        return (self.client.objective.value(theta) + float(self.client.dual_u @ diff)
                + 0.5 * self.client.rho * float(diff @ diff))

    def value_and_grad(self, theta):
        diff = theta - self.z
        v, g = self.client.objective.value_and_grad(theta)
        value = v + float(self.client.dual_u @ diff) + 0.5 * self.client.rho * float(diff @ diff)
        grad = g + self.client.dual_u + self.client.rho * diff
        return value, grad

    def grad(self, theta):
        return self.value_and_grad(theta)[1]


def _participants(clients, participating):
    if participating is None:
        return list(clients)
    wanted = set(participating)
    parts = [c for c in clients if c.id in wanted]
    missing = wanted - {c.id for c in parts}
    if missing:
        raise ArgumentError(f"unknown participant ids: {sorted(missing)}")
    return parts


def _secure_average(vectors, ids, state_round, config, weights=None):
    """Masked fixed-point sum of per-client vectors; returns (sum, max abs err).

    weights, when given, scale each client's vector before the sum (FedAvg).
    """
    scaled = [v if weights is None else v * w for v, w in
              zip(vectors, weights if weights is not None else [None] * len(vectors))]
    round_seed = int.from_bytes(
        hashlib.sha256(f"fedgp-round|{config.seed}|{state_round}".encode()).digest()[:8],
        "little")
    shares = []
    for v, cid in zip(scaled, ids):
        masks = secureagg.derive_pairwise_masks(round_seed, cid,
                                                [j for j in ids if j != cid], v.shape[0])
        shares.append(secureagg.masked_upload(v, masks, client_id=cid,
                                              round_index=state_round))
    total = secureagg.aggregate(shares)
    plain = np.sum(scaled, axis=0)
    return total, float(np.max(np.abs(total - plain), initial=0.0))


def _z_average_admm(parts, state, config, secure: bool):
    vectors = [c.theta + c.dual_u / c.rho for c in parts]
    if secure:
        total, err = _secure_average(vectors, [c.id for c in parts], state.round, config)
        return total / len(parts), err
    return np.sum(vectors, axis=0) / len(parts), np.nan


def _full_objective(clients, z, reuse=None):
    """sum_k l_k(z); reuse maps client id -> already-computed value at z."""
    total = 0.0
    for c in clients:
        if reuse is not None and c.id in reuse:
            total += reuse[c.id]
        else:
            total += c.objective.value(z)
    return float(total)


def _consensus_gap(clients, z) -> float:
    return float(max(np.max(np.abs(c.theta - z), initial=0.0) for c in clients))


def _finish_round(clients, state, config, parts, z_new, t0, secure_err,
                  reuse=None, warning=""):
    prev_z = state.z
    theta_step = float(max(np.max(np.abs(c._theta_prev - c.theta), initial=0.0)
                           for c in clients))
    z_step = float(np.max(np.abs(z_new - prev_z), initial=0.0))
    state.z = z_new
    state.round += 1
    record = RoundRecord(
        round=state.round,
        objective=_full_objective(clients, z_new, reuse=reuse),
        consensus_gap=_consensus_gap(clients, z_new),
        wall_ms=(time.perf_counter() - t0) * 1e3,
        participants=tuple(c.id for c in parts),
        theta_step=theta_step,
        z_step=z_step,
        secure_err=secure_err,
        grad_evals=sum(c.objective.grad_evals for c in clients),
        value_evals=sum(c.objective.value_evals for c in clients),
        warning=warning,
    )
    state.history.append(record)
    return record


def _snapshot_thetas(clients):
    for c in clients:
        c._theta_prev = c.theta.copy()


def cadmm_round(clients, state: ConsensusState, config: FederationConfig,
                participating=None):
    """One consensus-ADMM round: z-average, inexact local argmin, dual ascent."""
    t0 = time.perf_counter()
    parts = _participants(clients, participating)
    if not parts:
        raise ArgumentError("cADMM round needs at least one participant")
    _snapshot_thetas(clients)
    z_new, secure_err = _z_average_admm(parts, state, config, config.secure_agg)
    for c in parts:
        try:
            theta, _ = minimize_objective(
                _AugmentedLocal(c, z_new), c.theta, grad_tol=config.inner_tol,
                max_iters=config.inner_max_iters, client_id=c.id)
        except FederationError as e:
            e.round_index = state.round
            raise
        c.theta = theta
        c.dual_u = c.dual_u + c.rho * (c.theta - z_new)
    _finish_round(clients, state, config, parts, z_new, t0, secure_err)
    return clients, state


def pxadmm_round(clients, state: ConsensusState, config: FederationConfig,
                 participating=None):
    """One proximal-ADMM round: exactly one gradient evaluation per participant."""
    t0 = time.perf_counter()
    parts = _participants(clients, participating)
    if not parts:
        raise ArgumentError("pxADMM round needs at least one participant")
    _snapshot_thetas(clients)
    z_new, secure_err = _z_average_admm(parts, state, config, config.secure_agg)
    reuse = {}
    for c in parts:
        v, g = c.objective.value_and_grad(z_new)
        if not (np.isfinite(v) and np.all(np.isfinite(g))):
            raise FederationError("pxADMM gradient non-finite at z",
                                  client_id=c.id, round_index=state.round)
        reuse[c.id] = v
        c.theta = z_new - (g + c.dual_u) / (c.rho + c.lipschitz_L)
        c.dual_u = c.dual_u + c.rho * (c.theta - z_new)
    _finish_round(clients, state, config, parts, z_new, t0, secure_err, reuse=reuse)
    return clients, state


def fedprox_local_step(client: ClientState, z, prox_mu: float,
                       learning_rate: float, local_iters: int) -> np.ndarray:
    """`local_iters` fixed-rate gradient steps on l_k(theta) + (mu/2)||theta - z||^2.

    prox_mu = 0 is exactly the FedAvg local update.
    """
    if prox_mu < 0:
        raise ArgumentError("prox_mu must be >= 0")
    z = np.asarray(z, dtype=float)
    theta = z.copy()
    for _ in range(local_iters):
        g = client.objective.grad(theta)
        if not np.all(np.isfinite(g)):
            raise FederationError("local gradient non-finite", client_id=client.id)
        if prox_mu != 0.0:
            g = g + prox_mu * (theta - z)
        theta = theta - learning_rate * g
    return theta


def fedavg_round(clients, state: ConsensusState, config: FederationConfig,
                 participating=None):
    """One FedAvg/FedProx round (prox_mu taken from config; 0 means FedAvg)."""
    t0 = time.perf_counter()
    parts = _participants(clients, participating)
    _snapshot_thetas(clients)
    if not parts:
        _finish_round(clients, state, config, parts, state.z.copy(), t0, np.nan,
                      warning="empty participant set; round skipped")
        return clients, state
    z_prev = state.z
    for c in parts:
        try:
            c.theta = fedprox_local_step(c, z_prev, config.prox_mu,
                                         config.learning_rate, config.local_iters)
        except FederationError as e:
            e.round_index = state.round
            raise
    sizes = np.array([c.n_obs for c in parts], dtype=float)
    weights = sizes / sizes.sum()
    if config.secure_agg:
        z_new, secure_err = _secure_average([c.theta for c in parts],
                                            [c.id for c in parts], state.round,
                                            config, weights=weights)
    else:
        z_new = np.sum([w * c.theta for w, c in zip(weights, parts)], axis=0)
        secure_err = np.nan
    _finish_round(clients, state, config, parts, z_new, t0, secure_err)
    return clients, state


_ROUND_FNS = {"cadmm": cadmm_round, "pxadmm": pxadmm_round,
              "fedavg": fedavg_round, "fedprox": fedavg_round}


def estimate_lipschitz(client_or_objective, z, n_probes: int = 8,
                       radius: float = 1.0, seed: int = 0) -> float:
    """2x the max pairwise gradient-difference ratio over probes near z.

    Probes are z plus `n_probes` uniformly-directed points on the radius
    sphere (z itself included as a probe). Deterministic per seed; floored at
    1e-8. For a quadratic c||theta - a||^2 this returns exactly 4c.
    """
    obj = getattr(client_or_objective, "objective", client_or_objective)
    if n_probes < 2:
        raise ArgumentError("n_probes must be >= 2")
    if radius <= 0:
        raise ArgumentError("radius must be > 0")
    z = np.asarray(z, dtype=float)
    rng = np.random.default_rng(seed)
    points = [z]
    for _ in range(n_probes):
        direction = rng.standard_normal(z.shape[0])
        direction /= max(np.linalg.norm(direction), 1e-300)
        points.append(z + radius * direction)
    grads = []
    for p in points:
        g = obj.grad(p)
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient at a Lipschitz probe point")
        grads.append(g)
    best = 0.0
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            dx = float(np.linalg.norm(points[i] - points[j]))
            if dx == 0.0:
                continue
            best = max(best, float(np.linalg.norm(grads[i] - grads[j])) / dx)
    return max(2.0 * best, 1e-8)


def run_federation(config: FederationConfig, clients) -> tuple[np.ndarray, ConsensusState]:
    """Run rounds of the configured method until the stopping rule or max_rounds.

    ADMM methods stop when max_k ||theta_k step||_inf <= tolerance AND
    ||z step||_inf <= tolerance; FedAvg/FedProx stop on |objective change| <=
    tolerance. Initialization: dual u_k = 0 and theta_k = z_0 with z_0 the
    configured init vector or a seeded standard-normal draw. Participation is
    a seeded Bernoulli(participation_prob) per client per round, redrawn until
    at least one client participates. Returns (z, state); round failures raise
    FederationError with the partial state attached.
    """
    clients = list(clients)
    if not clients:
        raise ArgumentError("run_federation needs at least one client")
    dims = {c.objective.dim for c in clients}
    if len(dims) != 1:
        raise ArgumentError(f"clients disagree on parameter dim: {sorted(dims)}")
    ids = [c.id for c in clients]
    if len(set(ids)) != len(ids):
        raise ArgumentError("client ids must be distinct")
    clients.sort(key=lambda c: c.id)
    p = dims.pop()
    rng = np.random.default_rng(config.seed)
    if config.init_theta is not None:
        z0 = np.asarray(config.init_theta, dtype=float)
        if z0.shape != (p,):
            raise ConfigError(f"init_theta must have length {p}, got {z0.shape}")
    else:
        z0 = rng.standard_normal(p)
    for c in clients:
        c.theta = z0.copy()
        c.dual_u = np.zeros(p)
        c.objective.reset()
    state = ConsensusState(z=z0.copy())
    round_fn = _ROUND_FNS[config.method]
    admm = config.method in ("cadmm", "pxadmm")
    cfg = config if config.method != "fedavg" else replace(config, prox_mu=0.0)
    for _ in range(config.max_rounds):
        if config.participation_prob >= 1.0:
            participating = None
        else:
            while True:
                mask = rng.random(len(clients)) < config.participation_prob
                if mask.any():
                    break
            participating = [c.id for c, m in zip(clients, mask) if m]
        try:
            round_fn(clients, state, cfg, participating)
        except FederationError as e:
            e.state = state
            raise
        rec = state.history[-1]
        if admm:
            if rec.theta_step <= config.tolerance and rec.z_step <= config.tolerance:
                state.converged = True
                break
        elif state.round >= 2:
            if abs(rec.objective - state.history[-2].objective) <= config.tolerance:
                state.converged = True
                break
    return state.z, state


def split_dataset(data: Dataset, k: int, scheme: str = "equal", *, seed: int = 0,
                  alpha: float = 0.5, group_ids=None) -> list[Dataset]:
    """Partition a Dataset into K disjoint client datasets.

    scheme 'equal': seeded shuffle, then sizes differing by at most one.
    scheme 'by_trajectory': rows grouped by group_ids; whole groups assigned
    round-robin in sorted group order.
    scheme 'dirichlet': proportions drawn from Dirichlet(alpha * 1_K) over a
    seeded shuffle, each client guaranteed at least one row.
    """
    n = len(data)
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ArgumentError(f"K must be a positive integer, got {k!r}")
    if n < k:
        raise ArgumentError(f"cannot split {n} rows across {k} clients")
    scheme = str(scheme).lower()
    rng = np.random.default_rng(seed)
    if scheme == "equal":
        order = rng.permutation(n)
        base, extra = divmod(n, k)
        sizes = [base + (1 if i < extra else 0) for i in range(k)]
        chunks = []
        start = 0
        for size in sizes:
            chunks.append(order[start:start + size])
            start += size
    elif scheme == "by_trajectory":
        if group_ids is None:
            raise ArgumentError("scheme 'by_trajectory' needs group_ids (one per row)")
        group_ids = np.asarray(group_ids)
        if group_ids.shape != (n,):
            raise ArgumentError(f"group_ids must have shape ({n},)")
        groups = sorted(set(group_ids.tolist()))
        if len(groups) < k:
            raise ArgumentError(f"only {len(groups)} groups for {k} clients")
        chunks = [[] for _ in range(k)]
        for gi, group in enumerate(groups):
            chunks[gi % k].extend(np.nonzero(group_ids == group)[0].tolist())
        chunks = [np.asarray(c, dtype=int) for c in chunks]
    elif scheme == "dirichlet":
        if alpha <= 0:
            raise ArgumentError("dirichlet alpha must be > 0")
        order = rng.permutation(n)
        props = rng.dirichlet(np.full(k, alpha))
        sizes = np.maximum(np.floor(props * n).astype(int), 1)
        while sizes.sum() > n:
            sizes[int(np.argmax(sizes))] -= 1
        while sizes.sum() < n:
            sizes[int(np.argmax(props))] += 1
        chunks = []
        start = 0
        for size in sizes:
            chunks.append(order[start:start + size])
            start += size
    else:
        raise ArgumentError(f"unknown split scheme {scheme!r}")
    return [Dataset(data.inputs[idx], data.outputs[idx]) for idx in chunks]
