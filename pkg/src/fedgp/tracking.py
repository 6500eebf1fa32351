"""GP state-space transition learning for 2-D target tracking.

States x_t = (x, y) in meters evolve as x_{t+1} = f(x_t) + e_t. Each planar
dimension gets its own GP (d=2 ARD input, scalar output); transition rows are
(state_t -> state_{t+1}) pairs built per trajectory and never crossing
trajectory boundaries.

The GPs are zero-mean, so they model the step f(x) - x rather than the
absolute next coordinate: training subtracts the current coordinate from each
output and prediction adds it back. Transition datasets keep absolute
next-state outputs at every public boundary; the residual shift is applied
internally and transparently. RMSE is Euclidean over 2-D one-step errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .errors import ArgumentError
from .fedopt import FederationConfig, make_gp_clients, run_federation
from .gpcore import Dataset, GaussianPrediction, GPModel, posterior_diag
from .kernels import KernelSpec, ard_se, param_count


@dataclass(frozen=True)
class Trajectory:
    """Ordered 2-D track: times (n,) seconds, states (n, 2) meters."""

    id: int
    times: np.ndarray
    states: np.ndarray
    owner: int = 0

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        s = np.asarray(self.states, dtype=float)
        if s.ndim != 2 or s.shape[1] != 2:
            raise ArgumentError(f"states must be (n, 2), got {s.shape}")
        if t.shape[0] != s.shape[0]:
            raise ArgumentError(f"{t.shape[0]} times vs {s.shape[0]} states")
        if t.shape[0] < 2:
            raise ArgumentError("a trajectory needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(s))):
            raise ArgumentError("trajectory contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ArgumentError("trajectory times must be strictly increasing")
        t = t.copy()
        s = s.copy()
        t.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclass
class TransitionModelPair:
    """Per-dimension transition GPs plus (optionally) their training references.

    train_x / train_y are the pooled transition datasets the posteriors
    condition on; history carries the per-dimension training records.
    """

    model_x: GPModel
    model_y: GPModel
    train_x: Dataset | None = None
    train_y: Dataset | None = None
    history: dict | None = None

    def __post_init__(self):
        if self.model_x.spec.dim != 2 or self.model_y.spec.dim != 2:
            raise ArgumentError("transition models must take 2-D state inputs")


def generate_synthetic_trajectories(n_traj: int, steps: int, *, dt: float = 0.5,
                                    speed: float = 1.2, turn_noise: float = 0.3,
                                    process_noise: float = 0.02, seed: int = 0,
                                    rect: tuple[float, float] = (30.0, 15.0),
                                    initial_heading: float | None = None,
                                    id_offset: int = 0) -> list[Trajectory]:
    """Constant-speed heading-random-walk tracks with wall reflection.

    rect = (width, height) meters; turn_noise is the per-step heading
    standard deviation (radians); process_noise the per-step positional noise
    standard deviation per axis (meters). initial_heading fixes every track's
    starting direction (useful for noise-floor fixtures); by default headings
    start uniform.
    """
    if n_traj < 1:
        raise ArgumentError("n_traj must be >= 1")
    if steps < 2:
        raise ArgumentError("steps must be >= 2")
    width, height = float(rect[0]), float(rect[1])
    if not (width > 0 and height > 0 and np.isfinite(width) and np.isfinite(height)):
        raise ArgumentError(f"invalid rectangle {rect!r}; need positive finite (width, height)")
    if dt <= 0 or speed < 0 or turn_noise < 0 or process_noise < 0:
        raise ArgumentError("dt must be > 0; speed/turn_noise/process_noise must be >= 0")
    rng = np.random.default_rng(seed)
    out = []
    for tid in range(n_traj):
        pos = np.array([rng.uniform(0.1 * width, 0.9 * width),
                        rng.uniform(0.1 * height, 0.9 * height)])
        heading = rng.uniform(-math.pi, math.pi) if initial_heading is None else float(initial_heading)
        states = np.empty((steps, 2))
        states[0] = pos
        for t in range(1, steps):
            heading += turn_noise * rng.standard_normal()
            step = np.array([math.cos(heading), math.sin(heading)]) * speed * dt
            pos = pos + step + process_noise * rng.standard_normal(2)
            for _ in range(8):
                moved = False
                if pos[0] < 0.0:
                    pos[0] = -pos[0]
                    heading = math.pi - heading
                    moved = True
                elif pos[0] > width:
                    pos[0] = 2.0 * width - pos[0]
                    heading = math.pi - heading
                    moved = True
                if pos[1] < 0.0:
                    pos[1] = -pos[1]
                    heading = -heading
                    moved = True
                elif pos[1] > height:
                    pos[1] = 2.0 * height - pos[1]
                    heading = -heading
                    moved = True
                if not moved:
                    break
            states[t] = pos
        out.append(Trajectory(id=id_offset + tid, times=dt * np.arange(steps),
                              states=states))
    return out


def build_transition_dataset(trajectories) -> tuple[Dataset, Dataset]:
    """(x-dim dataset, y-dim dataset) of one-step transitions.

    Inputs are states[:-1] stacked across trajectories (shared by both
    datasets); outputs are next-step x and y coordinates respectively.
    """
    trajectories = list(trajectories)
    if not trajectories:
        raise ArgumentError("build_transition_dataset needs at least one trajectory")
    inputs = np.vstack([tr.states[:-1] for tr in trajectories])
    next_states = np.vstack([tr.states[1:] for tr in trajectories])
    return (Dataset(inputs, next_states[:, 0]), Dataset(inputs, next_states[:, 1]))


def step_dataset(ds: Dataset, dim_idx: int) -> Dataset:
    """Shift a transition dataset's outputs to steps: next - current coordinate.

    This is the representation the transition GPs actually train on; dim_idx
    names which planar coordinate (0 = x, 1 = y) the outputs belong to.
    """
    return Dataset(ds.inputs, ds.outputs - ds.inputs[:, dim_idx])


def informed_init(ds: Dataset, spec: KernelSpec) -> np.ndarray:
    """Data-scaled starting theta: log output variance for signal slots, log
    mean squared per-dimension spread for ARD length divisors, 10% noise."""
    y_var = max(float(np.var(ds.outputs)), 1e-6)
    theta = []
    from .kernels import leaves

    for leaf in leaves(spec):
        if leaf.family == "ARD_SE":
            theta.append(math.log(y_var))
            for j in range(leaf.input_dim):
                spread = float(np.var(ds.inputs[:, j]))
                theta.append(math.log(max(2.0 * spread, 1e-6)))
        elif leaf.family == "PERIODIC":
            theta.extend([math.log(y_var), 0.0, 0.0])
        elif leaf.family == "NEURAL_NET":
            theta.extend([0.0] * (leaf.input_dim + 1))
    theta.append(math.log(0.1 * y_var))
    expected = param_count(spec) + 1
    if len(theta) != expected:
        raise ArgumentError(f"informed init built {len(theta)} values for {expected} slots")
    return np.asarray(theta)


def train_transition_federated(client_trajectories, config: FederationConfig,
                               *, spec: KernelSpec | None = None,
                               init_theta=None) -> TransitionModelPair:
    """Train both per-dimension transition GPs federatedly.

    client_trajectories: one list of Trajectory per client. Runs fed-optim
    once per output dimension over the clients' local transition datasets.
    When no init is given, a data-scaled one is computed from the pooled
    transitions (a simulation convenience).
    """
    client_trajectories = [list(trs) for trs in client_trajectories]
    if not client_trajectories or any(not trs for trs in client_trajectories):
        raise ArgumentError("every client needs at least one trajectory")
    spec = spec if spec is not None else ard_se(2)
    per_client = [build_transition_dataset(trs) for trs in client_trajectories]
    pooled = build_transition_dataset([tr for trs in client_trajectories for tr in trs])
    models = []
    histories = {}
    for dim_idx, dim_name in ((0, "x"), (1, "y")):
        datasets = [step_dataset(pair[dim_idx], dim_idx) for pair in per_client]
        if init_theta is not None:
            init = np.asarray(init_theta, dtype=float)
        elif config.init_theta is not None:
            init = np.asarray(config.init_theta, dtype=float)
        else:
            init = informed_init(step_dataset(pooled[dim_idx], dim_idx), spec)
        cfg = dc_replace(config, init_theta=tuple(float(v) for v in init))
        clients = make_gp_clients(spec, datasets, rho=config.rho,
                                  lipschitz_L=config.lipschitz_L)
        z, state = run_federation(cfg, clients)
        models.append(GPModel(spec, z))
        histories[dim_name] = {
            "state": state,
            "grad_evals": sum(c.objective.grad_evals for c in clients),
            "value_evals": sum(c.objective.value_evals for c in clients),
            "rounds": state.round,
            "converged": state.converged,
            "final_objective": state.history[-1].objective if state.history else float("nan"),
        }
    return TransitionModelPair(model_x=models[0], model_y=models[1],
                               train_x=pooled[0], train_y=pooled[1],
                               history=histories)


def _train_refs(models: TransitionModelPair, train) -> tuple[Dataset, Dataset]:
    if train is not None:
        return train
    if models.train_x is None or models.train_y is None:
        raise ArgumentError("no training references: pass train=(ds_x, ds_y) "
                            "or use a pair built by train_transition_federated")
    return models.train_x, models.train_y


def predict_next_state(models: TransitionModelPair, x_t, train=None) -> GaussianPrediction:
    """Independent per-dimension posteriors at one state; diagonal 2x2 covariance."""
    ds_x, ds_y = _train_refs(models, train)
    x_t = np.asarray(x_t, dtype=float).ravel()
    if x_t.shape != (2,):
        raise ArgumentError(f"x_t must be a 2-vector, got shape {x_t.shape}")
    q = x_t.reshape(1, 2)
    mx, vx = posterior_diag(models.model_x, step_dataset(ds_x, 0), q)
    my, vy = posterior_diag(models.model_y, step_dataset(ds_y, 1), q)
    mean = np.array([mx[0] + x_t[0], my[0] + x_t[1]])
    cov = np.diag([vx[0], vy[0]])
    return GaussianPrediction(mean, cov)


def evaluate_rmse(models: TransitionModelPair, test_trajectories, train=None) -> float:
    """sqrt(mean ||predicted next state - true next state||_2^2) in meters."""
    test_trajectories = list(test_trajectories)
    if not test_trajectories:
        raise ArgumentError("evaluate_rmse needs at least one test trajectory")
    ds_x, ds_y = _train_refs(models, train)
    test_x, test_y = build_transition_dataset(test_trajectories)
    mx, _ = posterior_diag(models.model_x, step_dataset(ds_x, 0), test_x.inputs)
    my, _ = posterior_diag(models.model_y, step_dataset(ds_y, 1), test_y.inputs)
    pred_x = mx + test_x.inputs[:, 0]
    pred_y = my + test_y.inputs[:, 1]
    err2 = (pred_x - test_x.outputs) ** 2 + (pred_y - test_y.outputs) ** 2
    return float(np.sqrt(np.mean(err2)))
