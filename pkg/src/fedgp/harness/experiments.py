"""Experiment configuration and end-to-end runs.

Three tasks share one config shape:

    tracking          federated transition-GP training on synthetic tracks,
                      compared against the centralized sum-of-local-NLL optimum
    traffic           federated periodic-GP forecasting of PRB usage with
                      product-of-experts fusion against a 24 h persistence
                      baseline
    quadratic_oracle  consensus self-test on scalar quadratic objectives with
                      a known closed-form optimum

Every run is a pure function of (config, seed): RNG streams derive from the
config seed, and emitted files zero their wall-clock fields unless timings
are explicitly enabled, so re-runs are byte-identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, replace as dc_replace

import numpy as np

from ..errors import ArgumentError, ConfigError
from ..fedopt import (
    CountingObjective,
    FederationConfig,
    FrozenParamsObjective,
    GPNllObjective,
    SumObjective,
    make_client,
    make_gp_clients,
    make_quadratic_clients,
    minimize_objective,
    run_federation,
)
from ..gpcore import Dataset, GPModel, model_from_dict, posterior_diag
from ..kernels import KernelSpec, ard_se, ksum, leaves, param_slices, periodic
from ..kernels import from_dict as spec_from_dict
from ..poefusion import ExpertPrediction, gpoe_fuse
from ..tracking import (
    TransitionModelPair,
    build_transition_dataset,
    evaluate_rmse,
    generate_synthetic_trajectories,
    informed_init,
    step_dataset,
    train_transition_federated,
)
from . import csvio
from .datagen import TrafficSeries, generate_traffic_series

TASKS = ("tracking", "traffic", "quadratic_oracle")
METHODS = ("cadmm", "pxadmm", "fedavg", "fedprox")

_TOP_KEYS = {"task", "seed", "out_dir", "method", "methods", "secure_agg",
             "timings", "kernel", "federation", "data", "params"}
_FED_FORBIDDEN = {"method", "seed", "secure_agg", "init_theta"}
_FED_FIELDS = {f.name for f in dataclasses.fields(FederationConfig)}

TRACKING_DEFAULTS = {
    "n_clients": 3, "traj_per_client": 15, "steps": 12, "test_traj": 10,
    "dt": 0.5, "speed": 1.2, "turn_noise": 0.3, "process_noise": 0.02,
    "arena": (30.0, 15.0), "central_max_iters": 400, "central_grad_tol": 1e-4,
    "centralized_baseline": True,
}
TRAFFIC_DEFAULTS = {
    "days": 30, "samples_per_day": 24, "n_clients": 4, "horizon_hours": 48.0,
    "base": 50.0, "daily_amp": 15.0, "weekly_amp": 10.0, "noise_sigma": 2.0,
    "contrast": 6.0, "split": "contiguous", "period_inits": (24.0, 168.0),
    "train_periods": False,
}
ORACLE_DEFAULTS = {"n_clients": 3, "spread": 2.0, "gap_tol": 1e-5}

_TASK_DEFAULTS = {"tracking": TRACKING_DEFAULTS, "traffic": TRAFFIC_DEFAULTS,
                  "quadratic_oracle": ORACLE_DEFAULTS}
_TASK_METHODS = {"tracking": ("pxadmm", "cadmm"), "traffic": ("cadmm",),
                 "quadratic_oracle": METHODS}
_TASK_FED_DEFAULTS = {
    "tracking": {"rho": 500.0, "lipschitz_L": 5000.0, "tolerance": 1e-3,
                 "max_rounds": 2000},
    "traffic": {"rho": 500.0, "lipschitz_L": 5000.0, "tolerance": 1e-3,
                "max_rounds": 15, "inner_max_iters": 60},
    "quadratic_oracle": {"rho": 2.0, "lipschitz_L": 4.0, "learning_rate": 0.2,
                         "local_iters": 25, "tolerance": 1e-9,
                         "max_rounds": 3000, "inner_tol": 1e-8},
}


def _jsonable(v):
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(v[k]) for k in v}
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; the unit every run hashes and stamps."""

    task: str
    seed: int
    out_dir: str | None = None
    methods: tuple[str, ...] = ()
    secure_agg: bool = False
    timings: bool = False
    kernel: KernelSpec | None = None
    federation: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    @property
    def method(self) -> str:
        return self.methods[0]

    def canonical_dict(self) -> dict:
        """The hashed view: everything that can change results. out_dir and
        timings are excluded so runs into different directories compare equal."""
        return _jsonable({
            "task": self.task,
            "seed": self.seed,
            "methods": list(self.methods),
            "secure_agg": self.secure_agg,
            "kernel": self.kernel.to_dict() if self.kernel is not None else None,
            "federation": self.federation,
            "data": self.data,
            "params": self.params,
        })

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def stamp(self) -> list[str]:
        return csvio.stamp_comment(self.config_hash(), self.seed)


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a plain JSON-style dict."""
    if not isinstance(d, dict):
        raise ConfigError(f"config must be a JSON object, got {type(d).__name__}")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    task = d.get("task")
    if task not in TASKS:
        raise ConfigError(f"task must be one of {TASKS}, got {task!r}")
    if "seed" not in d:
        raise ConfigError("seed is mandatory")
    seed = d["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")

    methods = d.get("methods")
    if methods is None:
        methods = [d["method"]] if "method" in d and d["method"] is not None \
            else list(_TASK_METHODS[task])
    if isinstance(methods, str):
        methods = [methods]
    if not methods:
        raise ConfigError("methods must not be empty")
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
    if len(set(methods)) != len(methods):
        raise ConfigError("methods must be distinct")

    secure_agg = d.get("secure_agg", False)
    timings = d.get("timings", False)
    for name, v in (("secure_agg", secure_agg), ("timings", timings)):
        if not isinstance(v, bool):
            raise ConfigError(f"{name} must be true or false, got {v!r}")

    kernel = None
    if d.get("kernel") is not None:
        try:
            kernel = spec_from_dict(d["kernel"])
        except (ArgumentError, ValueError, TypeError, KeyError) as e:
            raise ConfigError(f"invalid kernel: {e}") from None

    federation = dict(d.get("federation", {}))
    bad = set(federation) & _FED_FORBIDDEN
    if bad:
        raise ConfigError(f"federation keys {sorted(bad)} are set by the "
                          f"experiment, not the config")
    unknown = set(federation) - _FED_FIELDS
    if unknown:
        raise ConfigError(f"unknown federation keys: {sorted(unknown)}")

    defaults = _TASK_DEFAULTS[task]
    params = dict(d.get("params", {}))
    unknown = set(params) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown params for task {task!r}: {sorted(unknown)}")

    data = dict(d.get("data", {}))
    if data:
        extra = set(data) - {"synthetic", "csv"}
        if extra or len(data) != 1:
            raise ConfigError("data must contain exactly one of 'synthetic' or 'csv'")
        if "csv" in data:
            if not isinstance(data["csv"], dict):
                raise ConfigError("data.csv must map roles to file paths")
            for role, path in data["csv"].items():
                if not os.path.exists(path):
                    raise ConfigError(f"data.csv[{role!r}] does not exist: {path}")

    out_dir = d.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError(f"out_dir must be a string path, got {out_dir!r}")

    return ExperimentConfig(task=task, seed=seed, out_dir=out_dir,
                            methods=tuple(methods), secure_agg=secure_agg,
                            timings=timings, kernel=kernel,
                            federation=federation, data=data, params=params)


def config_from_json(path: str) -> ExperimentConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file does not exist: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}") from None
    return config_from_dict(d)


def _merged_params(cfg: ExperimentConfig) -> dict:
    return {**_TASK_DEFAULTS[cfg.task], **cfg.params}


def _fed_config(cfg: ExperimentConfig, method: str, *, init_theta=None) -> FederationConfig:
    kw = dict(_TASK_FED_DEFAULTS[cfg.task])
    kw.update(cfg.federation)
    try:
        return FederationConfig(method=method, seed=cfg.seed + 1,
                                secure_agg=cfg.secure_agg,
                                init_theta=init_theta, **kw)
    except ConfigError:
        raise
    except (ArgumentError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid federation settings: {e}") from None


def _elapsed(t0: float, cfg: ExperimentConfig) -> float:
    return time.perf_counter() - t0 if cfg.timings else 0.0


# ----------------------------------------------------------------- tracking

def _tracking_data(cfg: ExperimentConfig, p: dict):
    """(per-client trajectory lists, test trajectories)."""
    if "csv" in cfg.data:
        paths = cfg.data["csv"]
        if "train" not in paths or "test" not in paths:
            raise ConfigError("tracking data.csv needs 'train' and 'test' paths")
        train = csvio.read_trajectories_csv(paths["train"])
        test = csvio.read_trajectories_csv(paths["test"])
        owners = sorted({tr.owner for tr in train})
        clients = [[tr for tr in train if tr.owner == o] for o in owners]
        return clients, test
    base = cfg.seed * 10000
    k_clients = int(p["n_clients"])
    tpc = int(p["traj_per_client"])
    rect = tuple(float(v) for v in p["arena"])
    common = dict(dt=float(p["dt"]), speed=float(p["speed"]),
                  turn_noise=float(p["turn_noise"]),
                  process_noise=float(p["process_noise"]), rect=rect)
    clients = []
    for k in range(k_clients):
        trs = generate_synthetic_trajectories(tpc, int(p["steps"]),
                                              seed=base + k,
                                              id_offset=k * tpc, **common)
        clients.append([dc_replace(tr, owner=k) for tr in trs])
    test = generate_synthetic_trajectories(int(p["test_traj"]), int(p["steps"]),
                                           seed=base + 9999,
                                           id_offset=k_clients * tpc, **common)
    return clients, test


def _summed_nll(spec: KernelSpec, per_client, theta_x, theta_y) -> float:
    """Sum of local NLLs over clients and both planar dimensions, evaluated on
    the step datasets the transition GPs train on."""
    total = 0.0
    for dim_idx, theta in ((0, theta_x), (1, theta_y)):
        obj = SumObjective([GPNllObjective(spec, step_dataset(pc[dim_idx], dim_idx))
                            for pc in per_client])
        total += obj.value(np.asarray(theta, dtype=float))
    return float(total)


def run_tracking_experiment(cfg: ExperimentConfig) -> dict:
    """Train every requested method, evaluate against held-out tracks, and
    (by default) against the centralized optimum of the summed local NLLs."""
    p = _merged_params(cfg)
    spec = cfg.kernel if cfg.kernel is not None else ard_se(2)
    client_trajs, test_trajs = _tracking_data(cfg, p)
    per_client = [build_transition_dataset(trs) for trs in client_trajs]
    pooled = build_transition_dataset([tr for trs in client_trajs for tr in trs])
    stamp = cfg.stamp()

    rows = []
    per_method = {}
    for method in cfg.methods:
        fc = _fed_config(cfg, method)
        t0 = time.perf_counter()
        pair = train_transition_federated(client_trajs, fc, spec=spec)
        ct = _elapsed(t0, cfg)
        hx, hy = pair.history["x"], pair.history["y"]
        nll = _summed_nll(spec, per_client, pair.model_x.theta, pair.model_y.theta)
        rmse = evaluate_rmse(pair, test_trajs)
        per_method[method] = {
            "nll": nll, "rmse_m": rmse,
            "rounds": hx["rounds"] + hy["rounds"],
            "grad_evals": hx["grad_evals"] + hy["grad_evals"],
            "value_evals": hx["value_evals"] + hy["value_evals"],
            "converged": bool(hx["state"].converged and hy["state"].converged),
            "ct_s": ct,
            "theta_x": [float(v) for v in pair.model_x.theta],
            "theta_y": [float(v) for v in pair.model_y.theta],
        }
        rows.append((method, rmse, nll, hx["rounds"] + hy["rounds"],
                     hx["grad_evals"] + hy["grad_evals"], ct))
        if cfg.out_dir:
            for dim in ("x", "y"):
                csvio.write_history_csv(
                    os.path.join(cfg.out_dir, f"history_{method}_{dim}.csv"),
                    pair.history[dim]["state"].history, comments=stamp,
                    include_timings=cfg.timings)
                model = pair.model_x if dim == "x" else pair.model_y
                csvio.write_metrics_json(
                    os.path.join(cfg.out_dir, f"model_{method}_{dim}.json"),
                    model.to_dict(), config_sha256=cfg.config_hash(),
                    seed=cfg.seed)

    central = None
    if p["centralized_baseline"]:
        central = {"ct_s": 0.0, "rounds": 0, "grad_evals": 0, "value_evals": 0}
        thetas = {}
        t0 = time.perf_counter()
        for dim_idx, dim in ((0, "x"), (1, "y")):
            counting = CountingObjective(SumObjective(
                [GPNllObjective(spec, step_dataset(pc[dim_idx], dim_idx))
                 for pc in per_client]))
            init = informed_init(step_dataset(pooled[dim_idx], dim_idx), spec)
            theta, iters = minimize_objective(
                counting, init, grad_tol=float(p["central_grad_tol"]),
                max_iters=int(p["central_max_iters"]))
            thetas[dim] = theta
            central["rounds"] += iters
            central["grad_evals"] += counting.grad_evals
            central["value_evals"] += counting.value_evals
        central["ct_s"] = _elapsed(t0, cfg)
        central["nll"] = _summed_nll(spec, per_client, thetas["x"], thetas["y"])
        pair_c = TransitionModelPair(GPModel(spec, thetas["x"]),
                                     GPModel(spec, thetas["y"]),
                                     train_x=pooled[0], train_y=pooled[1])
        central["rmse_m"] = evaluate_rmse(pair_c, test_trajs)
        central["theta_x"] = [float(v) for v in thetas["x"]]
        central["theta_y"] = [float(v) for v in thetas["y"]]
        rows.append(("centralized", central["rmse_m"], central["nll"],
                     central["rounds"], central["grad_evals"], central["ct_s"]))
        if cfg.out_dir:
            for dim in ("x", "y"):
                csvio.write_metrics_json(
                    os.path.join(cfg.out_dir, f"model_centralized_{dim}.json"),
                    GPModel(spec, thetas[dim]).to_dict(),
                    config_sha256=cfg.config_hash(), seed=cfg.seed)

    n_test = sum(len(tr) - 1 for tr in test_trajs)
    metrics = {
        "task": "tracking",
        "kernel": spec.to_dict(),
        "n_clients": len(client_trajs),
        "n_train_transitions": len(pooled[0]),
        "n_test_transitions": n_test,
        "methods": _jsonable(per_method),
    }
    if central is not None:
        metrics["centralized"] = _jsonable(central)
    if cfg.out_dir:
        csvio.write_table_csv(
            os.path.join(cfg.out_dir, "comparison.csv"),
            ["method", "rmse_m", "nll", "rounds", "grad_evals", "ct_s"],
            [np.array([r[i] for r in rows], dtype=object) for i in range(6)],
            comments=stamp)
        csvio.write_metrics_json(os.path.join(cfg.out_dir, "metrics.json"),
                                 metrics, config_sha256=cfg.config_hash(),
                                 seed=cfg.seed)
    return metrics


def _load_model(cfg: ExperimentConfig, name: str) -> GPModel:
    if not cfg.out_dir:
        raise ConfigError("this command needs out_dir pointing at a train run")
    path = os.path.join(cfg.out_dir, name)
    payload = csvio.read_metrics_json(path)
    payload = {k: v for k, v in payload.items() if not k.startswith("_")}
    return model_from_dict(payload)


def run_tracking_predict(cfg: ExperimentConfig) -> dict:
    """One-step predictions on the test tracks using saved models."""
    p = _merged_params(cfg)
    method = cfg.method
    model_x = _load_model(cfg, f"model_{method}_x.json")
    model_y = _load_model(cfg, f"model_{method}_y.json")
    client_trajs, test_trajs = _tracking_data(cfg, p)
    pooled = build_transition_dataset([tr for trs in client_trajs for tr in trs])
    test_x, test_y = build_transition_dataset(test_trajs)
    mean_x, var_x = posterior_diag(model_x, step_dataset(pooled[0], 0), test_x.inputs)
    mean_y, var_y = posterior_diag(model_y, step_dataset(pooled[1], 1), test_y.inputs)
    mean_x = mean_x + test_x.inputs[:, 0]
    mean_y = mean_y + test_y.inputs[:, 1]
    stamp = cfg.stamp()
    idx = np.arange(len(test_x))
    csvio.write_predictions_csv(
        os.path.join(cfg.out_dir, f"predictions_{method}_x.csv"),
        idx, mean_x, np.sqrt(var_x), comments=stamp, truth=test_x.outputs)
    csvio.write_predictions_csv(
        os.path.join(cfg.out_dir, f"predictions_{method}_y.csv"),
        idx, mean_y, np.sqrt(var_y), comments=stamp, truth=test_y.outputs)
    return {"task": "tracking", "method": method,
            "n_test_transitions": int(len(test_x))}


def run_tracking_eval(cfg: ExperimentConfig) -> dict:
    """RMSE and summed NLL of saved models on the configured data."""
    p = _merged_params(cfg)
    method = cfg.method
    model_x = _load_model(cfg, f"model_{method}_x.json")
    model_y = _load_model(cfg, f"model_{method}_y.json")
    client_trajs, test_trajs = _tracking_data(cfg, p)
    per_client = [build_transition_dataset(trs) for trs in client_trajs]
    pooled = build_transition_dataset([tr for trs in client_trajs for tr in trs])
    spec = model_x.spec
    pair = TransitionModelPair(model_x, model_y, train_x=pooled[0],
                               train_y=pooled[1])
    metrics = {
        "task": "tracking",
        "method": method,
        "rmse_m": evaluate_rmse(pair, test_trajs),
        "nll": _summed_nll(spec, per_client, model_x.theta, model_y.theta),
        "n_test_transitions": sum(len(tr) - 1 for tr in test_trajs),
    }
    if cfg.out_dir:
        csvio.write_metrics_json(os.path.join(cfg.out_dir, "eval_metrics.json"),
                                 metrics, config_sha256=cfg.config_hash(),
                                 seed=cfg.seed)
    return metrics


# ------------------------------------------------------------------ traffic

def _traffic_series(cfg: ExperimentConfig, p: dict) -> TrafficSeries:
    if "csv" in cfg.data:
        paths = cfg.data["csv"]
        if "series" not in paths:
            raise ConfigError("traffic data.csv needs a 'series' path")
        return csvio.read_traffic_csv(paths["series"])
    return generate_traffic_series(
        int(p["days"]), int(p["samples_per_day"]), base=float(p["base"]),
        daily_amp=float(p["daily_amp"]), weekly_amp=float(p["weekly_amp"]),
        noise_sigma=float(p["noise_sigma"]), contrast=float(p["contrast"]),
        seed=cfg.seed)


def _traffic_split(cfg: ExperimentConfig, p: dict, series: TrafficSeries):
    """(train_idx, test_idx, block index lists) for the configured horizon."""
    horizon = float(p["horizon_hours"])
    span = series.times[-1] - series.times[0]
    if not (0.0 < horizon < span):
        raise ArgumentError(f"horizon_hours {horizon:g} must lie inside the "
                            f"series span {span:g} h")
    cutoff = series.times[-1] - horizon
    train_idx = np.nonzero(series.times <= cutoff + 1e-9)[0]
    test_idx = np.nonzero(series.times > cutoff + 1e-9)[0]
    if train_idx.size < 2 or test_idx.size == 0:
        raise ArgumentError("horizon leaves too little data on one side")
    k = int(p["n_clients"])
    if k < 1 or train_idx.size < 2 * k:
        raise ArgumentError(f"cannot split {train_idx.size} training rows "
                            f"across {k} clients")
    scheme = str(p["split"]).lower()
    if scheme == "contiguous":
        order = train_idx
    elif scheme == "random":
        order = np.random.default_rng(cfg.seed + 2).permutation(train_idx)
    else:
        raise ConfigError(f"unknown traffic split {p['split']!r}; "
                          f"use 'contiguous' or 'random'")
    blocks = [np.sort(b) for b in np.array_split(order, k)]
    return train_idx, test_idx, blocks


def default_traffic_kernel() -> KernelSpec:
    """Daily periodic + weekly periodic + smooth-trend composite."""
    return ksum(periodic(1), periodic(1), ard_se(1))


def _period_coord_indices(spec: KernelSpec) -> list[int]:
    """Flat-theta indices of every periodic leaf's log-period entry."""
    return [sl.start + 2 for leaf, sl in param_slices(spec)
            if leaf.family == "PERIODIC"]


def _traffic_init(spec: KernelSpec, t_train: np.ndarray, p: dict) -> np.ndarray:
    """Starting theta: periods seeded at the configured cycle lengths, signal
    variance split across leaves (outputs are standardized), 10% noise."""
    period_inits = [float(v) for v in p["period_inits"]]
    lvs = leaves(spec)
    share = 1.0 / max(len(lvs), 1)
    theta = []
    np_used = 0
    for leaf in lvs:
        if leaf.family == "PERIODIC":
            period = period_inits[np_used % len(period_inits)] if period_inits else 24.0
            np_used += 1
            theta.extend([math.log(share), 0.0, math.log(period)])
        elif leaf.family == "ARD_SE":
            theta.append(math.log(share))
            for j in range(leaf.input_dim):
                spread = float(np.var(t_train)) if t_train.size else 1.0
                theta.append(math.log(max(2.0 * spread, 1e-6)))
        elif leaf.family == "NEURAL_NET":
            theta.extend([0.0] * (leaf.input_dim + 1))
        else:
            raise ConfigError(f"traffic kernel cannot contain {leaf.family}")
    theta.append(math.log(0.1))
    return np.asarray(theta)


def _persistence_forecast(series: TrafficSeries, test_idx: np.ndarray) -> np.ndarray:
    """y(t - 24 h) looked up on the recorded grid; errors if a lag is absent."""
    targets = series.times[test_idx] - 24.0
    pos = np.searchsorted(series.times, targets - 1e-6)
    pos = np.clip(pos, 0, len(series.times) - 1)
    if np.any(np.abs(series.times[pos] - targets) > 1e-6):
        bad = int(test_idx[np.argmax(np.abs(series.times[pos] - targets))])
        raise ArgumentError(f"persistence baseline needs a sample exactly 24 h "
                            f"before t={series.times[bad]:g}")
    return series.usage[pos]


def _nmse(pred: np.ndarray, truth: np.ndarray) -> float:
    denom = float(np.sum((truth - truth.mean()) ** 2))
    sse = float(np.sum((pred - truth) ** 2))
    if denom == 0.0:
        return 0.0 if sse == 0.0 else float("inf")
    return sse / denom


def _mean_nlpd(mean, var, truth) -> float:
    var = np.maximum(np.asarray(var, dtype=float), 1e-300)
    resid = np.asarray(truth, dtype=float) - np.asarray(mean, dtype=float)
    return float(np.mean(0.5 * np.log(2.0 * np.pi * var) + 0.5 * resid**2 / var))


def _traffic_fuse(model: GPModel, datasets, X_test, betas, y_mean, y_std):
    experts = []
    for ds in datasets:
        m, v = posterior_diag(model, ds, X_test)
        experts.append(ExpertPrediction(m, np.maximum(v, 1e-12)))
    f_mean, f_var = gpoe_fuse(experts, betas)
    return f_mean * y_std + y_mean, f_var * y_std**2


def _run_traffic_method(cfg: ExperimentConfig, p: dict, method: str,
                        series: TrafficSeries, setup) -> dict:
    train_idx, test_idx, blocks = setup
    y_train = series.usage[train_idx]
    y_mean = float(np.mean(y_train))
    y_std = max(float(np.std(y_train)), 1e-8)
    datasets = [Dataset(series.times[b].reshape(-1, 1),
                        (series.usage[b] - y_mean) / y_std) for b in blocks]
    spec = cfg.kernel if cfg.kernel is not None else default_traffic_kernel()
    init = _traffic_init(spec, series.times[train_idx], p)
    fc = _fed_config(cfg, method, init_theta=tuple(float(v) for v in init))
    # Each client block spans about one weekly cycle, which cannot identify
    # the cycle lengths themselves; by default they stay pinned at the
    # calendar values while amplitudes, lengthscales and noise are trained.
    frozen = [] if p["train_periods"] else _period_coord_indices(spec)
    clients = []
    for i, ds in enumerate(datasets):
        obj = GPNllObjective(spec, ds)
        if frozen:
            obj = FrozenParamsObjective(obj, frozen, init[np.asarray(frozen)])
        clients.append(make_client(i, obj, rho=fc.rho, lipschitz_L=fc.lipschitz_L,
                                   n_obs=len(ds), data=ds))
    t0 = time.perf_counter()
    z, state = run_federation(fc, clients)
    ct = _elapsed(t0, cfg)
    model = GPModel(spec, z)
    sizes = np.array([len(ds) for ds in datasets], dtype=float)
    betas = sizes / sizes.sum()
    X_test = series.times[test_idx].reshape(-1, 1)
    y_test = series.usage[test_idx]
    f_mean, f_var = _traffic_fuse(model, datasets, X_test, betas, y_mean, y_std)
    persistence = _persistence_forecast(series, test_idx)
    result = {
        "nmse": _nmse(f_mean, y_test),
        "persistence_nmse": _nmse(persistence, y_test),
        "nll": _mean_nlpd(f_mean, f_var, y_test),
        "rounds": state.round,
        "grad_evals": int(sum(c.objective.grad_evals for c in clients)),
        "value_evals": int(sum(c.objective.value_evals for c in clients)),
        "converged": bool(state.converged),
        "ct_s": ct,
        "theta": [float(v) for v in z],
        "betas": [float(b) for b in betas],
    }
    artifacts = {"state": state, "model": model, "f_mean": f_mean,
                 "f_var": f_var, "y_test": y_test,
                 "t_test": series.times[test_idx]}
    return result, artifacts


def run_traffic_experiment(cfg: ExperimentConfig) -> dict:
    """Federated forecast of the held-out horizon, fused across client blocks."""
    p = _merged_params(cfg)
    series = _traffic_series(cfg, p)
    setup = _traffic_split(cfg, p, series)
    stamp = cfg.stamp()
    spec = cfg.kernel if cfg.kernel is not None else default_traffic_kernel()
    per_method = {}
    rows = []
    for method in cfg.methods:
        result, artifacts = _run_traffic_method(cfg, p, method, series, setup)
        per_method[method] = result
        rows.append((method, result["nmse"], result["nll"],
                     result["persistence_nmse"], result["rounds"],
                     result["grad_evals"], result["ct_s"]))
        if cfg.out_dir:
            csvio.write_history_csv(
                os.path.join(cfg.out_dir, f"history_{method}.csv"),
                artifacts["state"].history, comments=stamp,
                include_timings=cfg.timings)
            csvio.write_predictions_csv(
                os.path.join(cfg.out_dir, f"predictions_{method}.csv"),
                artifacts["t_test"], artifacts["f_mean"],
                np.sqrt(artifacts["f_var"]), comments=stamp,
                truth=artifacts["y_test"])
            csvio.write_metrics_json(
                os.path.join(cfg.out_dir, f"model_{method}.json"),
                artifacts["model"].to_dict(),
                config_sha256=cfg.config_hash(), seed=cfg.seed)
    metrics = {
        "task": "traffic",
        "kernel": spec.to_dict(),
        "n_clients": int(p["n_clients"]),
        "n_train": int(setup[0].size),
        "n_test": int(setup[1].size),
        "methods": _jsonable(per_method),
    }
    if cfg.out_dir:
        csvio.write_table_csv(
            os.path.join(cfg.out_dir, "comparison.csv"),
            ["method", "nmse", "nll", "persistence_nmse", "rounds",
             "grad_evals", "ct_s"],
            [np.array([r[i] for r in rows], dtype=object) for i in range(7)],
            comments=stamp)
        csvio.write_metrics_json(os.path.join(cfg.out_dir, "metrics.json"),
                                 metrics, config_sha256=cfg.config_hash(),
                                 seed=cfg.seed)
    return metrics


def run_traffic_predict(cfg: ExperimentConfig) -> dict:
    """Re-fuse forecasts from a saved consensus model; writes predictions CSV."""
    p = _merged_params(cfg)
    method = cfg.method
    model = _load_model(cfg, f"model_{method}.json")
    series = _traffic_series(cfg, p)
    train_idx, test_idx, blocks = _traffic_split(cfg, p, series)
    y_train = series.usage[train_idx]
    y_mean = float(np.mean(y_train))
    y_std = max(float(np.std(y_train)), 1e-8)
    datasets = [Dataset(series.times[b].reshape(-1, 1),
                        (series.usage[b] - y_mean) / y_std) for b in blocks]
    sizes = np.array([len(ds) for ds in datasets], dtype=float)
    X_test = series.times[test_idx].reshape(-1, 1)
    f_mean, f_var = _traffic_fuse(model, datasets, X_test, sizes / sizes.sum(),
                                  y_mean, y_std)
    csvio.write_predictions_csv(
        os.path.join(cfg.out_dir, f"predictions_{method}.csv"),
        series.times[test_idx], f_mean, np.sqrt(f_var), comments=cfg.stamp(),
        truth=series.usage[test_idx])
    return {"task": "traffic", "method": method, "n_test": int(test_idx.size)}


def run_traffic_eval(cfg: ExperimentConfig) -> dict:
    """NMSE/NLL of a saved model against the configured series."""
    p = _merged_params(cfg)
    method = cfg.method
    model = _load_model(cfg, f"model_{method}.json")
    series = _traffic_series(cfg, p)
    train_idx, test_idx, blocks = _traffic_split(cfg, p, series)
    y_train = series.usage[train_idx]
    y_mean = float(np.mean(y_train))
    y_std = max(float(np.std(y_train)), 1e-8)
    datasets = [Dataset(series.times[b].reshape(-1, 1),
                        (series.usage[b] - y_mean) / y_std) for b in blocks]
    sizes = np.array([len(ds) for ds in datasets], dtype=float)
    X_test = series.times[test_idx].reshape(-1, 1)
    y_test = series.usage[test_idx]
    f_mean, f_var = _traffic_fuse(model, datasets, X_test, sizes / sizes.sum(),
                                  y_mean, y_std)
    metrics = {
        "task": "traffic",
        "method": method,
        "nmse": _nmse(f_mean, y_test),
        "persistence_nmse": _nmse(_persistence_forecast(series, test_idx), y_test),
        "nll": _mean_nlpd(f_mean, f_var, y_test),
        "n_test": int(test_idx.size),
    }
    if cfg.out_dir:
        csvio.write_metrics_json(os.path.join(cfg.out_dir, "eval_metrics.json"),
                                 metrics, config_sha256=cfg.config_hash(),
                                 seed=cfg.seed)
    return metrics


# ----------------------------------------------------------- quadratic oracle

def run_quadratic_oracle(cfg: ExperimentConfig) -> dict:
    """Self-test: every method must recover z* = mean(a_k) on quadratics."""
    p = _merged_params(cfg)
    k = int(p["n_clients"])
    if k < 1:
        raise ConfigError("quadratic oracle needs n_clients >= 1")
    rng = np.random.default_rng(cfg.seed)
    targets = rng.normal(0.0, float(p["spread"]), size=k)
    z_star = float(np.mean(targets))
    gap_tol = float(p["gap_tol"])
    per_method = {}
    for method in cfg.methods:
        fed_kw = dict(_TASK_FED_DEFAULTS["quadratic_oracle"])
        fed_kw.update(cfg.federation)
        fed_kw["prox_mu"] = fed_kw.get("prox_mu", 1.0) if method == "fedprox" else 0.0
        fc = FederationConfig(method=method, seed=cfg.seed + 1,
                              secure_agg=cfg.secure_agg, **fed_kw)
        clients = make_quadratic_clients(targets, c=1.0, rho=fc.rho,
                                         lipschitz_L=fc.lipschitz_L)
        z, state = run_federation(fc, clients)
        gap = float(np.max(np.abs(z - z_star)))
        per_method[method] = {
            "gap": gap,
            "rounds": state.round,
            "converged": bool(state.converged),
            "grad_evals": int(sum(c.objective.grad_evals for c in clients)),
            "pass": bool(gap < gap_tol),
        }
    metrics = {
        "task": "quadratic_oracle",
        "z_star": z_star,
        "targets": [float(a) for a in targets],
        "gap_tol": gap_tol,
        "methods": per_method,
        "pass": bool(all(m["pass"] for m in per_method.values())),
    }
    if cfg.out_dir:
        csvio.write_metrics_json(os.path.join(cfg.out_dir, "oracle_metrics.json"),
                                 metrics, config_sha256=cfg.config_hash(),
                                 seed=cfg.seed)
    return metrics


# ----------------------------------------------------------------- gen-data

def run_gen_data(cfg: ExperimentConfig) -> dict:
    """Write the configured task's synthetic data as CSV artifacts."""
    if not cfg.out_dir:
        raise ConfigError("gen-data needs an output directory")
    p = _merged_params(cfg)
    stamp = cfg.stamp()
    if cfg.task == "tracking":
        client_trajs, test_trajs = _tracking_data(cfg, p)
        train_path = os.path.join(cfg.out_dir, "trajectories_train.csv")
        test_path = os.path.join(cfg.out_dir, "trajectories_test.csv")
        csvio.write_trajectories_csv(
            train_path, [tr for trs in client_trajs for tr in trs],
            comments=stamp)
        csvio.write_trajectories_csv(test_path, test_trajs, comments=stamp)
        return {"task": "tracking", "files": [train_path, test_path],
                "n_train_trajectories": sum(len(t) for t in client_trajs),
                "n_test_trajectories": len(test_trajs)}
    if cfg.task == "traffic":
        series = _traffic_series(cfg, p)
        path = os.path.join(cfg.out_dir, "traffic.csv")
        csvio.write_traffic_csv(path, series, comments=stamp)
        return {"task": "traffic", "files": [path], "n_samples": len(series)}
    raise ConfigError(f"gen-data does not apply to task {cfg.task!r}")


_TRAIN_FNS = {"tracking": run_tracking_experiment,
              "traffic": run_traffic_experiment,
              "quadratic_oracle": run_quadratic_oracle}
_PREDICT_FNS = {"tracking": run_tracking_predict, "traffic": run_traffic_predict}
_EVAL_FNS = {"tracking": run_tracking_eval, "traffic": run_traffic_eval}
