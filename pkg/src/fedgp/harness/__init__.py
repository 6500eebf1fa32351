"""Batch harness: synthetic data, CSV plumbing, experiments, and the CLI."""

from .csvio import (
    read_dataset_csv,
    read_metrics_json,
    read_traffic_csv,
    read_trajectories_csv,
    write_dataset_csv,
    write_history_csv,
    write_metrics_json,
    write_predictions_csv,
    write_traffic_csv,
    write_trajectories_csv,
)
from .datagen import TrafficSeries, generate_traffic_series, weekly_shape
from .experiments import (
    ExperimentConfig,
    config_from_dict,
    config_from_json,
    default_traffic_kernel,
    run_gen_data,
    run_quadratic_oracle,
    run_tracking_eval,
    run_tracking_experiment,
    run_tracking_predict,
    run_traffic_eval,
    run_traffic_experiment,
    run_traffic_predict,
)

__all__ = [
    "ExperimentConfig",
    "TrafficSeries",
    "config_from_dict",
    "config_from_json",
    "default_traffic_kernel",
    "generate_traffic_series",
    "read_dataset_csv",
    "read_metrics_json",
    "read_traffic_csv",
    "read_trajectories_csv",
    "run_gen_data",
    "run_quadratic_oracle",
    "run_tracking_eval",
    "run_tracking_experiment",
    "run_tracking_predict",
    "run_traffic_eval",
    "run_traffic_experiment",
    "run_traffic_predict",
    "weekly_shape",
    "write_dataset_csv",
    "write_history_csv",
    "write_metrics_json",
    "write_predictions_csv",
    "write_traffic_csv",
    "write_trajectories_csv",
]
