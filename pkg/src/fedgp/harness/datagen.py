"""Synthetic wireless-traffic series for the forecasting demo.

A station's physical-resource-block usage (percent) is modeled as

    base + daily_amp * sin(2*pi*t/24) + weekly_amp * w(t) + noise,

clipped to [0, 100]. w(t) is a 168 h weekday/weekend modulation: a square
wave with 5/7 duty smoothed by a tanh of adjustable contrast, so weekdays sit
near +1 and the weekend near -1 with soft shoulders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ArgumentError

WEEK_HOURS = 168.0
_DUTY_COS = math.cos(math.pi * 5.0 / 7.0)


@dataclass(frozen=True)
class TrafficSeries:
    """One station's usage trace: times (n,) hours, usage (n,) in [0, 100]."""

    station_id: int
    times: np.ndarray
    usage: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        u = np.asarray(self.usage, dtype=float).ravel()
        if t.shape != u.shape:
            raise ArgumentError(f"{t.shape[0]} times vs {u.shape[0]} usage values")
        if t.size == 0:
            raise ArgumentError("empty traffic series")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(u))):
            raise ArgumentError("traffic series contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ArgumentError("traffic times must be strictly increasing")
        if np.any(u < 0) or np.any(u > 100):
            raise ArgumentError("usage must lie within [0, 100] percent")
        t = t.copy()
        u = u.copy()
        t.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "usage", u)

    def __len__(self) -> int:
        return self.times.shape[0]


def weekly_shape(t_hours, contrast: float = 6.0) -> np.ndarray:
    """Smoothed weekday/weekend square wave in [-1, 1], period 168 h, 5/7 duty.

    contrast controls shoulder sharpness; larger values approach a hard
    square wave. Exactly 168 h periodic (depends on t only through t mod 168).
    """
    if not (np.isfinite(contrast) and contrast > 0):
        raise ArgumentError("contrast must be finite and > 0")
    u = (np.asarray(t_hours, dtype=float) % WEEK_HOURS) / WEEK_HOURS
    raw = np.tanh(contrast * (np.cos(2.0 * np.pi * u) - _DUTY_COS))
    return raw / math.tanh(contrast * (1.0 - _DUTY_COS))


def generate_traffic_series(days: int, samples_per_day: int = 24, *,
                            base: float = 50.0, daily_amp: float = 15.0,
                            weekly_amp: float = 10.0, noise_sigma: float = 2.0,
                            contrast: float = 6.0, seed: int = 0,
                            station_id: int = 0) -> TrafficSeries:
    """Deterministic-per-seed synthetic PRB-usage series, clipped to [0, 100].

    The deterministic part must fit inside the clip range: base plus/minus the
    two amplitudes has to stay within [0, 100], otherwise the clipped signal
    would no longer carry the configured pattern.
    """
    if not isinstance(days, (int, np.integer)) or days < 1:
        raise ArgumentError(f"days must be a positive integer, got {days!r}")
    if not isinstance(samples_per_day, (int, np.integer)) or samples_per_day < 1:
        raise ArgumentError(f"samples_per_day must be a positive integer, got {samples_per_day!r}")
    for name, v in (("base", base), ("daily_amp", daily_amp),
                    ("weekly_amp", weekly_amp), ("noise_sigma", noise_sigma)):
        if not np.isfinite(v):
            raise ArgumentError(f"{name} must be finite, got {v!r}")
    if daily_amp < 0 or weekly_amp < 0 or noise_sigma < 0:
        raise ArgumentError("amplitudes and noise_sigma must be >= 0")
    swing = daily_amp + weekly_amp
    if base - swing < 0.0 or base + swing > 100.0:
        raise ArgumentError(
            f"amplitude sum {swing:g} around base {base:g} exceeds the "
            f"[0, 100] clip headroom")
    n = int(days) * int(samples_per_day)
    t = np.arange(n, dtype=float) * (24.0 / samples_per_day)
    signal = base + daily_amp * np.sin(2.0 * np.pi * t / 24.0)
    signal = signal + weekly_amp * weekly_shape(t, contrast)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        signal = signal + noise_sigma * rng.standard_normal(n)
    usage = np.clip(signal, 0.0, 100.0)
    return TrafficSeries(station_id=station_id, times=t, usage=usage)
