"""CSV and JSON plumbing for datasets, trajectories, traffic, and metrics.

All numeric cells are written with 17 significant digits so write/read
round-trips are exact at double precision. Readers are strict: unexpected
headers, unparsable cells, or semantic violations (non-monotone time, values
out of bounds) raise IngestionError naming file, line, and column. Lines
beginning with '#' are comments; writers use them to stamp the config hash
and seed every emitted file carries.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import IngestionError
from ..gpcore import Dataset
from ..tracking import Trajectory
from .datagen import TrafficSeries

_FMT = "%.17g"


def _fmt(v) -> str:
    return _FMT % float(v)


def _ensure_dir(path: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def stamp_comment(config_sha256: str | None, seed: int | None) -> list[str]:
    """Comment lines recording provenance, prepended to every CSV artifact."""
    out = []
    if config_sha256 is not None:
        out.append(f"# config_sha256={config_sha256}")
    if seed is not None:
        out.append(f"# seed={seed}")
    return out


def _write_lines(path: str, lines):
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def _read_rows(path: str):
    """Yield (line_number, [cells]) skipping comments and blank lines."""
    if not os.path.exists(path):
        raise IngestionError("file does not exist", path=path)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line or line.startswith("#"):
                continue
            yield lineno, line.split(",")


def _parse_float(cell: str, path: str, lineno: int, column: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise IngestionError(f"cannot parse {cell!r} as a number",
                             path=path, line=lineno, column=column) from None


def _parse_int(cell: str, path: str, lineno: int, column: str) -> int:
    try:
        return int(cell)
    except ValueError:
        raise IngestionError(f"cannot parse {cell!r} as an integer",
                             path=path, line=lineno, column=column) from None


def _check_header(cells, expected, path, lineno):
    if cells != list(expected):
        raise IngestionError(
            f"expected header {','.join(expected)!r}, got {','.join(cells)!r}",
            path=path, line=lineno)


def _check_width(cells, expected, path, lineno):
    if len(cells) != len(expected):
        raise IngestionError(
            f"expected {len(expected)} columns, got {len(cells)}",
            path=path, line=lineno)


def write_table_csv(path: str, headers, columns, *, comments=()):
    """Generic column-oriented CSV writer; numeric cells at 17 sig digits."""
    columns = [np.asarray(c) for c in columns]
    if len(headers) != len(columns):
        raise ValueError(f"{len(headers)} headers vs {len(columns)} columns")
    n = columns[0].shape[0] if columns else 0
    lines = list(comments)
    lines.append(",".join(headers))
    for i in range(n):
        cells = []
        for col in columns:
            v = col[i]
            if isinstance(v, (str, np.str_)):
                cells.append(str(v))
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            else:
                cells.append(_fmt(v))
        lines.append(",".join(cells))
    _write_lines(path, lines)


# ---------------------------------------------------------------- datasets

def dataset_headers(d: int) -> list[str]:
    return [f"x{j}" for j in range(d)] + ["y"]


def write_dataset_csv(path: str, data: Dataset, *, comments=()):
    headers = dataset_headers(data.inputs.shape[1])
    cols = [data.inputs[:, j] for j in range(data.inputs.shape[1])] + [data.outputs]
    write_table_csv(path, headers, cols, comments=comments)


def read_dataset_csv(path: str) -> Dataset:
    rows = _read_rows(path)
    try:
        lineno, cells = next(rows)
    except StopIteration:
        raise IngestionError("file has no header row", path=path) from None
    if not cells or cells[-1] != "y" or any(c != f"x{j}" for j, c in enumerate(cells[:-1])):
        raise IngestionError(
            f"expected header like 'x0,...,y', got {','.join(cells)!r}",
            path=path, line=lineno)
    headers = cells
    d = len(headers) - 1
    if d == 0:
        raise IngestionError("dataset needs at least one input column",
                             path=path, line=lineno)
    xs, ys = [], []
    for lineno, cells in rows:
        _check_width(cells, headers, path, lineno)
        vals = [_parse_float(c, path, lineno, h) for c, h in zip(cells, headers)]
        for v, h in zip(vals, headers):
            if not np.isfinite(v):
                raise IngestionError("non-finite value", path=path,
                                     line=lineno, column=h)
        xs.append(vals[:-1])
        ys.append(vals[-1])
    if not xs:
        raise IngestionError("dataset has no data rows", path=path)
    return Dataset(np.asarray(xs), np.asarray(ys))


# ------------------------------------------------------------- trajectories

TRAJECTORY_HEADERS = ["traj_id", "owner", "t", "x", "y"]


def write_trajectories_csv(path: str, trajectories, *, comments=()):
    lines = list(comments)
    lines.append(",".join(TRAJECTORY_HEADERS))
    for tr in trajectories:
        for t, (x, y) in zip(tr.times, tr.states):
            lines.append(f"{tr.id},{tr.owner},{_fmt(t)},{_fmt(x)},{_fmt(y)}")
    _write_lines(path, lines)


def read_trajectories_csv(path: str) -> list[Trajectory]:
    """Parse trajectories; rows of one trajectory must be contiguous with
    strictly increasing t."""
    rows = _read_rows(path)
    try:
        lineno, cells = next(rows)
    except StopIteration:
        raise IngestionError("file has no header row", path=path) from None
    _check_header(cells, TRAJECTORY_HEADERS, path, lineno)
    out = []
    seen_ids = set()
    cur_id = None
    cur_owner = 0
    times, states = [], []

    def flush(lineno):
        if cur_id is None:
            return
        if len(times) < 2:
            raise IngestionError(f"trajectory {cur_id} has fewer than 2 samples",
                                 path=path, line=lineno)
        out.append(Trajectory(id=cur_id, times=np.asarray(times),
                              states=np.asarray(states), owner=cur_owner))

    for lineno, cells in rows:
        _check_width(cells, TRAJECTORY_HEADERS, path, lineno)
        tid = _parse_int(cells[0], path, lineno, "traj_id")
        owner = _parse_int(cells[1], path, lineno, "owner")
        t = _parse_float(cells[2], path, lineno, "t")
        x = _parse_float(cells[3], path, lineno, "x")
        y = _parse_float(cells[4], path, lineno, "y")
        for v, col in ((t, "t"), (x, "x"), (y, "y")):
            if not np.isfinite(v):
                raise IngestionError("non-finite value", path=path,
                                     line=lineno, column=col)
        if tid != cur_id:
            if tid in seen_ids:
                raise IngestionError(
                    f"trajectory {tid} appears in non-contiguous blocks",
                    path=path, line=lineno, column="traj_id")
            flush(lineno)
            seen_ids.add(tid)
            cur_id, cur_owner = tid, owner
            times, states = [], []
        elif owner != cur_owner:
            raise IngestionError(
                f"trajectory {tid} changes owner mid-block",
                path=path, line=lineno, column="owner")
        if times and t <= times[-1]:
            raise IngestionError(
                f"time {t!r} does not increase past {times[-1]!r}",
                path=path, line=lineno, column="t")
        times.append(t)
        states.append((x, y))
    flush(lineno if out or times else None)
    if not out:
        raise IngestionError("file contains no trajectories", path=path)
    return out


# ------------------------------------------------------------------ traffic

TRAFFIC_HEADERS = ["station_id", "t_hours", "prb_usage"]


def write_traffic_csv(path: str, series: TrafficSeries, *, comments=()):
    lines = list(comments)
    lines.append(",".join(TRAFFIC_HEADERS))
    for t, u in zip(series.times, series.usage):
        lines.append(f"{series.station_id},{_fmt(t)},{_fmt(u)}")
    _write_lines(path, lines)


def read_traffic_csv(path: str) -> TrafficSeries:
    rows = _read_rows(path)
    try:
        lineno, cells = next(rows)
    except StopIteration:
        raise IngestionError("file has no header row", path=path) from None
    _check_header(cells, TRAFFIC_HEADERS, path, lineno)
    station = None
    times, usage = [], []
    for lineno, cells in rows:
        _check_width(cells, TRAFFIC_HEADERS, path, lineno)
        sid = _parse_int(cells[0], path, lineno, "station_id")
        t = _parse_float(cells[1], path, lineno, "t_hours")
        u = _parse_float(cells[2], path, lineno, "prb_usage")
        if station is None:
            station = sid
        elif sid != station:
            raise IngestionError(
                f"file mixes stations {station} and {sid}",
                path=path, line=lineno, column="station_id")
        if not np.isfinite(t):
            raise IngestionError("non-finite value", path=path, line=lineno,
                                 column="t_hours")
        if times and t <= times[-1]:
            raise IngestionError(
                f"time {t!r} does not increase past {times[-1]!r}",
                path=path, line=lineno, column="t_hours")
        if not np.isfinite(u) or u < 0 or u > 100:
            raise IngestionError(f"usage {u!r} outside [0, 100]",
                                 path=path, line=lineno, column="prb_usage")
        times.append(t)
        usage.append(u)
    if not times:
        raise IngestionError("file contains no samples", path=path)
    return TrafficSeries(station_id=station, times=np.asarray(times),
                         usage=np.asarray(usage))


# ------------------------------------------------ round history, predictions

HISTORY_HEADERS = ["round", "objective", "consensus_gap", "theta_step",
                   "z_step", "secure_err", "grad_evals", "value_evals",
                   "wall_ms", "participants", "warning"]


def write_history_csv(path: str, records, *, comments=(), include_timings=False):
    """Per-round trace. wall_ms is written as 0 unless include_timings, so the
    emitted bytes are a pure function of (config, seed)."""
    lines = list(comments)
    lines.append(",".join(HISTORY_HEADERS))
    for r in records:
        wall = r.wall_ms if include_timings else 0.0
        parts = "|".join(str(i) for i in r.participants)
        lines.append(",".join([
            str(r.round), _fmt(r.objective), _fmt(r.consensus_gap),
            _fmt(r.theta_step), _fmt(r.z_step), _fmt(r.secure_err),
            str(r.grad_evals), str(r.value_evals), _fmt(wall), parts,
            r.warning.replace(",", ";")]))
    _write_lines(path, lines)


def write_predictions_csv(path: str, times, mean, std, *, comments=(),
                          truth=None):
    """Forecast table with a 95% band (mean +/- 1.96 std) for plotting."""
    times = np.asarray(times, dtype=float)
    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    headers = ["t", "mean", "std", "lo95", "hi95"]
    cols = [times, mean, std, mean - 1.96 * std, mean + 1.96 * std]
    if truth is not None:
        headers.append("truth")
        cols.append(np.asarray(truth, dtype=float))
    write_table_csv(path, headers, cols, comments=comments)


# ------------------------------------------------------------------ metrics

def write_metrics_json(path: str, metrics: dict, *, config_sha256: str,
                       seed: int):
    """Summary metrics as canonical JSON stamped with config hash and seed."""
    payload = dict(metrics)
    payload["_config_sha256"] = config_sha256
    payload["_seed"] = int(seed)
    _ensure_dir(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_metrics_json(path: str) -> dict:
    if not os.path.exists(path):
        raise IngestionError("file does not exist", path=path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise IngestionError(f"invalid JSON: {e}", path=path,
                             line=e.lineno) from None
