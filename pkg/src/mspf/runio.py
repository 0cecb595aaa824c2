"""Delimited on-disk layout for simulation and filter artifacts.

One directory per run. Simulation runs hold states_scale{l}.csv,
measurements_scale{l}.csv, indicators.csv and metadata.json; filter runs
hold estimates_scale{l}.csv, indicators_est.csv, ess.csv, metadata.json and,
when snapshots were recorded, a snapshots/ tree of .npy arrays. The ``t``
column is the 1-based step number at that scale. Floats are written with
repr so loads reproduce the arrays bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .types import (
    FilterOutput,
    GroundTruth,
    Measurements,
    RegimeSchedule,
    ScaleSystemConfig,
)

__all__ = [
    "save_ground_truth",
    "load_ground_truth",
    "load_measurements",
    "load_schedule",
    "save_filter_output",
    "load_filter_output",
]


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_scale_csv(path: Path, array: np.ndarray) -> None:
    """(D, steps, n) array as individual,t,dim_0..dim_{n-1} rows."""
    dims = array.shape[2]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["individual", "t", *(f"dim_{n}" for n in range(dims))])
        for d in range(array.shape[0]):
            for t in range(array.shape[1]):
                writer.writerow([d, t + 1, *(_fmt(v) for v in array[d, t])])


def _read_scale_csv(path: Path, shape: tuple[int, int, int]) -> np.ndarray:
    out = np.full(shape, np.nan)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    expected_cols = 2 + shape[2]
    for row in rows[1:]:
        if len(row) != expected_cols:
            raise ValueError(f"{path}: row has {len(row)} columns, expected {expected_cols}")
        d, t = int(row[0]), int(row[1])
        if not (0 <= d < shape[0] and 1 <= t <= shape[1]):
            raise ValueError(f"{path}: row ({d}, {t}) outside shape {shape[:2]}")
        out[d, t - 1] = [float(v) for v in row[2:]]
    if np.isnan(out).any():
        raise ValueError(f"{path}: missing rows for shape {shape}")
    return out


def _structure_metadata(cfg: ScaleSystemConfig) -> dict:
    return {
        "num_scales": cfg.num_scales,
        "num_individuals": cfg.num_individuals,
        "state_dims": list(cfg.state_dims),
        "horizons": list(cfg.horizons),
        "num_models": cfg.num_models,
        "adjacency": [a.tolist() for a in cfg.adjacency],
        "interaction": cfg.interaction.tolist(),
        "seed": cfg.seed,
    }


def _write_metadata(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _scale_steps(cfg: ScaleSystemConfig) -> list[int]:
    steps = []
    for l in range(cfg.num_scales):
        total = 1
        for h in cfg.horizons[l:]:
            total *= h
        steps.append(total)
    return steps


def save_ground_truth(
    truth: GroundTruth,
    cfg: ScaleSystemConfig,
    out_dir: str | Path,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for l, (states, meas) in enumerate(zip(truth.states, truth.measurements)):
        _write_scale_csv(out / f"states_scale{l}.csv", states)
        _write_scale_csv(out / f"measurements_scale{l}.csv", meas)
    with open(out / "indicators.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["individual", "t", "model"])
        for d in range(truth.indicators.shape[0]):
            for t in range(truth.indicators.shape[1]):
                writer.writerow([d, t + 1, int(truth.indicators[d, t])])
    _write_metadata(out / "metadata.json", {"kind": "simulate", **_structure_metadata(cfg)})


def load_ground_truth(data_dir: str | Path, cfg: ScaleSystemConfig) -> GroundTruth:
    data = Path(data_dir)
    steps = _scale_steps(cfg)
    states, meas = [], []
    for l in range(cfg.num_scales):
        shape = (cfg.num_individuals, steps[l], cfg.state_dims[l])
        states.append(_read_scale_csv(data / f"states_scale{l}.csv", shape))
        meas.append(_read_scale_csv(data / f"measurements_scale{l}.csv", shape))
    indicators = _read_indicator_csv(
        data / "indicators.csv", (cfg.num_individuals, cfg.horizons[-1]), "model"
    )
    return GroundTruth(
        states=tuple(states), measurements=tuple(meas), indicators=indicators
    )


def load_measurements(data_dir: str | Path, cfg: ScaleSystemConfig) -> Measurements:
    """Measurement CSVs from a simulation run directory, validated against cfg."""
    data = Path(data_dir)
    steps = _scale_steps(cfg)
    scales = []
    for l in range(cfg.num_scales):
        shape = (cfg.num_individuals, steps[l], cfg.state_dims[l])
        scales.append(_read_scale_csv(data / f"measurements_scale{l}.csv", shape))
    return Measurements(scales=tuple(scales))


def _read_indicator_csv(path: Path, shape: tuple[int, int], column: str) -> np.ndarray:
    out = np.full(shape, -1, dtype=np.int64)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    idx = header.index(column)
    for row in rows[1:]:
        d, t = int(row[0]), int(row[1])
        if not (0 <= d < shape[0] and 1 <= t <= shape[1]):
            raise ValueError(f"{path}: row ({d}, {t}) outside shape {shape}")
        out[d, t - 1] = int(row[idx])
    if (out < 0).any():
        raise ValueError(f"{path}: missing rows for shape {shape}")
    return out


def load_schedule(data_dir: str | Path, cfg: ScaleSystemConfig) -> RegimeSchedule:
    models = _read_indicator_csv(
        Path(data_dir) / "indicators.csv",
        (cfg.num_individuals, cfg.horizons[-1]),
        "model",
    )
    return RegimeSchedule(models=models)


def save_filter_output(
    out_data: FilterOutput,
    cfg: ScaleSystemConfig,
    out_dir: str | Path,
    extra_metadata: dict | None = None,
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for l, est in enumerate(out_data.state_estimates):
        _write_scale_csv(out / f"estimates_scale{l}.csv", est)

    num_models = out_data.indicator_freqs.shape[2]
    with open(out / "indicators_est.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["individual", "t", "map_model", *(f"freq_{m}" for m in range(num_models))]
        )
        for d in range(out_data.indicator_map.shape[0]):
            for t in range(out_data.indicator_map.shape[1]):
                writer.writerow(
                    [
                        d,
                        t + 1,
                        int(out_data.indicator_map[d, t]),
                        *(_fmt(v) for v in out_data.indicator_freqs[d, t]),
                    ]
                )

    with open(out / "ess.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scale", "individual", "t", "ess"])
        for l, trace in enumerate(out_data.ess_trace):
            for d in range(trace.shape[0]):
                for t in range(trace.shape[1]):
                    writer.writerow([l, d, t + 1, _fmt(trace[d, t])])

    if out_data.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for (d, step), (states, logw) in sorted(out_data.snapshots.items()):
            np.save(snap_dir / f"d{d}_t{step:04d}_states.npy", states)
            np.save(snap_dir / f"d{d}_t{step:04d}_logweights.npy", logw)

    payload = {"kind": "filter", **_structure_metadata(cfg)}
    if extra_metadata:
        payload.update(extra_metadata)
    _write_metadata(out / "metadata.json", payload)


def load_filter_output(data_dir: str | Path, cfg: ScaleSystemConfig) -> FilterOutput:
    data = Path(data_dir)
    steps = _scale_steps(cfg)
    estimates = []
    for l in range(cfg.num_scales):
        shape = (cfg.num_individuals, steps[l], cfg.state_dims[l])
        estimates.append(_read_scale_csv(data / f"estimates_scale{l}.csv", shape))

    shape_ind = (cfg.num_individuals, cfg.horizons[-1])
    indicator_map = _read_indicator_csv(data / "indicators_est.csv", shape_ind, "map_model")
    freqs = np.zeros((*shape_ind, cfg.num_models))
    with open(data / "indicators_est.csv", "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        freqs[int(row[0]), int(row[1]) - 1] = [float(v) for v in row[3:]]

    ess = [np.zeros((cfg.num_individuals, steps[l])) for l in range(cfg.num_scales)]
    with open(data / "ess.csv", "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    for row in rows[1:]:
        ess[int(row[0])][int(row[1]), int(row[2]) - 1] = float(row[3])

    snapshots = None
    snap_dir = data / "snapshots"
    if snap_dir.is_dir():
        snapshots = {}
        for states_path in sorted(snap_dir.glob("d*_t*_states.npy")):
            stem = states_path.stem
            d = int(stem.split("_")[0][1:])
            step = int(stem.split("_")[1][1:])
            logw_path = snap_dir / f"d{d}_t{step:04d}_logweights.npy"
            snapshots[(d, step)] = (np.load(states_path), np.load(logw_path))

    return FilterOutput(
        state_estimates=tuple(estimates),
        indicator_map=indicator_map,
        indicator_freqs=freqs,
        ess_trace=tuple(ess),
        snapshots=snapshots,
    )
