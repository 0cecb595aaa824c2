"""Accuracy metrics for filter runs and their delimited report files.

All metrics compare a FilterOutput to the GroundTruth that produced its
measurements. Report files round-trip: ``load_report`` re-parses exactly
what ``emit_report`` wrote.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .types import EvalReport, FilterOutput, GroundTruth

__all__ = [
    "DEFAULT_BURN_IN",
    "coarse_rmse",
    "fine_rmse_per_window",
    "indicator_metrics",
    "evaluate_run",
    "emit_report",
    "load_report",
]

DEFAULT_BURN_IN = 5


def _check_same_shape(est: np.ndarray, tru: np.ndarray, label: str) -> None:
    if est.shape != tru.shape:
        raise ValueError(
            f"{label}: estimates shape {est.shape} != truth shape {tru.shape}"
        )


def coarse_rmse(truth: GroundTruth, out: FilterOutput) -> np.ndarray:
    """Per-individual, per-dimension RMSE at the coarsest scale, shape (D, N)."""
    est = np.asarray(out.state_estimates[-1], dtype=float)
    tru = np.asarray(truth.states[-1], dtype=float)
    _check_same_shape(est, tru, "coarse_rmse")
    return np.sqrt(((est - tru) ** 2).mean(axis=1))


def fine_rmse_per_window(truth: GroundTruth, out: FilterOutput) -> np.ndarray:
    """Finest-scale RMSE averaged within each coarse window, shape (D, T_L, N).

    The window length is inferred from the array shapes; requires at least
    two scales and an exact nesting of fine steps into coarse steps.
    """
    if len(truth.states) < 2:
        raise ValueError("fine_rmse_per_window needs at least two scales")
    est = np.asarray(out.state_estimates[0], dtype=float)
    tru = np.asarray(truth.states[0], dtype=float)
    _check_same_shape(est, tru, "fine_rmse_per_window")
    num_coarse = truth.states[-1].shape[1]
    steps, dims = est.shape[1], est.shape[2]
    if num_coarse <= 0 or steps % num_coarse:
        raise ValueError(
            f"{steps} fine steps do not nest into {num_coarse} coarse steps"
        )
    window = steps // num_coarse
    sq = ((est - tru) ** 2).reshape(est.shape[0], num_coarse, window, dims)
    return np.sqrt(sq.mean(axis=2))


def indicator_metrics(
    truth: GroundTruth, out: FilterOutput, burn_in: int = DEFAULT_BURN_IN
) -> tuple[np.ndarray, tuple[tuple[tuple[int, float], ...], ...]]:
    """MAP-indicator accuracy per individual and per-switch detection delays.

    Accuracy counts coarse steps after the first ``burn_in``. A delay is the
    number of coarse steps between a true regime switch and the first MAP
    match within that regime segment, ``inf`` if it never matches before the
    next switch. Switch steps in the result are 1-based.
    """
    true_models = np.asarray(truth.indicators)
    est = np.asarray(out.indicator_map)
    _check_same_shape(est, true_models, "indicator_metrics")
    num_steps = true_models.shape[1]
    if not 0 <= burn_in < num_steps:
        raise ValueError(f"burn_in {burn_in} outside [0, {num_steps})")

    accuracy = (est[:, burn_in:] == true_models[:, burn_in:]).mean(axis=1)

    delays = []
    for d in range(true_models.shape[0]):
        row = true_models[d]
        changes = np.nonzero(np.diff(row))[0] + 1
        bounds = np.concatenate([changes, [num_steps]])
        per_switch = []
        for k, start in enumerate(changes):
            segment = est[d, start : bounds[k + 1]]
            hits = np.nonzero(segment == row[start])[0]
            delay = float(hits[0]) if hits.size else float("inf")
            per_switch.append((int(start) + 1, delay))
        delays.append(tuple(per_switch))
    return accuracy, tuple(delays)


def evaluate_run(
    truth: GroundTruth, out: FilterOutput, burn_in: int = DEFAULT_BURN_IN
) -> EvalReport:
    """Bundle every metric for one run; fine RMSE is None for single-scale systems."""
    accuracy, delays = indicator_metrics(truth, out, burn_in)
    accuracy_full, _ = indicator_metrics(truth, out, 0)
    return EvalReport(
        coarse_rmse=coarse_rmse(truth, out),
        fine_rmse=fine_rmse_per_window(truth, out) if len(truth.states) > 1 else None,
        indicator_accuracy=accuracy,
        indicator_accuracy_full=accuracy_full,
        switch_delays=delays,
        burn_in=burn_in,
    )


def _write_rows(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value: float) -> str:
    # repr round-trips exactly through float(), keeping emitted files
    # deterministic and loss-free
    return repr(float(value))


def emit_report(report: EvalReport, out_dir: str | Path) -> None:
    """Write the report's tables and a min/mean/max summary under ``out_dir``.

    Files: coarse_rmse.csv (row per individual, column per dimension),
    fine_rmse.csv (individual, window, dims; only when fine metrics exist),
    indicator_accuracy.csv, switch_delays.csv and summary.txt.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dims = report.coarse_rmse.shape[1]
    dim_cols = [f"dim_{n}" for n in range(dims)]

    _write_rows(
        out / "coarse_rmse.csv",
        ["individual", *dim_cols],
        (
            [d, *(_fmt(v) for v in row)]
            for d, row in enumerate(report.coarse_rmse)
        ),
    )

    if report.fine_rmse is not None:
        _write_rows(
            out / "fine_rmse.csv",
            ["individual", "window", *dim_cols],
            (
                [d, w + 1, *(_fmt(v) for v in report.fine_rmse[d, w])]
                for d in range(report.fine_rmse.shape[0])
                for w in range(report.fine_rmse.shape[1])
            ),
        )

    _write_rows(
        out / "indicator_accuracy.csv",
        ["individual", "accuracy_post_burn_in", "accuracy_full"],
        (
            [d, _fmt(report.indicator_accuracy[d]), _fmt(report.indicator_accuracy_full[d])]
            for d in range(report.indicator_accuracy.shape[0])
        ),
    )

    _write_rows(
        out / "switch_delays.csv",
        ["individual", "switch_step", "delay"],
        (
            [d, step, _fmt(delay)]
            for d, pairs in enumerate(report.switch_delays)
            for step, delay in pairs
        ),
    )

    lines = [f"burn_in {report.burn_in}"]
    blocks = [("coarse", report.coarse_rmse)]
    if report.fine_rmse is not None:
        blocks.append(("fine", report.fine_rmse))
    for label, values in blocks:
        lines.append(
            f"{label} rmse min {_fmt(values.min())} "
            f"mean {_fmt(values.mean())} max {_fmt(values.max())}"
        )
    (out / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_report(out_dir: str | Path) -> EvalReport:
    """Re-parse an emitted report directory into an EvalReport."""
    out = Path(out_dir)

    def read(name: str) -> list[list[str]]:
        with open(out / name, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        return rows[1:]

    coarse_rows = read("coarse_rmse.csv")
    coarse = np.array([[float(v) for v in row[1:]] for row in coarse_rows])

    fine = None
    if (out / "fine_rmse.csv").exists():
        fine_rows = read("fine_rmse.csv")
        num_ind = coarse.shape[0]
        windows = len(fine_rows) // num_ind
        fine = np.array([[float(v) for v in row[2:]] for row in fine_rows])
        fine = fine.reshape(num_ind, windows, -1)

    acc_rows = read("indicator_accuracy.csv")
    accuracy = np.array([float(r[1]) for r in acc_rows])
    accuracy_full = np.array([float(r[2]) for r in acc_rows])

    delay_rows = read("switch_delays.csv")
    per_ind: dict[int, list[tuple[int, float]]] = {d: [] for d in range(coarse.shape[0])}
    for row in delay_rows:
        per_ind[int(row[0])].append((int(row[1]), float(row[2])))
    delays = tuple(tuple(per_ind[d]) for d in range(coarse.shape[0]))

    first = (out / "summary.txt").read_text(encoding="utf-8").splitlines()[0]
    burn_in = int(first.split()[1])
    return EvalReport(
        coarse_rmse=coarse,
        fine_rmse=fine,
        indicator_accuracy=accuracy,
        indicator_accuracy_full=accuracy_full,
        switch_delays=delays,
        burn_in=burn_in,
    )
