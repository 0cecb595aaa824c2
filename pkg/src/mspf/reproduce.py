"""One-shot study driver: simulate, filter and evaluate across seeds.

Each study fixes the system (structure matrices, schedules, noise levels)
and varies only the run seed, then aggregates per-individual metrics and
checks them against the published tracking-quality bands. Artifacts land
under a single output directory: per-seed run folders, aggregate tables,
plot-ready long-format CSVs, rendered figures for the first seed, and an
acceptance.txt with one PASS/FAIL line per band.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configio import DEFAULT_SEED, build_sim1, build_sim2
from .evaluate import DEFAULT_BURN_IN, emit_report, evaluate_run
from .filtering import FilterConfig, run_filter
from .plots import save_indicator_figure, save_state_figure
from .runio import save_filter_output, save_ground_truth
from .simulate import simulate
from .types import EvalReport, FilterOutput, GroundTruth

__all__ = ["BandCheck", "StudyResult", "run_study", "STUDY_BUILDERS"]

STUDY_BUILDERS = {"sim1": build_sim1, "sim2": build_sim2}

# Tracking-quality bands per study: every per-(individual, dimension) mean
# coarse RMSE must land inside the interval, per-individual MAP accuracy
# (after burn-in) must clear the floor.
RMSE_BANDS = {"sim1": (0.05, 0.30), "sim2": (0.05, 0.32)}
ACCURACY_FLOORS = {"sim1": 0.90, "sim2": 0.85}
MEAN_ACCURACY_FLOOR = 0.90
MAX_MEDIAN_DELAY = 2.0
FINE_CELL_LIMIT = 0.25
FINE_CELL_FRACTION = 0.95


@dataclass(frozen=True)
class BandCheck:
    """One aggregate statistic against its admissible bounds."""

    name: str
    value: float
    low: float | None
    high: float | None
    passed: bool

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        bounds = []
        if self.low is not None:
            bounds.append(f">= {self.low}")
        if self.high is not None:
            bounds.append(f"<= {self.high}")
        return f"{verdict} {self.name} value {self.value:.6g} bounds {' and '.join(bounds)}"


@dataclass(frozen=True)
class StudyResult:
    which: str
    seeds: tuple[int, ...]
    reports: tuple[EvalReport, ...]
    mean_coarse_rmse: np.ndarray
    mean_accuracy: np.ndarray
    mean_accuracy_full: np.ndarray
    median_switch_delay: float
    fine_below_fraction: float | None
    bands: tuple[BandCheck, ...]

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.bands)


def _run_one(
    which: str,
    seed: int,
    particles: int,
    burn_in: int,
    degenerate_policy: str,
    structure_seed: int | None,
    out_root: str | None,
    keep_arrays: bool,
) -> tuple[EvalReport, GroundTruth | None, FilterOutput | None]:
    cfg, schedule = STUDY_BUILDERS[which](seed=seed, structure_seed=structure_seed)
    truth = simulate(cfg, schedule)
    fcfg = FilterConfig(
        num_particles=particles, seed=seed, degenerate_policy=degenerate_policy
    )
    out = run_filter(cfg, fcfg, truth.measurements_view())
    report = evaluate_run(truth, out, burn_in)
    if out_root is not None:
        seed_dir = Path(out_root) / f"seed_{seed}"
        save_ground_truth(truth, cfg, seed_dir / "truth")
        save_filter_output(
            out,
            cfg,
            seed_dir / "filter",
            extra_metadata={"num_particles": particles, "filter_seed": seed},
        )
        emit_report(report, seed_dir / "report")
    return report, (truth if keep_arrays else None), (out if keep_arrays else None)


def _worker_count(num_seeds: int, workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    cap = os.environ.get("MSPF_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(num_seeds, limit))


def _check_bands(
    which: str,
    mean_rmse: np.ndarray,
    mean_acc: np.ndarray,
    median_delay: float,
    fine_fraction: float | None,
) -> tuple[BandCheck, ...]:
    low, high = RMSE_BANDS[which]
    floor = ACCURACY_FLOORS[which]
    checks = [
        BandCheck(
            "coarse-rmse-cell-min",
            float(mean_rmse.min()),
            low,
            None,
            bool(mean_rmse.min() >= low),
        ),
        BandCheck(
            "coarse-rmse-cell-max",
            float(mean_rmse.max()),
            None,
            high,
            bool(mean_rmse.max() <= high),
        ),
        BandCheck(
            "indicator-accuracy-min",
            float(mean_acc.min()),
            floor,
            None,
            bool(mean_acc.min() >= floor),
        ),
    ]
    if which == "sim1":
        checks.append(
            BandCheck(
                "switch-delay-median",
                float(median_delay),
                None,
                MAX_MEDIAN_DELAY,
                bool(median_delay <= MAX_MEDIAN_DELAY),
            )
        )
    if which == "sim2":
        checks.append(
            BandCheck(
                "indicator-accuracy-mean",
                float(mean_acc.mean()),
                MEAN_ACCURACY_FLOOR,
                None,
                bool(mean_acc.mean() >= MEAN_ACCURACY_FLOOR),
            )
        )
    if which == "sim1" and fine_fraction is not None:
        checks.append(
            BandCheck(
                "fine-window-rmse-fraction",
                float(fine_fraction),
                FINE_CELL_FRACTION,
                None,
                bool(fine_fraction >= FINE_CELL_FRACTION),
            )
        )
    return tuple(checks)


def _write_aggregates(
    out_dir: Path, result: StudyResult, truth: GroundTruth, output: FilterOutput
) -> None:
    dims = result.mean_coarse_rmse.shape[1]
    with open(out_dir / "aggregate_coarse_rmse.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["individual", *(f"dim_{n}" for n in range(dims))])
        for d, row in enumerate(result.mean_coarse_rmse):
            writer.writerow([d, *(repr(float(v)) for v in row)])

    with open(out_dir / "aggregate_accuracy.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["individual", "accuracy_post_burn_in", "accuracy_full"])
        for d in range(result.mean_accuracy.shape[0]):
            writer.writerow(
                [
                    d,
                    repr(float(result.mean_accuracy[d])),
                    repr(float(result.mean_accuracy_full[d])),
                ]
            )

    (out_dir / "acceptance.txt").write_text(
        "\n".join(b.line() for b in result.bands) + "\n", encoding="utf-8"
    )

    # plot-ready long formats for the first seed
    with open(out_dir / "states_long.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["individual", "scale", "t", "dim", "truth", "estimate"])
        for l, (tru, est) in enumerate(zip(truth.states, output.state_estimates)):
            for d in range(tru.shape[0]):
                for t in range(tru.shape[1]):
                    for n in range(tru.shape[2]):
                        writer.writerow(
                            [d, l, t + 1, n, repr(float(tru[d, t, n])), repr(float(est[d, t, n]))]
                        )

    num_models = output.indicator_freqs.shape[2]
    with open(out_dir / "indicators_long.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["individual", "t", "true_model", "map_model", *(f"freq_{m}" for m in range(num_models))]
        )
        for d in range(truth.indicators.shape[0]):
            for t in range(truth.indicators.shape[1]):
                writer.writerow(
                    [
                        d,
                        t + 1,
                        int(truth.indicators[d, t]),
                        int(output.indicator_map[d, t]),
                        *(repr(float(v)) for v in output.indicator_freqs[d, t]),
                    ]
                )

    save_state_figure(truth, output, len(truth.states) - 1, out_dir / "states_coarse.png")
    save_indicator_figure(truth, output, out_dir / "indicators.png")


def run_study(
    which: str,
    num_seeds: int = 5,
    seed_base: int = DEFAULT_SEED,
    particles: int = 1000,
    burn_in: int = DEFAULT_BURN_IN,
    out_dir: str | Path | None = None,
    degenerate_policy: str = "uniform",
    workers: int | None = None,
    structure_seed: int | None = None,
) -> StudyResult:
    """Run one study end to end and evaluate its acceptance bands.

    Seeds are ``seed_base .. seed_base + num_seeds - 1``; each drives one
    simulation plus one filter run at ``particles`` particles. Worker count
    is capped by MSPF_THREADS (results are identical regardless of
    scheduling). With ``out_dir`` unset, nothing is written.
    """
    if which not in STUDY_BUILDERS:
        raise ValueError(f"unknown study {which!r}, expected one of {sorted(STUDY_BUILDERS)}")
    if num_seeds < 1:
        raise ValueError("num_seeds must be at least 1")
    seeds = tuple(seed_base + i for i in range(num_seeds))
    out_root = None
    if out_dir is not None:
        out_root = Path(out_dir)
        out_root.mkdir(parents=True, exist_ok=True)

    jobs = [
        (
            which,
            seed,
            particles,
            burn_in,
            degenerate_policy,
            structure_seed,
            str(out_root) if out_root else None,
            i == 0,
        )
        for i, seed in enumerate(seeds)
    ]
    count = _worker_count(num_seeds, workers)
    if count > 1:
        with ProcessPoolExecutor(max_workers=count) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*job) for job in jobs]

    reports = tuple(r[0] for r in results)
    first_truth, first_output = results[0][1], results[0][2]

    mean_rmse = np.mean([r.coarse_rmse for r in reports], axis=0)
    mean_acc = np.mean([r.indicator_accuracy for r in reports], axis=0)
    mean_acc_full = np.mean([r.indicator_accuracy_full for r in reports], axis=0)
    delays = [
        delay
        for r in reports
        for pairs in r.switch_delays
        for _, delay in pairs
    ]
    median_delay = float(np.median(delays)) if delays else 0.0
    fine_fraction = None
    if reports[0].fine_rmse is not None:
        cells = np.concatenate([r.fine_rmse.ravel() for r in reports])
        fine_fraction = float((cells < FINE_CELL_LIMIT).mean())

    result = StudyResult(
        which=which,
        seeds=seeds,
        reports=reports,
        mean_coarse_rmse=mean_rmse,
        mean_accuracy=mean_acc,
        mean_accuracy_full=mean_acc_full,
        median_switch_delay=median_delay,
        fine_below_fraction=fine_fraction,
        bands=_check_bands(which, mean_rmse, mean_acc, median_delay, fine_fraction),
    )
    if out_root is not None:
        _write_aggregates(out_root, result, first_truth, first_output)
    return result
