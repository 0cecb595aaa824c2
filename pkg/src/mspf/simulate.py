"""Ground-truth simulation of the multiscale switching system.

One coarsest-scale step consists of a full window of the scale below (which
itself nests windows of any finer scales), followed by the coarse update
that consumes the completed window's weighted time average. Measurements
are emitted at every step of every scale. The regime schedule drives which
coarse model is applied; nothing about the schedule is random.
"""

from __future__ import annotations

import numpy as np

from .dynamics import coarse_transition, fine_transition, measure
from .kernels import StreamPurpose, derive_rng, sample_gaussian
from .types import (
    GroundTruth,
    InvalidConfigError,
    RegimeSchedule,
    ScaleSystemConfig,
    steps_per_scale,
    validate_config,
)

__all__ = [
    "simulate",
    "thirds_schedule",
    "build_sim1_schedule",
    "build_sim2_schedule",
    "SIM2_THIRDS",
]

# Per-individual regime model for each third of the coarse horizon in the
# second study; individuals beyond the sixth cycle through these rows.
SIM2_THIRDS: tuple[tuple[int, int, int], ...] = (
    (1, 0, 1),
    (0, 1, 0),
    (0, 1, 1),
    (1, 1, 0),
    (0, 0, 1),
    (1, 0, 0),
)


def thirds_schedule(rows: np.ndarray, num_steps: int) -> RegimeSchedule:
    """Expand per-individual (first, middle, final) model triples to a schedule.

    The first two segments each span floor(num_steps / 3) steps; the final
    segment absorbs the remainder. With 100 steps the boundaries fall after
    steps 33 and 66, i.e. switches take effect at steps 34 and 67.
    """
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 2 or rows.shape[1] != 3:
        raise ValueError(f"expected (D, 3) model triples, got shape {rows.shape}")
    third = num_steps // 3
    lengths = (third, third, num_steps - 2 * third)
    models = np.empty((rows.shape[0], num_steps), dtype=np.int64)
    for d in range(rows.shape[0]):
        models[d] = np.repeat(rows[d], lengths)
    return RegimeSchedule(models=models)


def build_sim1_schedule(num_steps: int, num_individuals: int = 6) -> RegimeSchedule:
    """First-study schedule: every individual runs models 0, 1, 0 by thirds."""
    rows = np.tile([0, 1, 0], (num_individuals, 1))
    return thirds_schedule(rows, num_steps)


def build_sim2_schedule(num_steps: int, num_individuals: int = 6) -> RegimeSchedule:
    """Second-study schedule: the per-individual thirds patterns of SIM2_THIRDS."""
    rows = np.array(
        [SIM2_THIRDS[d % len(SIM2_THIRDS)] for d in range(num_individuals)]
    )
    return thirds_schedule(rows, num_steps)


def switch_times(schedule: RegimeSchedule, individual: int) -> list[int]:
    """1-based steps at which the true model changes for one individual."""
    row = schedule.models[individual]
    return [int(t) + 1 for t in np.nonzero(row[1:] != row[:-1])[0] + 1]


def simulate(cfg: ScaleSystemConfig, schedule: RegimeSchedule) -> GroundTruth:
    """Run the generative model forward and record states and measurements.

    Deterministic in (cfg, schedule): every noise draw comes from a stream
    keyed by (seed, purpose, individual, scale, step).
    """
    violations = validate_config(cfg)
    if violations:
        raise InvalidConfigError(violations)
    L, D = cfg.num_scales, cfg.num_individuals
    steps = steps_per_scale(cfg)
    if schedule.models.shape != (D, steps[-1]):
        raise ValueError(
            f"schedule shape {schedule.models.shape} does not match "
            f"({D}, {steps[-1]}) individuals x coarse steps"
        )
    if schedule.models.min(initial=0) < 0 or schedule.models.max(initial=0) >= cfg.num_models:
        raise ValueError("schedule references a model index outside [0, num_models)")

    states = [np.empty((D, steps[l], cfg.state_dims[l])) for l in range(L)]
    meas = [np.empty_like(states[l]) for l in range(L)]
    # Current state per (scale, individual); everything starts at the
    # individual's initial value, broadcast across dimensions and scales.
    x = [
        np.tile(cfg.initial_states[:, None], (1, cfg.state_dims[l])).astype(float)
        for l in range(L)
    ]
    buffers = [np.empty((D, cfg.horizons[l], cfg.state_dims[l])) for l in range(L - 1)]
    counters = [0] * L
    seed = cfg.seed

    def advance(l: int) -> None:
        # One full window (horizons[l] steps) of scale l, recursing into the
        # finer scale before each own step so its window is complete.
        for _ in range(cfg.horizons[l]):
            if l > 0:
                advance(l - 1)
            counters[l] += 1
            t = counters[l]
            if l == L - 1:
                prev_all = x[l].copy()  # neighbor terms read pre-update states
                for d in range(D):
                    m = schedule.model_at(d, t)
                    window = buffers[l - 1][d] if l > 0 else None
                    drift = coarse_transition(m, x[l][d], window, prev_all, d, cfg)
                    rng = derive_rng(seed, StreamPurpose.SIM_PROCESS, d, l, t)
                    x[l][d] = sample_gaussian(drift, cfg.process_noise[d][l], rng)
                    states[l][d, t - 1] = x[l][d]
                    rng = derive_rng(seed, StreamPurpose.SIM_MEASUREMENT, d, l, t)
                    meas[l][d, t - 1] = measure(x[l][d], d, l, cfg, rng)
            else:
                for d in range(D):
                    drift = fine_transition(x[l][d], x[l + 1][d], cfg, scale=l)
                    rng = derive_rng(seed, StreamPurpose.SIM_PROCESS, d, l, t)
                    x[l][d] = sample_gaussian(drift, cfg.process_noise[d][l], rng)
                    buffers[l][d, (t - 1) % cfg.horizons[l]] = x[l][d]
                    states[l][d, t - 1] = x[l][d]
                    rng = derive_rng(seed, StreamPurpose.SIM_MEASUREMENT, d, l, t)
                    meas[l][d, t - 1] = measure(x[l][d], d, l, cfg, rng)

    advance(L - 1)
    return GroundTruth(
        states=tuple(states),
        measurements=tuple(meas),
        indicators=np.array(schedule.models),
    )
