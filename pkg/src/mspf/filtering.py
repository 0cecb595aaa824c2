"""Nested particle filter with Dirichlet-categorical regime inference.

One coarsest-scale filter step per individual consists of:

1. a full window of fine-scale steps (propagate through the fine drift,
   weight by the fine measurement likelihood, systematic-resample every
   step, carrying complete particle records through each resample);
2. per particle, a model-probability draw from the Dirichlet posterior
   (prior parameters plus that particle's accumulated selection counts);
3. per particle and per model, a candidate next coarse state drawn from
   the transition; the regime indicator is sampled from
   prior x transition density x measurement likelihood over models, and a
   fresh coarse state is then re-drawn under the selected model;
4. a weight update by the coarse measurement likelihood, estimate
   extraction (weighted means before resampling), and a final resample.

Neighbor coupling uses a mean-field approximation: the coarse drift of one
individual reads the previous step's weighted-mean estimates of the others,
never their particle clouds. State estimates, indicator frequencies and
effective sample sizes are recorded from the normalized weights before each
resampling step.

Everything is deterministic given (config, filter config, measurements):
every draw comes from a stream keyed by seed, purpose, individual, scale
and step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .dynamics import coarse_transition, fine_transition, measurement_matrix
from .kernels import (
    DegenerateWeightsError,
    StreamPurpose,
    cholesky_factor,
    derive_rng,
    effective_sample_size,
    normalize_log_weights,
    sample_categorical,
    sample_categorical_rows,
    sample_dirichlet,
    sample_dirichlet_rows,
    systematic_resample,
)
from .types import (
    FilterOutput,
    InvalidConfigError,
    Measurements,
    Particle,
    ScaleSystemConfig,
    steps_per_scale,
    validate_config,
)

__all__ = [
    "FilterConfig",
    "ParticleCloud",
    "ShapeMismatchError",
    "init_particles",
    "fine_step",
    "sample_model_probabilities",
    "sample_indicator",
    "coarse_step",
    "run_filter",
]

logger = logging.getLogger("mspf")

_LOG_2PI = float(np.log(2.0 * np.pi))

DEGENERATE_POLICIES = ("abort", "uniform")


class ShapeMismatchError(ValueError):
    """Measurements do not match the shapes the config implies."""


@dataclass(frozen=True)
class FilterConfig:
    """Runtime knobs of the particle filter.

    ``seed`` drives the filter's own streams (independent of the simulation
    streams even when numerically equal, via disjoint purpose tags).
    ``degenerate_policy`` picks what happens when every weight underflows:
    "abort" raises, "uniform" falls back to uniform weights with a warning.
    """

    num_particles: int = 1000
    seed: int = 0
    store_snapshots: bool = False
    degenerate_policy: str = "uniform"


@dataclass
class ParticleCloud:
    """All particles of one individual, as arrays over the particle axis.

    ``states[l]`` is (N, n_l); ``buffers[l]`` the current fine window at
    scale l, (N, T_l, n_l) with ``window_fill[l]`` rows valid; ``history``
    (N, T_coarse) holds selected model indices (-1 where not yet filled),
    ``counts`` (N, M) their running tallies. Resampling carries every field.
    """

    states: list[np.ndarray]
    buffers: list[np.ndarray]
    window_fill: list[int]
    history: np.ndarray
    history_len: int
    counts: np.ndarray
    log_weights: np.ndarray

    @property
    def num_particles(self) -> int:
        return self.log_weights.shape[0]

    def take(self, idx: np.ndarray) -> None:
        """Replace the cloud by the particles at ``idx`` (ancestor copy)."""
        self.states = [s[idx] for s in self.states]
        self.buffers = [b[idx] for b in self.buffers]
        self.history = self.history[idx]
        self.counts = self.counts[idx]
        self.log_weights = self.log_weights[idx]

    def particle(self, i: int) -> Particle:
        """Single-particle view (copies), mainly for tests and debugging."""
        return Particle(
            states=tuple(s[i].copy() for s in self.states),
            fine_trajectory=tuple(
                b[i, : self.window_fill[l]].copy() for l, b in enumerate(self.buffers)
            ),
            indicator_history=self.history[i, : self.history_len].copy(),
            model_counts=self.counts[i].copy(),
            log_weight=float(self.log_weights[i]),
        )


class _Scorer:
    """Gaussian log-likelihood of residuals, with the zero-covariance limit.

    A zero covariance is treated as a delta measure: log-likelihood 0 where
    the residual is exactly zero, -inf elsewhere. Anything else must be
    positive definite.
    """

    __slots__ = ("delta", "linv", "const")

    def __init__(self, cov: np.ndarray, name: str):
        cov = np.asarray(cov, dtype=float)
        if not np.any(cov):
            self.delta = True
            self.linv = None
            self.const = 0.0
            return
        self.delta = False
        chol = cholesky_factor(cov, name=name)
        n = cov.shape[0]
        self.linv = solve_triangular(chol, np.eye(n), lower=True)
        self.const = -0.5 * (n * _LOG_2PI + 2.0 * float(np.sum(np.log(np.diag(chol)))))

    def loglik(self, resid: np.ndarray) -> np.ndarray:
        resid = np.asarray(resid, dtype=float)
        if self.delta:
            return np.where(np.all(resid == 0.0, axis=-1), 0.0, -np.inf)
        z = resid @ self.linv.T
        return self.const - 0.5 * np.sum(z * z, axis=-1)


class _NoiseModel:
    """Sampler plus scorer for one (individual, scale) noise covariance."""

    __slots__ = ("chol", "scorer")

    def __init__(self, cov: np.ndarray, name: str):
        cov = np.asarray(cov, dtype=float)
        self.chol = None if not np.any(cov) else cholesky_factor(cov, name=name)
        self.scorer = _Scorer(cov, name)

    def sample(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        if self.chol is None:
            return np.zeros(shape)
        return rng.standard_normal(shape) @ self.chol.T


class _RunContext:
    """Precomputed factors shared across all filter steps of one run."""

    def __init__(self, cfg: ScaleSystemConfig, fcfg: FilterConfig):
        self.g = [
            measurement_matrix(cfg.measurement_rotation[l], cfg.state_dims[l])
            for l in range(cfg.num_scales)
        ]
        self.process = [
            [
                _NoiseModel(cfg.process_noise[d][l], f"process_noise[{d}][{l}]")
                for l in range(cfg.num_scales)
            ]
            for d in range(cfg.num_individuals)
        ]
        self.measurement = [
            [
                _Scorer(cfg.measurement_noise[d][l], f"measurement_noise[{d}][{l}]")
                for l in range(cfg.num_scales)
            ]
            for d in range(cfg.num_individuals)
        ]


def _check_filter_config(fcfg: FilterConfig) -> None:
    if fcfg.num_particles < 1:
        raise ValueError(f"num_particles must be >= 1, got {fcfg.num_particles}")
    if fcfg.num_particles == 1:
        logger.warning("running with a single particle: resampling is trivial")
    if fcfg.degenerate_policy not in DEGENERATE_POLICIES:
        raise ValueError(
            f"degenerate_policy must be one of {DEGENERATE_POLICIES}, "
            f"got {fcfg.degenerate_policy!r}"
        )
    if not (0 <= fcfg.seed < 2**64):
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {fcfg.seed}")


def _normalize(logw: np.ndarray, fcfg: FilterConfig, where: str) -> np.ndarray:
    """Normalized weights under the configured degenerate-weights policy."""
    try:
        probs, _ = normalize_log_weights(logw)
        return probs
    except DegenerateWeightsError:
        if fcfg.degenerate_policy == "abort":
            raise
        logger.warning("degenerate weights at %s; falling back to uniform", where)
        return np.full(logw.shape, 1.0 / logw.size)


def init_particles(cfg: ScaleSystemConfig, fcfg: FilterConfig) -> list[ParticleCloud]:
    """Fresh clouds, one per individual: exact initial states, uniform weights."""
    violations = validate_config(cfg)
    if violations:
        raise InvalidConfigError(violations)
    _check_filter_config(fcfg)
    n = fcfg.num_particles
    clouds = []
    for d in range(cfg.num_individuals):
        clouds.append(
            ParticleCloud(
                states=[
                    np.full((n, cfg.state_dims[l]), float(cfg.initial_states[d]))
                    for l in range(cfg.num_scales)
                ],
                buffers=[
                    np.zeros((n, cfg.horizons[l], cfg.state_dims[l]))
                    for l in range(cfg.num_scales - 1)
                ],
                window_fill=[0] * (cfg.num_scales - 1),
                history=np.full((n, cfg.horizons[-1]), -1, dtype=np.int64),
                history_len=0,
                counts=np.zeros((n, cfg.num_models), dtype=np.int64),
                log_weights=np.full(n, -np.log(n)),
            )
        )
    return clouds


def fine_step(
    cloud: ParticleCloud,
    individual: int,
    scale: int,
    step: int,
    measurement: np.ndarray,
    cfg: ScaleSystemConfig,
    fcfg: FilterConfig,
    ctx: _RunContext | None = None,
) -> tuple[np.ndarray, float]:
    """One fine-scale step: propagate, weight, record, resample.

    ``step`` is the 1-based global step count at this scale. Returns the
    weighted-mean state estimate and the effective sample size, both taken
    before resampling. The cloud is updated in place.
    """
    if ctx is None:
        ctx = _RunContext(cfg, fcfg)
    d = individual
    drift = fine_transition(cloud.states[scale], cloud.states[scale + 1], cfg, scale)
    rng = derive_rng(fcfg.seed, StreamPurpose.PF_FINE_PROCESS, d, scale, step)
    x_new = drift + ctx.process[d][scale].sample(rng, drift.shape)
    pos = (step - 1) % cfg.horizons[scale]
    cloud.buffers[scale][:, pos, :] = x_new
    cloud.window_fill[scale] = pos + 1
    cloud.states[scale] = x_new

    resid = np.asarray(measurement, dtype=float) - x_new @ ctx.g[scale].T
    logw = cloud.log_weights + ctx.measurement[d][scale].loglik(resid)
    probs = _normalize(logw, fcfg, f"individual {d}, scale {scale}, step {step}")
    estimate = probs @ x_new
    ess = effective_sample_size(probs)

    rng = derive_rng(fcfg.seed, StreamPurpose.PF_FINE_RESAMPLE, d, scale, step)
    cloud.take(systematic_resample(probs, cloud.num_particles, rng))
    cloud.log_weights = np.full(cloud.num_particles, -np.log(cloud.num_particles))
    return estimate, ess


def sample_model_probabilities(
    counts: np.ndarray, alpha: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One draw from the conjugate model-probability posterior Dir(alpha + counts)."""
    counts = np.asarray(counts, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if counts.shape != alpha.shape:
        raise ValueError(f"counts shape {counts.shape} != alpha shape {alpha.shape}")
    if np.any(counts < 0):
        raise ValueError("model counts must be non-negative")
    return sample_dirichlet(alpha + counts, rng)


def sample_indicator(
    particle: Particle,
    fine_window: np.ndarray | None,
    others_prev: np.ndarray,
    measurement: np.ndarray,
    model_probs: np.ndarray,
    individual: int,
    cfg: ScaleSystemConfig,
    rng: np.random.Generator,
) -> tuple[int, np.ndarray]:
    """Single-particle regime indicator draw.

    Draws one candidate coarse state per model, scores
    prior x transition density x measurement likelihood, and samples the
    indicator from the normalized posterior. Returns the selected model and
    the (M, n) candidate states. The caller re-draws the particle's state
    under the selected model afterwards; candidates are for scoring only.
    """
    l = cfg.num_scales - 1
    d = individual
    m_count = cfg.num_models
    x_prev = particle.states[l]
    noise = _NoiseModel(cfg.process_noise[d][l], f"process_noise[{d}][{l}]")
    meas_scorer = _Scorer(cfg.measurement_noise[d][l], f"measurement_noise[{d}][{l}]")
    g = measurement_matrix(cfg.measurement_rotation[l], cfg.state_dims[l])

    drifts = np.stack(
        [
            coarse_transition(m, x_prev, fine_window, others_prev, d, cfg)
            for m in range(m_count)
        ]
    )
    candidates = drifts + noise.sample(rng, drifts.shape)
    with np.errstate(divide="ignore"):
        logpost = np.log(np.asarray(model_probs, dtype=float))
    logpost = logpost + noise.scorer.loglik(candidates - drifts)
    logpost = logpost + meas_scorer.loglik(
        np.asarray(measurement, dtype=float) - candidates @ g.T
    )
    if np.max(logpost) == -np.inf:
        raise DegenerateWeightsError(
            "indicator selection: every model has zero posterior mass"
        )
    probs, _ = normalize_log_weights(logpost)
    return sample_categorical(probs, rng), candidates


def _coarse_update(
    cloud: ParticleCloud,
    individual: int,
    step: int,
    measurement: np.ndarray,
    neighbor_prev: np.ndarray,
    cfg: ScaleSystemConfig,
    fcfg: FilterConfig,
    ctx: _RunContext,
    trace_hook,
    snapshots,
) -> tuple[np.ndarray, float, np.ndarray]:
    """Coarse step of one individual's cloud; returns (estimate, ess, freqs)."""
    d = individual
    l = cfg.num_scales - 1
    n_particles = cloud.num_particles
    m_count = cfg.num_models
    noise = ctx.process[d][l]
    meas_scorer = ctx.measurement[d][l]
    y = np.asarray(measurement, dtype=float)

    # Model probabilities from the conjugate posterior, one draw per particle.
    alphas = cfg.dirichlet_alpha[None, :] + cloud.counts
    rng = derive_rng(fcfg.seed, StreamPurpose.PF_MODEL_PROBS, d, step)
    pis = sample_dirichlet_rows(alphas, rng)

    # Candidate states per model, scored by prior, transition and likelihood.
    window = cloud.buffers[l - 1] if l > 0 else None
    drifts = np.stack(
        [
            coarse_transition(m, cloud.states[l], window, neighbor_prev, d, cfg)
            for m in range(m_count)
        ]
    )
    rng = derive_rng(fcfg.seed, StreamPurpose.PF_CANDIDATE, d, step)
    cand_noise = noise.sample(rng, drifts.shape)
    candidates = drifts + cand_noise
    with np.errstate(divide="ignore"):
        logpost = np.log(pis.T)
    logpost = logpost + noise.scorer.loglik(cand_noise)
    logpost = logpost + meas_scorer.loglik(y - candidates @ ctx.g[l].T)

    col_max = logpost.max(axis=0)
    if np.any(col_max == -np.inf):
        raise DegenerateWeightsError(
            f"indicator selection: every model has zero posterior mass "
            f"(individual {d}, step {step})"
        )
    sel = np.exp(logpost - col_max)
    sel_probs = (sel / sel.sum(axis=0)).T
    rng = derive_rng(fcfg.seed, StreamPurpose.PF_SELECT, d, step)
    chosen = sample_categorical_rows(sel_probs, rng)

    # Fresh state under the selected model; candidates were for scoring only.
    rng = derive_rng(fcfg.seed, StreamPurpose.PF_REDRAW, d, step)
    x_new = drifts[chosen, np.arange(n_particles)] + noise.sample(
        rng, (n_particles, cfg.state_dims[l])
    )
    cloud.states[l] = x_new
    cloud.history[:, step - 1] = chosen
    cloud.history_len = step
    cloud.counts[np.arange(n_particles), chosen] += 1

    logw = cloud.log_weights + meas_scorer.loglik(y - x_new @ ctx.g[l].T)
    probs = _normalize(logw, fcfg, f"individual {d}, coarse step {step}")
    estimate = probs @ x_new
    ess = effective_sample_size(probs)
    freqs = np.bincount(chosen, weights=probs, minlength=m_count)

    if trace_hook is not None:
        trace_hook(
            {
                "individual": d,
                "step": step,
                "dirichlet_params": alphas,
                "history": cloud.history[:, :step].copy(),
            }
        )
    if snapshots is not None:
        snapshots[(d, step)] = (x_new.copy(), logw.copy())

    rng = derive_rng(fcfg.seed, StreamPurpose.PF_COARSE_RESAMPLE, d, step)
    cloud.take(systematic_resample(probs, n_particles, rng))
    cloud.log_weights = np.full(n_particles, -np.log(n_particles))
    for b in cloud.buffers:
        b.fill(0.0)
    cloud.window_fill = [0] * len(cloud.buffers)
    return estimate, ess, freqs


def coarse_step(
    clouds: list[ParticleCloud],
    step: int,
    measurements_row: np.ndarray,
    neighbor_prev: np.ndarray,
    cfg: ScaleSystemConfig,
    fcfg: FilterConfig,
    ctx: _RunContext | None = None,
    trace_hook=None,
    snapshots=None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coarse step for all individuals, synchronously.

    Every individual's update reads the same ``neighbor_prev`` (the previous
    step's published estimates); the new estimates are returned, not fed
    within the step. Returns (estimates (D, n), ess (D,), freqs (D, M)).
    """
    if ctx is None:
        ctx = _RunContext(cfg, fcfg)
    n_coarse = cfg.state_dims[-1]
    d_count = cfg.num_individuals
    ests = np.empty((d_count, n_coarse))
    esss = np.empty(d_count)
    freqs = np.empty((d_count, cfg.num_models))
    for d in range(d_count):
        ests[d], esss[d], freqs[d] = _coarse_update(
            clouds[d],
            d,
            step,
            measurements_row[d],
            neighbor_prev,
            cfg,
            fcfg,
            ctx,
            trace_hook,
            snapshots,
        )
    return ests, esss, freqs


def run_filter(
    cfg: ScaleSystemConfig,
    fcfg: FilterConfig,
    measurements: Measurements,
    trace_hook=None,
) -> FilterOutput:
    """Filter a full measurement record through the nested particle filter.

    ``trace_hook``, when given, is called once per (individual, coarse step)
    with the Dirichlet parameters used and the post-selection indicator
    history, for conjugacy instrumentation. Identical inputs produce
    bitwise-identical outputs.
    """
    violations = validate_config(cfg)
    if violations:
        raise InvalidConfigError(violations)
    _check_filter_config(fcfg)
    L, D = cfg.num_scales, cfg.num_individuals
    steps = steps_per_scale(cfg)
    if len(measurements.scales) != L:
        raise ShapeMismatchError(
            f"measurements cover {len(measurements.scales)} scales, expected {L}"
        )
    for l, arr in enumerate(measurements.scales):
        want = (D, steps[l], cfg.state_dims[l])
        if arr.shape != want:
            raise ShapeMismatchError(
                f"measurements at scale {l} have shape {arr.shape}, expected {want}"
            )

    ctx = _RunContext(cfg, fcfg)
    clouds = init_particles(cfg, fcfg)
    estimates = [np.empty((D, steps[l], cfg.state_dims[l])) for l in range(L)]
    ess_trace = [np.empty((D, steps[l])) for l in range(L)]
    t_coarse = cfg.horizons[-1]
    freqs = np.empty((D, t_coarse, cfg.num_models))
    snapshots: dict | None = {} if fcfg.store_snapshots else None
    neighbor_prev = np.tile(
        cfg.initial_states[:, None], (1, cfg.state_dims[-1])
    ).astype(float)
    counters = [0] * L

    def advance(l: int) -> None:
        nonlocal neighbor_prev
        for _ in range(cfg.horizons[l]):
            if l > 0:
                advance(l - 1)
            counters[l] += 1
            t = counters[l]
            if l == L - 1:
                ests, esss, step_freqs = coarse_step(
                    clouds,
                    t,
                    measurements.scales[l][:, t - 1],
                    neighbor_prev,
                    cfg,
                    fcfg,
                    ctx,
                    trace_hook,
                    snapshots,
                )
                estimates[l][:, t - 1] = ests
                ess_trace[l][:, t - 1] = esss
                freqs[:, t - 1] = step_freqs
                neighbor_prev = ests
            else:
                for d in range(D):
                    est, ess = fine_step(
                        clouds[d], d, l, t, measurements.scales[l][d, t - 1], cfg, fcfg, ctx
                    )
                    estimates[l][d, t - 1] = est
                    ess_trace[l][d, t - 1] = ess

    advance(L - 1)
    return FilterOutput(
        state_estimates=tuple(estimates),
        indicator_map=np.argmax(freqs, axis=-1),
        indicator_freqs=freqs,
        ess_trace=tuple(ess_trace),
        snapshots=snapshots,
    )
