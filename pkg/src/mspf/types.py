"""Core value types for the multiscale switching state-space model.

Conventions used across the package:

* Scales are indexed 0 (finest) through L-1 (coarsest). Regime switching
  lives at the coarsest scale only.
* Individuals are indexed 0 through D-1. Neighbor coupling acts only at the
  coarsest scale, through the off-diagonal entries of the interaction matrix.
* Time is 1-based in step arguments (step t fills array row t-1), matching
  how horizons count steps.

All containers here are plain data; behavior lives in the sibling modules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "DriftSpec",
    "TransitionSpec",
    "ScaleSystemConfig",
    "RegimeSchedule",
    "GroundTruth",
    "Measurements",
    "Particle",
    "FilterOutput",
    "EvalReport",
    "InvalidConfigError",
    "validate_config",
    "steps_per_scale",
]

COV_SYMMETRY_TOL = 1e-12

# Required parameter names per drift family, used by validate_config.
COARSE_DRIFT_PARAMS: dict[str, tuple[str, ...]] = {
    "sine": ("amplitude", "phase"),
    "damped-cosine": ("amplitude", "frequency", "decay"),
    "linear": (),
}
FINE_DRIFT_PARAMS: dict[str, tuple[str, ...]] = {
    "cosine-mix": ("offset", "coarse_gain"),
    "linear": ("coarse_gain",),
}


class InvalidConfigError(ValueError):
    """Raised when an operation receives a config that fails validation."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid config: " + "; ".join(self.violations))


@dataclass(frozen=True)
class DriftSpec:
    """One named drift family plus its scalar coefficients.

    ``kind`` selects the functional form (see dynamics module); ``params``
    holds its coefficients. Coarse families additionally honor the shared
    gains ``fine_gain`` (on the fine-window average), ``coupling_gain`` (on
    the neighbor sum) and ``adjacency_gain`` (on A @ x).
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)

    def param(self, name: str, default: float = 0.0) -> float:
        return float(self.params.get(name, default))


@dataclass(frozen=True)
class TransitionSpec:
    """Drift families for every scale: one per fine scale, one per regime model."""

    fine: tuple[DriftSpec, ...]
    coarse: tuple[DriftSpec, ...]


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class ScaleSystemConfig:
    """Full description of one multiscale switching system.

    Noise covariances are indexed [individual][scale]; adjacency is one
    matrix per scale; the interaction matrix couples individuals at the
    coarsest scale (its diagonal never enters the neighbor sum).
    ``fine_summary_weights`` holds one weight vector per fine scale (length
    ``horizons[l]``), defining the weighted time average a coarser step
    consumes. Instances are frozen; arrays are stored read-only.
    """

    num_scales: int
    num_individuals: int
    state_dims: tuple[int, ...]
    horizons: tuple[int, ...]
    num_models: int
    process_noise: tuple[tuple[np.ndarray, ...], ...]
    measurement_noise: tuple[tuple[np.ndarray, ...], ...]
    adjacency: tuple[np.ndarray, ...]
    interaction: np.ndarray
    measurement_rotation: tuple[float, ...]
    dirichlet_alpha: np.ndarray
    fine_summary_weights: tuple[np.ndarray, ...]
    initial_states: np.ndarray
    seed: int
    transitions: TransitionSpec

    def __post_init__(self) -> None:
        conv = {
            "state_dims": tuple(int(v) for v in self.state_dims),
            "horizons": tuple(int(v) for v in self.horizons),
            "measurement_rotation": tuple(float(v) for v in self.measurement_rotation),
            "process_noise": tuple(
                tuple(_as_readonly(np.asarray(m, dtype=float)) for m in row)
                for row in self.process_noise
            ),
            "measurement_noise": tuple(
                tuple(_as_readonly(np.asarray(m, dtype=float)) for m in row)
                for row in self.measurement_noise
            ),
            "adjacency": tuple(
                _as_readonly(np.asarray(m, dtype=float)) for m in self.adjacency
            ),
            "interaction": _as_readonly(np.asarray(self.interaction, dtype=float)),
            "dirichlet_alpha": _as_readonly(np.asarray(self.dirichlet_alpha, dtype=float)),
            "fine_summary_weights": tuple(
                _as_readonly(np.asarray(w, dtype=float)) for w in self.fine_summary_weights
            ),
            "initial_states": _as_readonly(np.asarray(self.initial_states, dtype=float)),
        }
        for name, value in conv.items():
            object.__setattr__(self, name, value)


def steps_per_scale(cfg: ScaleSystemConfig) -> tuple[int, ...]:
    """Total step count at each scale: prod(horizons[l:]) for scale l.

    The coarsest scale runs ``horizons[-1]`` steps; every finer scale runs a
    full window of ``horizons[l]`` steps per step of the scale above it.
    """
    steps = []
    for l in range(cfg.num_scales):
        total = 1
        for h in cfg.horizons[l:]:
            total *= h
        steps.append(total)
    return tuple(steps)


def _check_cov(mat: np.ndarray, n: int, label: str, out: list[str]) -> None:
    if mat.shape != (n, n):
        out.append(f"{label} has shape {mat.shape}, expected ({n}, {n})")
        return
    if not np.all(np.isfinite(mat)):
        out.append(f"{label} contains non-finite entries")
        return
    if np.max(np.abs(mat - mat.T), initial=0.0) > COV_SYMMETRY_TOL:
        out.append(f"{label} is not symmetric within {COV_SYMMETRY_TOL}")
        return
    eigs = np.linalg.eigvalsh(mat)
    if eigs.min(initial=0.0) < -COV_SYMMETRY_TOL:
        out.append(f"{label} has negative eigenvalue {eigs.min():.3e}")


def validate_config(cfg: ScaleSystemConfig) -> list[str]:
    """Every constraint violation in ``cfg``, as human-readable strings.

    An empty list means the config is valid. Pure; never mutates or raises
    on bad values.
    """
    v: list[str] = []
    L, D, M = cfg.num_scales, cfg.num_individuals, cfg.num_models
    if L < 1:
        v.append(f"num_scales must be >= 1, got {L}")
    if D < 1:
        v.append(f"num_individuals must be >= 1, got {D}")
    if M < 1:
        v.append(f"num_models must be >= 1, got {M}")
    if L < 1 or D < 1 or M < 1:
        return v

    if len(cfg.state_dims) != L:
        v.append(f"state_dims has {len(cfg.state_dims)} entries, expected {L}")
    if len(cfg.horizons) != L:
        v.append(f"horizons has {len(cfg.horizons)} entries, expected {L}")
    if any(n < 1 for n in cfg.state_dims):
        v.append(f"state_dims must be strictly positive, got {cfg.state_dims}")
    if any(t < 1 for t in cfg.horizons):
        v.append(f"horizons must be strictly positive, got {cfg.horizons}")
    if len(cfg.measurement_rotation) != L:
        v.append(
            f"measurement_rotation has {len(cfg.measurement_rotation)} entries, expected {L}"
        )
    if len(cfg.state_dims) != L or any(n < 1 for n in cfg.state_dims):
        return v

    for name, rows in (("process_noise", cfg.process_noise), ("measurement_noise", cfg.measurement_noise)):
        if len(rows) != D:
            v.append(f"{name} has {len(rows)} individual entries, expected {D}")
            continue
        for d, row in enumerate(rows):
            if len(row) != L:
                v.append(f"{name}[{d}] has {len(row)} scale entries, expected {L}")
                continue
            for l, mat in enumerate(row):
                _check_cov(mat, cfg.state_dims[l], f"{name}[{d}][{l}]", v)

    if len(cfg.adjacency) != L:
        v.append(f"adjacency has {len(cfg.adjacency)} entries, expected {L}")
    else:
        for l, mat in enumerate(cfg.adjacency):
            n = cfg.state_dims[l]
            if mat.shape != (n, n):
                v.append(f"adjacency[{l}] has shape {mat.shape}, expected ({n}, {n})")
            elif not np.all(np.isfinite(mat)):
                v.append(f"adjacency[{l}] contains non-finite entries")

    if cfg.interaction.shape != (D, D):
        v.append(f"interaction has shape {cfg.interaction.shape}, expected ({D}, {D})")

    if cfg.dirichlet_alpha.shape != (M,):
        v.append(
            f"dirichlet_alpha has shape {cfg.dirichlet_alpha.shape}, expected ({M},)"
        )
    elif np.any(cfg.dirichlet_alpha <= 0.0):
        v.append("dirichlet_alpha entries must be strictly positive")

    if len(cfg.fine_summary_weights) != L - 1:
        v.append(
            f"fine_summary_weights has {len(cfg.fine_summary_weights)} entries, expected {L - 1}"
        )
    elif len(cfg.horizons) == L:
        for l, w in enumerate(cfg.fine_summary_weights):
            if w.shape != (cfg.horizons[l],):
                v.append(
                    f"fine_summary_weights[{l}] has shape {w.shape}, expected ({cfg.horizons[l]},)"
                )
            elif np.any(w < 0.0) or float(w.sum()) <= 0.0:
                v.append(
                    f"fine_summary_weights[{l}] must be non-negative with positive sum"
                )

    if cfg.initial_states.shape != (D,):
        v.append(f"initial_states has shape {cfg.initial_states.shape}, expected ({D},)")

    if not (0 <= cfg.seed < 2**64):
        v.append(f"seed must be a 64-bit unsigned integer, got {cfg.seed}")

    tr = cfg.transitions
    if len(tr.coarse) != M:
        v.append(f"transitions.coarse has {len(tr.coarse)} models, expected {M}")
    if len(tr.fine) != L - 1:
        v.append(f"transitions.fine has {len(tr.fine)} entries, expected {L - 1}")
    for where, specs, table in (
        ("coarse", tr.coarse, COARSE_DRIFT_PARAMS),
        ("fine", tr.fine, FINE_DRIFT_PARAMS),
    ):
        for i, spec in enumerate(specs):
            if spec.kind not in table:
                v.append(
                    f"transitions.{where}[{i}] has unknown kind {spec.kind!r}; "
                    f"known: {sorted(table)}"
                )
            else:
                missing = [p for p in table[spec.kind] if p not in spec.params]
                if missing:
                    v.append(f"transitions.{where}[{i}] ({spec.kind}) missing params {missing}")

    # Cross-scale feedback adds a vector from the neighboring scale, which
    # only broadcasts when the two state dims agree.
    if len(cfg.state_dims) == L and len(cfg.horizons) == L:
        if len(tr.fine) == L - 1:
            for l, spec in enumerate(tr.fine):
                if spec.param("coarse_gain") != 0.0 and cfg.state_dims[l] != cfg.state_dims[l + 1]:
                    v.append(
                        f"transitions.fine[{l}] feeds scale {l + 1} back into scale {l}, "
                        f"but their dims differ ({cfg.state_dims[l + 1]} vs {cfg.state_dims[l]})"
                    )
        if L >= 2 and len(tr.coarse) == M:
            for i, spec in enumerate(tr.coarse):
                if spec.param("fine_gain") != 0.0 and cfg.state_dims[-1] != cfg.state_dims[-2]:
                    v.append(
                        f"transitions.coarse[{i}] consumes the scale {L - 2} window average, "
                        f"but their dims differ ({cfg.state_dims[-2]} vs {cfg.state_dims[-1]})"
                    )

    return v


@dataclass(frozen=True)
class RegimeSchedule:
    """True regime model index per individual per coarsest-scale step.

    ``models`` has shape (D, T) with entries in [0, num_models). Step
    arguments are 1-based.
    """

    models: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "models", _as_readonly(np.asarray(self.models, dtype=np.int64)))

    @property
    def num_individuals(self) -> int:
        return self.models.shape[0]

    @property
    def num_steps(self) -> int:
        return self.models.shape[1]

    def model_at(self, individual: int, step: int) -> int:
        return int(self.models[individual, step - 1])


@dataclass(frozen=True)
class Measurements:
    """Per-scale measurement arrays, each (D, steps_l, N_l)."""

    scales: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class GroundTruth:
    """Simulated latent states, measurements and regime indicators.

    ``states[l]`` and ``measurements[l]`` are (D, steps_l, N_l) arrays whose
    row t-1 is step t (initial conditions are not part of the record);
    ``indicators`` is (D, T_coarse).
    """

    states: tuple[np.ndarray, ...]
    measurements: tuple[np.ndarray, ...]
    indicators: np.ndarray

    def measurements_view(self) -> Measurements:
        return Measurements(scales=self.measurements)


@dataclass
class Particle:
    """Single-particle view: one state per scale, window buffers, regime history."""

    states: tuple[np.ndarray, ...]
    fine_trajectory: tuple[np.ndarray, ...]
    indicator_history: np.ndarray
    model_counts: np.ndarray
    log_weight: float


@dataclass(frozen=True)
class FilterOutput:
    """Filter estimates and diagnostics.

    ``state_estimates[l]`` is (D, steps_l, N_l): weighted particle means taken
    before each resampling. ``indicator_freqs`` is (D, T, M) weight-weighted
    model frequencies; ``indicator_map`` its argmax (ties break to the lowest
    index). ``ess_trace[l]`` is (D, steps_l). ``snapshots``, when enabled,
    maps (individual, coarse_step) to (states, log_weights) particle clouds
    captured after each coarse update, before resampling.
    """

    state_estimates: tuple[np.ndarray, ...]
    indicator_map: np.ndarray
    indicator_freqs: np.ndarray
    ess_trace: tuple[np.ndarray, ...]
    snapshots: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] | None = None


@dataclass(frozen=True)
class EvalReport:
    """Accuracy metrics for one filter run against its ground truth.

    ``switch_delays`` holds, per individual, (switch_step, delay) pairs for
    every true regime switch; delay is in coarse steps, ``inf`` if the MAP
    indicator never matches within that regime segment. Indicator accuracy is
    reported both after the burn-in and over the full horizon.
    """

    coarse_rmse: np.ndarray
    fine_rmse: np.ndarray | None
    indicator_accuracy: np.ndarray
    indicator_accuracy_full: np.ndarray
    switch_delays: tuple[tuple[tuple[int, float], ...], ...]
    burn_in: int
