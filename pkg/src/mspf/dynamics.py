"""Transition drifts and measurement maps for the multiscale system.

The coarsest scale switches between regime models; every coarse drift is

    base_m(x_prev) + fine_gain * wavg + coupling_gain * neighbor_sum
                   + adjacency_gain * A @ x_prev

where ``wavg`` is the weighted time average of the just-completed fine
window and ``neighbor_sum`` excludes the individual's own interaction
diagonal. Fine scales evolve within a coarse window, driven by the previous
state of the scale above; they have no regime switching and no neighbor
coupling. Measurements are a plane rotation of the state plus Gaussian
noise.

All drift functions broadcast over a leading particle axis: ``x_prev`` may
be ``(n,)`` or ``(k, n)``, and the fine window ``(T, n)`` or ``(k, T, n)``.
"""

from __future__ import annotations

import numpy as np

from .kernels import sample_gaussian, weighted_time_average
from .types import DriftSpec, ScaleSystemConfig

__all__ = [
    "measurement_matrix",
    "coarse_transition",
    "fine_transition",
    "measure",
    "coarse_linear_gain",
    "coarse_transient_gain",
]


def measurement_matrix(theta: float, n: int) -> np.ndarray:
    """Rotation by ``theta`` in the (0, 1) plane, identity elsewhere."""
    g = np.eye(n)
    if n >= 2 and theta != 0.0:
        c, s = np.cos(theta), np.sin(theta)
        g[0, 0] = c
        g[0, 1] = -s
        g[1, 0] = s
        g[1, 1] = c
    return g


def _coarse_base(spec: DriftSpec, x_prev: np.ndarray) -> np.ndarray:
    if spec.kind == "sine":
        return spec.param("amplitude") * np.sin(x_prev + spec.param("phase"))
    if spec.kind == "damped-cosine":
        return (
            spec.param("amplitude")
            * np.cos(spec.param("frequency") * x_prev)
            * np.exp(-spec.param("decay") * x_prev)
        )
    if spec.kind == "linear":
        return np.zeros_like(x_prev)
    raise ValueError(f"unknown coarse drift kind {spec.kind!r}")


def neighbor_sum(others_prev: np.ndarray, individual: int, interaction: np.ndarray) -> np.ndarray:
    """Interaction-weighted sum of the other individuals' coarse states.

    The diagonal entry (the individual itself) never contributes, whatever
    its value in the interaction matrix.
    """
    row = np.array(interaction[individual], dtype=float)
    row[individual] = 0.0
    return row @ np.asarray(others_prev, dtype=float)


def coarse_transition(
    model: int,
    x_prev: np.ndarray,
    fine_window: np.ndarray | None,
    others_prev: np.ndarray,
    individual: int,
    cfg: ScaleSystemConfig,
) -> np.ndarray:
    """Deterministic coarse drift under regime ``model`` (noise not included).

    ``fine_window`` is the completed window of the scale just below, or None
    when there is no finer scale; ``others_prev`` is the (D, n) matrix of all
    individuals' previous coarse states (the filter passes its mean-field
    estimates here, the simulator the true states).
    """
    if not 0 <= model < len(cfg.transitions.coarse):
        raise ValueError(
            f"model index {model} out of range for {len(cfg.transitions.coarse)} models"
        )
    spec = cfg.transitions.coarse[model]
    x_prev = np.asarray(x_prev, dtype=float)
    drift = _coarse_base(spec, x_prev)

    fine_gain = spec.param("fine_gain")
    if fine_window is not None and fine_gain != 0.0:
        wavg = weighted_time_average(fine_window, cfg.fine_summary_weights[-1])
        drift = drift + fine_gain * wavg

    coupling_gain = spec.param("coupling_gain")
    if coupling_gain != 0.0:
        drift = drift + coupling_gain * neighbor_sum(others_prev, individual, cfg.interaction)

    adjacency_gain = spec.param("adjacency_gain")
    if adjacency_gain != 0.0:
        drift = drift + adjacency_gain * (x_prev @ cfg.adjacency[-1].T)
    return drift


def fine_transition(
    x_prev: np.ndarray,
    coarse_prev: np.ndarray,
    cfg: ScaleSystemConfig,
    scale: int = 0,
) -> np.ndarray:
    """Deterministic fine drift at ``scale``, driven by the scale above."""
    spec = cfg.transitions.fine[scale]
    x_prev = np.asarray(x_prev, dtype=float)
    coarse_prev = np.asarray(coarse_prev, dtype=float)
    if spec.kind == "cosine-mix":
        mixed = spec.param("offset") + x_prev @ cfg.adjacency[scale].T
        return np.cos(mixed) + spec.param("coarse_gain") * coarse_prev
    if spec.kind == "linear":
        drift = spec.param("coarse_gain") * coarse_prev
        gain = spec.param("adjacency_gain")
        if gain != 0.0:
            drift = drift + gain * (x_prev @ cfg.adjacency[scale].T)
        return drift
    raise ValueError(f"unknown fine drift kind {spec.kind!r}")


def measure(
    x: np.ndarray,
    individual: int,
    scale: int,
    cfg: ScaleSystemConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noisy measurement of state ``x`` at ``scale``: rotate, add Gaussian noise."""
    g = measurement_matrix(cfg.measurement_rotation[scale], cfg.state_dims[scale])
    mean = np.asarray(x, dtype=float) @ g.T
    return sample_gaussian(mean, cfg.measurement_noise[individual][scale], rng)


def coarse_linear_gain(
    coarse_specs: tuple[DriftSpec, ...],
    fine_feedback: float,
    adjacency: np.ndarray,
) -> float:
    """Worst-case spectral radius of the linearized coarse update.

    Every fine state in a window tracks ``fine_feedback`` times the previous
    coarse state (plus bounded terms), so the window average feeds that
    fraction straight back into the coarse drift. The effective linear map
    under model m is ``fine_gain_m * fine_feedback * I + adjacency_gain_m * A``;
    the bounded nonlinear bases cannot contain growth if its spectral radius
    exceeds one. Used to prescreen generated adjacency matrices.
    """
    n = adjacency.shape[0]
    worst = 0.0
    for spec in coarse_specs:
        m = spec.param("fine_gain") * fine_feedback * np.eye(n) + spec.param(
            "adjacency_gain"
        ) * np.asarray(adjacency, dtype=float)
        worst = max(worst, float(np.max(np.abs(np.linalg.eigvals(m)))))
    return worst


def coarse_transient_gain(
    coarse_specs: tuple[DriftSpec, ...],
    fine_feedback: float,
    adjacency: np.ndarray,
    max_power: int = 200,
) -> float:
    """Peak spectral norm of any power of the linearized coarse update.

    A spectral radius below one only bounds the asymptotic behaviour; a
    non-normal map can still amplify perturbations for several steps before
    the decay wins, which is enough to drive the state far outside the range
    the bounded drift terms and noise levels assume. Returns the worst
    ``max_k ||M_m^k||_2`` across models so callers can require non-expansive
    propagation outright.
    """
    n = adjacency.shape[0]
    worst = 0.0
    for spec in coarse_specs:
        m = spec.param("fine_gain") * fine_feedback * np.eye(n) + spec.param(
            "adjacency_gain"
        ) * np.asarray(adjacency, dtype=float)
        power = m.copy()
        for _ in range(max_power):
            norm = float(np.linalg.norm(power, 2))
            worst = max(worst, norm)
            if norm < 1e-6 or norm > 1e6 or not np.isfinite(norm):
                break
            power = power @ m
    return worst
