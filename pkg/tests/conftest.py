"""Shared builders for hand-checkable test systems."""

from __future__ import annotations

import numpy as np

from mspf.types import DriftSpec, ScaleSystemConfig, TransitionSpec, validate_config


def tiny_system(
    num_individuals: int = 2,
    fine_dim: int = 2,
    coarse_dim: int = 2,
    fine_window: int = 4,
    coarse_steps: int = 10,
    process_var: float = 0.1,
    measurement_var: float = 0.05,
    adjacency_fine: np.ndarray | None = None,
    adjacency_coarse: np.ndarray | None = None,
    interaction: np.ndarray | None = None,
    rotation: float = 0.0,
    fine_gain: float = 1.0,
    coupling_gain: float = 0.5,
    adjacency_gain: float = 0.0,
    coarse_gain: float = 0.6,
    summary_weights: np.ndarray | None = None,
    seed: int = 11,
    initial: tuple[float, ...] | None = None,
) -> ScaleSystemConfig:
    """Two-scale, two-regime system small enough to trace by hand.

    Model 0 is the sine family, model 1 the damped cosine, with the shared
    gain terms controlled by the keyword arguments. Always returns a config
    that passes validation.
    """
    D = num_individuals
    if adjacency_fine is None:
        adjacency_fine = np.zeros((fine_dim, fine_dim))
    if adjacency_coarse is None:
        adjacency_coarse = np.zeros((coarse_dim, coarse_dim))
    if interaction is None:
        interaction = np.eye(D)
    if summary_weights is None:
        summary_weights = np.ones(fine_window)
    if initial is None:
        initial = tuple(0.2 + 0.1 * d for d in range(D))
    shared = {
        "fine_gain": fine_gain,
        "coupling_gain": coupling_gain,
        "adjacency_gain": adjacency_gain,
    }
    cfg = ScaleSystemConfig(
        num_scales=2,
        num_individuals=D,
        state_dims=(fine_dim, coarse_dim),
        horizons=(fine_window, coarse_steps),
        num_models=2,
        process_noise=tuple(
            (process_var * np.eye(fine_dim), process_var * np.eye(coarse_dim))
            for _ in range(D)
        ),
        measurement_noise=tuple(
            (measurement_var * np.eye(fine_dim), measurement_var * np.eye(coarse_dim))
            for _ in range(D)
        ),
        adjacency=(adjacency_fine, adjacency_coarse),
        interaction=interaction,
        measurement_rotation=(0.0, rotation),
        dirichlet_alpha=np.ones(2),
        fine_summary_weights=(np.asarray(summary_weights, dtype=float),),
        initial_states=np.asarray(initial, dtype=float),
        seed=seed,
        transitions=TransitionSpec(
            fine=(
                DriftSpec(
                    "cosine-mix", {"offset": 1.0, "coarse_gain": coarse_gain}
                ),
            ),
            coarse=(
                DriftSpec(
                    "sine",
                    {"amplitude": 3.0, "phase": np.pi / 4.0, **shared},
                ),
                DriftSpec(
                    "damped-cosine",
                    {"amplitude": 2.0, "frequency": 1.2, "decay": 0.05, **shared},
                ),
            ),
        ),
    )
    assert validate_config(cfg) == []
    return cfg


def assert_config_equal(a: ScaleSystemConfig, b: ScaleSystemConfig) -> None:
    """Field-by-field exact equality, including every structure matrix."""
    assert a.num_scales == b.num_scales
    assert a.num_individuals == b.num_individuals
    assert a.state_dims == b.state_dims
    assert a.horizons == b.horizons
    assert a.num_models == b.num_models
    assert a.measurement_rotation == b.measurement_rotation
    assert a.seed == b.seed
    for row_a, row_b in zip(a.process_noise, b.process_noise, strict=True):
        for m_a, m_b in zip(row_a, row_b, strict=True):
            np.testing.assert_array_equal(m_a, m_b)
    for row_a, row_b in zip(a.measurement_noise, b.measurement_noise, strict=True):
        for m_a, m_b in zip(row_a, row_b, strict=True):
            np.testing.assert_array_equal(m_a, m_b)
    for m_a, m_b in zip(a.adjacency, b.adjacency, strict=True):
        np.testing.assert_array_equal(m_a, m_b)
    np.testing.assert_array_equal(a.interaction, b.interaction)
    np.testing.assert_array_equal(a.dirichlet_alpha, b.dirichlet_alpha)
    for w_a, w_b in zip(a.fine_summary_weights, b.fine_summary_weights, strict=True):
        np.testing.assert_array_equal(w_a, w_b)
    np.testing.assert_array_equal(a.initial_states, b.initial_states)
    assert a.transitions == b.transitions
