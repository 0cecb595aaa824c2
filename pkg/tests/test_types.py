"""Config container invariants and validate_config violation reporting."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from mspf.types import (
    DriftSpec,
    InvalidConfigError,
    RegimeSchedule,
    ScaleSystemConfig,
    TransitionSpec,
    steps_per_scale,
    validate_config,
)


def small_config(**overrides) -> ScaleSystemConfig:
    """Two scales, two individuals, two models. Valid unless overridden."""
    base = dict(
        num_scales=2,
        num_individuals=2,
        state_dims=(2, 3),
        horizons=(4, 10),
        num_models=2,
        process_noise=tuple(
            (0.1 * np.eye(2), 0.2 * np.eye(3)) for _ in range(2)
        ),
        measurement_noise=tuple(
            (0.05 * np.eye(2), 0.02 * np.eye(3)) for _ in range(2)
        ),
        adjacency=(np.zeros((2, 2)), np.zeros((3, 3))),
        interaction=np.eye(2),
        measurement_rotation=(0.0, 0.3),
        dirichlet_alpha=np.ones(2),
        fine_summary_weights=(np.ones(4),),
        initial_states=np.array([0.2, 0.5]),
        seed=11,
        transitions=TransitionSpec(
            # zero feedback keeps the mixed (2, 3) dims valid
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),),
            coarse=(
                DriftSpec("sine", {"amplitude": 3.0, "phase": 0.7853981633974483}),
                DriftSpec(
                    "damped-cosine",
                    {"amplitude": 2.0, "frequency": 1.2, "decay": 0.05},
                ),
            ),
        ),
    )
    base.update(overrides)
    return ScaleSystemConfig(**base)


class TestScaleSystemConfig:
    def test_valid_baseline(self):
        assert validate_config(small_config()) == []

    def test_arrays_stored_readonly(self):
        cfg = small_config()
        with pytest.raises(ValueError):
            cfg.interaction[0, 0] = 5.0
        with pytest.raises(ValueError):
            cfg.process_noise[0][1][0, 0] = -1.0
        with pytest.raises(ValueError):
            cfg.adjacency[1][0, 0] = 9.0

    def test_frozen(self):
        with pytest.raises(dataclasses.FrozenInstanceError):
            small_config().seed = 3


class TestStepsPerScale:
    def test_product_of_coarser_horizons(self):
        assert steps_per_scale(small_config()) == (40, 10)

    def test_three_scales(self):
        cfg = small_config(
            num_scales=3,
            state_dims=(1, 2, 3),
            horizons=(5, 4, 10),
            process_noise=tuple(
                (0.1 * np.eye(1), 0.1 * np.eye(2), 0.2 * np.eye(3))
                for _ in range(2)
            ),
            measurement_noise=tuple(
                (0.1 * np.eye(1), 0.1 * np.eye(2), 0.2 * np.eye(3))
                for _ in range(2)
            ),
            adjacency=(np.zeros((1, 1)), np.zeros((2, 2)), np.zeros((3, 3))),
            measurement_rotation=(0.0, 0.0, 0.0),
            fine_summary_weights=(np.ones(5), np.ones(4)),
            transitions=TransitionSpec(
                fine=(
                    DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),
                    DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),
                ),
                coarse=(
                    DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0}),
                    DriftSpec("linear"),
                ),
            ),
        )
        assert validate_config(cfg) == []
        assert steps_per_scale(cfg) == (200, 40, 10)

    def test_single_scale(self):
        cfg = small_config(
            num_scales=1,
            state_dims=(3,),
            horizons=(10,),
            process_noise=tuple((0.2 * np.eye(3),) for _ in range(2)),
            measurement_noise=tuple((0.2 * np.eye(3),) for _ in range(2)),
            adjacency=(np.zeros((3, 3)),),
            measurement_rotation=(0.0,),
            fine_summary_weights=(),
            transitions=TransitionSpec(
                fine=(),
                coarse=(
                    DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0}),
                    DriftSpec("linear"),
                ),
            ),
        )
        assert validate_config(cfg) == []
        assert steps_per_scale(cfg) == (10,)


def violations(cfg: ScaleSystemConfig) -> str:
    found = validate_config(cfg)
    assert found, "expected at least one violation"
    return "\n".join(found)


class TestValidateConfig:
    def test_nonpositive_counts(self):
        assert "num_scales" in violations(small_config(num_scales=0))
        assert "num_individuals" in violations(small_config(num_individuals=-1))
        assert "num_models" in violations(small_config(num_models=0))

    def test_dimension_lists_must_match_scales(self):
        assert "state_dims" in violations(small_config(state_dims=(2,)))
        assert "horizons" in violations(small_config(horizons=(4, 10, 2)))
        assert "measurement_rotation" in violations(
            small_config(measurement_rotation=(0.0,))
        )

    def test_positivity_of_dims_and_horizons(self):
        assert "state_dims" in violations(small_config(state_dims=(2, 0)))
        assert "horizons" in violations(small_config(horizons=(0, 10)))

    def test_asymmetric_covariance(self):
        bad = np.array([[0.1, 0.05], [0.0, 0.1]])
        noise = ((bad, 0.2 * np.eye(3)), (0.1 * np.eye(2), 0.2 * np.eye(3)))
        msg = violations(small_config(process_noise=noise))
        assert "process_noise[0][0]" in msg and "symmetric" in msg

    def test_negative_eigenvalue_covariance(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        noise = ((0.1 * np.eye(2), 0.2 * np.eye(3)), (bad, 0.2 * np.eye(3)))
        msg = violations(small_config(measurement_noise=noise))
        assert "measurement_noise[1][0]" in msg and "eigenvalue" in msg

    def test_zero_covariance_is_allowed(self):
        # deterministic channels are legal; only negative definiteness is not
        noise = ((np.zeros((2, 2)), 0.2 * np.eye(3)),) * 2
        assert validate_config(small_config(process_noise=noise)) == []

    def test_covariance_shape(self):
        noise = ((0.1 * np.eye(3), 0.2 * np.eye(3)),) * 2
        assert "expected (2, 2)" in violations(small_config(process_noise=noise))

    def test_nonfinite_covariance(self):
        bad = np.array([[np.nan, 0.0], [0.0, 1.0]])
        noise = ((bad, 0.2 * np.eye(3)),) * 2
        assert "non-finite" in violations(small_config(process_noise=noise))

    def test_noise_entry_counts(self):
        one_row = ((0.1 * np.eye(2), 0.2 * np.eye(3)),)
        assert "individual entries" in violations(small_config(process_noise=one_row))
        short = ((0.1 * np.eye(2),), (0.1 * np.eye(2), 0.2 * np.eye(3)))
        assert "scale entries" in violations(small_config(process_noise=short))

    def test_adjacency_checks(self):
        assert "adjacency" in violations(small_config(adjacency=(np.zeros((2, 2)),)))
        wrong = (np.zeros((3, 3)), np.zeros((3, 3)))
        assert "adjacency[0]" in violations(small_config(adjacency=wrong))
        inf_adj = (np.zeros((2, 2)), np.full((3, 3), np.inf))
        assert "non-finite" in violations(small_config(adjacency=inf_adj))

    def test_interaction_shape(self):
        assert "interaction" in violations(small_config(interaction=np.eye(3)))

    def test_dirichlet_alpha(self):
        assert "dirichlet_alpha" in violations(small_config(dirichlet_alpha=np.ones(3)))
        msg = violations(small_config(dirichlet_alpha=np.array([1.0, 0.0])))
        assert "strictly positive" in msg

    def test_summary_weights(self):
        assert "fine_summary_weights" in violations(small_config(fine_summary_weights=()))
        msg = violations(small_config(fine_summary_weights=(np.ones(3),)))
        assert "expected (4,)" in msg
        msg = violations(small_config(fine_summary_weights=(np.zeros(4),)))
        assert "positive sum" in msg
        msg = violations(
            small_config(fine_summary_weights=(np.array([1.0, -0.5, 1.0, 1.0]),))
        )
        assert "non-negative" in msg

    def test_initial_states_shape(self):
        assert "initial_states" in violations(small_config(initial_states=np.zeros(3)))

    def test_seed_range(self):
        assert "seed" in violations(small_config(seed=-1))
        assert "seed" in violations(small_config(seed=2**64))
        assert validate_config(small_config(seed=2**64 - 1)) == []

    def test_transition_counts(self):
        tr = TransitionSpec(
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),),
            coarse=(DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0}),),
        )
        assert "transitions.coarse" in violations(small_config(transitions=tr))
        tr = TransitionSpec(
            fine=(),
            coarse=(
                DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0}),
                DriftSpec("linear"),
            ),
        )
        assert "transitions.fine" in violations(small_config(transitions=tr))

    def test_unknown_drift_kind(self):
        tr = TransitionSpec(
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),),
            coarse=(DriftSpec("sawtooth"), DriftSpec("linear")),
        )
        msg = violations(small_config(transitions=tr))
        assert "unknown kind 'sawtooth'" in msg

    def test_missing_drift_params(self):
        tr = TransitionSpec(
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),),
            coarse=(
                DriftSpec("sine", {"amplitude": 3.0}),
                DriftSpec("linear"),
            ),
        )
        msg = violations(small_config(transitions=tr))
        assert "missing params" in msg and "phase" in msg

    def test_cross_scale_feedback_needs_matching_dims(self):
        # dims (2, 3) are fine with zero feedback but cannot carry it
        tr = TransitionSpec(
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.6}),),
            coarse=(
                DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0}),
                DriftSpec("linear"),
            ),
        )
        msg = violations(small_config(transitions=tr))
        assert "transitions.fine[0]" in msg and "dims differ" in msg

        tr = TransitionSpec(
            fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.0}),),
            coarse=(
                DriftSpec("sine", {"amplitude": 3.0, "phase": 0.0, "fine_gain": 1.0}),
                DriftSpec("linear"),
            ),
        )
        msg = violations(small_config(transitions=tr))
        assert "transitions.coarse[0]" in msg and "dims differ" in msg

    def test_multiple_violations_all_reported(self):
        found = validate_config(
            small_config(seed=-5, interaction=np.eye(3), dirichlet_alpha=np.ones(5))
        )
        assert len(found) == 3


class TestInvalidConfigError:
    def test_carries_violations(self):
        err = InvalidConfigError(["a is wrong", "b is wrong"])
        assert err.violations == ["a is wrong", "b is wrong"]
        assert "a is wrong; b is wrong" in str(err)


class TestRegimeSchedule:
    def test_one_based_lookup(self):
        sched = RegimeSchedule(models=np.array([[0, 1, 1], [1, 0, 0]]))
        assert sched.num_individuals == 2
        assert sched.num_steps == 3
        assert sched.model_at(0, 1) == 0
        assert sched.model_at(0, 2) == 1
        assert sched.model_at(1, 3) == 0

    def test_models_readonly(self):
        sched = RegimeSchedule(models=np.zeros((2, 3), dtype=int))
        with pytest.raises(ValueError):
            sched.models[0, 0] = 1
