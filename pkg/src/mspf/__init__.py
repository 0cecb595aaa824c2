"""Multiscale switching state-space models: simulation, nested particle
filtering with Dirichlet-categorical regime inference, and study tooling."""

from .configio import (
    CANONICAL_STRUCTURE_SEED,
    DEFAULT_SEED,
    build_linear_gaussian,
    build_sim1,
    build_sim2,
    dump_experiment,
    generate_adjacency,
    generate_interaction,
    load_experiment,
)
from .dynamics import (
    coarse_transition,
    fine_transition,
    measure,
    measurement_matrix,
)
from .evaluate import (
    coarse_rmse,
    emit_report,
    evaluate_run,
    fine_rmse_per_window,
    indicator_metrics,
    load_report,
)
from .filtering import (
    FilterConfig,
    ParticleCloud,
    ShapeMismatchError,
    coarse_step,
    fine_step,
    init_particles,
    run_filter,
    sample_indicator,
    sample_model_probabilities,
)
from .kernels import (
    DegenerateWeightsError,
    NotPositiveDefiniteError,
    StreamPurpose,
    derive_rng,
    effective_sample_size,
    gaussian_logpdf,
    normalize_log_weights,
    sample_categorical,
    sample_dirichlet,
    sample_gaussian,
    systematic_resample,
    weighted_time_average,
)
from .reproduce import BandCheck, StudyResult, run_study
from .simulate import (
    build_sim1_schedule,
    build_sim2_schedule,
    simulate,
    switch_times,
    thirds_schedule,
)
from .types import (
    DriftSpec,
    EvalReport,
    FilterOutput,
    GroundTruth,
    InvalidConfigError,
    Measurements,
    Particle,
    RegimeSchedule,
    ScaleSystemConfig,
    TransitionSpec,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "CANONICAL_STRUCTURE_SEED",
    "DEFAULT_SEED",
    "BandCheck",
    "DegenerateWeightsError",
    "DriftSpec",
    "EvalReport",
    "FilterConfig",
    "FilterOutput",
    "GroundTruth",
    "InvalidConfigError",
    "Measurements",
    "NotPositiveDefiniteError",
    "Particle",
    "ParticleCloud",
    "RegimeSchedule",
    "ScaleSystemConfig",
    "ShapeMismatchError",
    "StreamPurpose",
    "StudyResult",
    "TransitionSpec",
    "build_linear_gaussian",
    "build_sim1",
    "build_sim1_schedule",
    "build_sim2",
    "build_sim2_schedule",
    "coarse_rmse",
    "coarse_step",
    "coarse_transition",
    "derive_rng",
    "dump_experiment",
    "effective_sample_size",
    "emit_report",
    "evaluate_run",
    "fine_rmse_per_window",
    "fine_step",
    "fine_transition",
    "gaussian_logpdf",
    "generate_adjacency",
    "generate_interaction",
    "indicator_metrics",
    "init_particles",
    "load_experiment",
    "load_report",
    "measure",
    "measurement_matrix",
    "normalize_log_weights",
    "run_filter",
    "run_study",
    "sample_categorical",
    "sample_dirichlet",
    "sample_gaussian",
    "sample_indicator",
    "sample_model_probabilities",
    "simulate",
    "switch_times",
    "systematic_resample",
    "thirds_schedule",
    "validate_config",
    "weighted_time_average",
]
