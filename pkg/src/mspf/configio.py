"""Config file loading, resolution and the canonical experiment builders.

A config file is a single YAML document whose keys mirror the
ScaleSystemConfig fields. Two conveniences exist at the file level only:
scalar noise entries mean ``v * I``, and the structure matrices accept
generation recipes ("random-binary" for an adjacency, or
"identity-plus-random-offdiag" for the interaction) that are resolved
deterministically from the master seed at load time. The regime schedule
rides along under a ``regimes`` key, either as per-individual
models-by-third triples or as an explicit per-step table.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .dynamics import coarse_linear_gain, coarse_transient_gain
from .kernels import StreamPurpose, derive_rng
from .simulate import build_sim1_schedule, build_sim2_schedule, thirds_schedule
from .types import DriftSpec, RegimeSchedule, ScaleSystemConfig, TransitionSpec

__all__ = [
    "DEFAULT_SEED",
    "CANONICAL_STRUCTURE_SEED",
    "load_experiment",
    "dump_experiment",
    "generate_adjacency",
    "generate_interaction",
    "build_sim1",
    "build_sim2",
    "build_linear_gaussian",
]

DEFAULT_SEED = 20250816
# Structure draw behind the shipped study configs. Chosen (documented scan)
# as an admissible recipe draw whose realization tracks robustly at the
# study's particle count; run seeds vary the noise, never the system.
CANONICAL_STRUCTURE_SEED = 20252816
ADJACENCY_RECIPE = "random-binary"
INTERACTION_RECIPE = "identity-plus-random-offdiag"

# Generated coarse adjacency draws are rejected unless the linearized
# coarse update is a strict contraction (spectral radius) AND never
# amplifies transiently (peak norm of its powers). Bounded drift terms
# cannot contain linear growth, and even an asymptotically stable but
# non-normal map can launch multi-step excursions far outside the range
# the noise levels assume.
STABILITY_LIMIT = 0.95
TRANSIENT_LIMIT = 1.0
_MAX_REJECTION_DRAWS = 10_000


def generate_adjacency(
    seed: int,
    scale: int,
    n: int,
    transitions: TransitionSpec | None = None,
    num_scales: int | None = None,
) -> np.ndarray:
    """Seeded binary adjacency draw for one scale.

    At the coarsest scale the draw is rejection-sampled until the
    linearized coarse update is contractive and free of transient
    amplification (see ``coarse_linear_gain`` / ``coarse_transient_gain``);
    fine scales need no guard because their adjacency enters inside a
    bounded nonlinearity.
    """
    rng = derive_rng(seed, StreamPurpose.STRUCTURE_ADJACENCY, scale)
    coarsest = num_scales is not None and scale == num_scales - 1
    for _ in range(_MAX_REJECTION_DRAWS):
        a = rng.integers(0, 2, size=(n, n)).astype(float)
        if not coarsest or transitions is None:
            return a
        feedback = (
            transitions.fine[-1].param("coarse_gain") if transitions.fine else 0.0
        )
        if (
            coarse_linear_gain(transitions.coarse, feedback, a) <= STABILITY_LIMIT
            and coarse_transient_gain(transitions.coarse, feedback, a)
            <= TRANSIENT_LIMIT
        ):
            return a
    raise RuntimeError(
        f"no stable adjacency draw found in {_MAX_REJECTION_DRAWS} attempts"
    )


def generate_interaction(seed: int, num_individuals: int) -> np.ndarray:
    """Identity plus one seeded off-diagonal unit entry (identity when D = 1)."""
    b = np.eye(num_individuals)
    if num_individuals < 2:
        return b
    rng = derive_rng(seed, StreamPurpose.STRUCTURE_INTERACTION)
    k = int(rng.integers(0, num_individuals * (num_individuals - 1)))
    r, rem = divmod(k, num_individuals - 1)
    c = rem if rem < r else rem + 1
    b[r, c] = 1.0
    return b


def _noise_matrix(entry, n: int, label: str) -> np.ndarray:
    if isinstance(entry, (int, float)):
        return float(entry) * np.eye(n)
    mat = np.asarray(entry, dtype=float)
    if mat.shape != (n, n):
        raise ValueError(f"{label}: expected scalar or ({n}, {n}) matrix, got shape {mat.shape}")
    return mat


def _drift_spec(raw: dict, label: str) -> DriftSpec:
    if "kind" not in raw:
        raise ValueError(f"{label} is missing its 'kind'")
    params = {k: float(v) for k, v in raw.items() if k != "kind"}
    return DriftSpec(kind=str(raw["kind"]), params=params)


_REQUIRED_KEYS = (
    "num_scales",
    "num_individuals",
    "state_dims",
    "horizons",
    "num_models",
    "process_noise",
    "measurement_noise",
    "adjacency",
    "interaction",
    "measurement_rotation",
    "dirichlet_alpha",
    "initial_states",
    "seed",
    "transitions",
)


def load_experiment(
    path: str | Path, seed: int | None = None
) -> tuple[ScaleSystemConfig, RegimeSchedule]:
    """Parse a config file and resolve any structure recipes.

    ``seed`` overrides the file's master seed before resolution, so the same
    file reproduces different structure realizations per seed. Structural
    problems raise ValueError; semantic violations are left to
    ``validate_config`` so callers can report them all at once.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ValueError(f"config file {path} is not parseable: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config file {path} does not hold a mapping")
    missing = [k for k in _REQUIRED_KEYS if k not in raw]
    if missing:
        raise ValueError(f"config file {path} is missing keys: {missing}")

    L = int(raw["num_scales"])
    D = int(raw["num_individuals"])
    dims = [int(v) for v in raw["state_dims"]]
    horizons = [int(v) for v in raw["horizons"]]
    use_seed = int(raw["seed"]) if seed is None else int(seed)

    tr_raw = raw["transitions"]
    transitions = TransitionSpec(
        fine=tuple(
            _drift_spec(s, f"transitions.fine[{i}]")
            for i, s in enumerate(tr_raw.get("fine", []) or [])
        ),
        coarse=tuple(
            _drift_spec(s, f"transitions.coarse[{i}]")
            for i, s in enumerate(tr_raw.get("coarse", []) or [])
        ),
    )

    def noise_rows(key: str):
        rows = raw[key]
        if len(rows) != D:
            raise ValueError(f"{key}: expected {D} rows, got {len(rows)}")
        return tuple(
            tuple(
                _noise_matrix(entry, dims[l], f"{key}[{d}][{l}]")
                for l, entry in enumerate(row)
            )
            for d, row in enumerate(rows)
        )

    adjacency = []
    for l, entry in enumerate(raw["adjacency"]):
        if entry == ADJACENCY_RECIPE:
            adjacency.append(
                generate_adjacency(use_seed, l, dims[l], transitions, num_scales=L)
            )
        elif isinstance(entry, str):
            raise ValueError(f"adjacency[{l}]: unknown recipe {entry!r}")
        else:
            adjacency.append(np.asarray(entry, dtype=float))

    inter_raw = raw["interaction"]
    if inter_raw == INTERACTION_RECIPE:
        interaction = generate_interaction(use_seed, D)
    elif isinstance(inter_raw, str):
        raise ValueError(f"interaction: unknown recipe {inter_raw!r}")
    else:
        interaction = np.asarray(inter_raw, dtype=float)

    weights_raw = raw.get("fine_summary_weights", ["uniform"] * max(L - 1, 0))
    weights = []
    for l, entry in enumerate(weights_raw):
        if entry == "uniform":
            weights.append(np.ones(horizons[l] if l < len(horizons) else 1))
        else:
            weights.append(np.asarray(entry, dtype=float))

    cfg = ScaleSystemConfig(
        num_scales=L,
        num_individuals=D,
        state_dims=tuple(dims),
        horizons=tuple(horizons),
        num_models=int(raw["num_models"]),
        process_noise=noise_rows("process_noise"),
        measurement_noise=noise_rows("measurement_noise"),
        adjacency=tuple(adjacency),
        interaction=interaction,
        measurement_rotation=tuple(float(v) for v in raw["measurement_rotation"]),
        dirichlet_alpha=np.asarray(raw["dirichlet_alpha"], dtype=float),
        fine_summary_weights=tuple(weights),
        initial_states=np.asarray(raw["initial_states"], dtype=float),
        seed=use_seed,
        transitions=transitions,
    )

    num_steps = horizons[-1] if horizons else 0
    regimes = raw.get("regimes")
    if regimes is None:
        schedule = RegimeSchedule(models=np.zeros((D, num_steps), dtype=np.int64))
    elif "thirds" in regimes:
        schedule = thirds_schedule(np.asarray(regimes["thirds"]), num_steps)
    elif "table" in regimes:
        schedule = RegimeSchedule(models=np.asarray(regimes["table"], dtype=np.int64))
    else:
        raise ValueError("regimes must provide 'thirds' or 'table'")
    if schedule.models.shape[0] != D:
        raise ValueError(
            f"regimes cover {schedule.models.shape[0]} individuals, expected {D}"
        )
    return cfg, schedule


def _drift_to_raw(spec: DriftSpec) -> dict:
    out: dict = {"kind": spec.kind}
    out.update({k: float(v) for k, v in spec.params.items()})
    return out


def dump_experiment(
    cfg: ScaleSystemConfig, schedule: RegimeSchedule, path: str | Path
) -> None:
    """Serialize a resolved config (explicit matrices) plus its schedule."""
    raw = {
        "num_scales": cfg.num_scales,
        "num_individuals": cfg.num_individuals,
        "state_dims": list(cfg.state_dims),
        "horizons": list(cfg.horizons),
        "num_models": cfg.num_models,
        "process_noise": [
            [m.tolist() for m in row] for row in cfg.process_noise
        ],
        "measurement_noise": [
            [m.tolist() for m in row] for row in cfg.measurement_noise
        ],
        "adjacency": [a.tolist() for a in cfg.adjacency],
        "interaction": cfg.interaction.tolist(),
        "measurement_rotation": list(cfg.measurement_rotation),
        "dirichlet_alpha": cfg.dirichlet_alpha.tolist(),
        "fine_summary_weights": [w.tolist() for w in cfg.fine_summary_weights],
        "initial_states": cfg.initial_states.tolist(),
        "seed": cfg.seed,
        "transitions": {
            "fine": [_drift_to_raw(s) for s in cfg.transitions.fine],
            "coarse": [_drift_to_raw(s) for s in cfg.transitions.coarse],
        },
        "regimes": {"table": schedule.models.tolist()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(raw, fh, sort_keys=False)


# ---------------------------------------------------------------------------
# Canonical experiment builders. The shipped configs/sim1.config and
# configs/sim2.config files encode exactly these systems; a test keeps them
# in sync.

_COARSE_PROCESS_VARS = (0.5, 0.4, 0.5, 0.7, 0.3, 0.4)
_FINE_PROCESS_VAR = 0.05
_COARSE_MEAS_VAR = 0.02
_FINE_MEAS_VAR = 0.03
_INITIAL_CYCLE = (0.2, 0.5, 0.7)


def _study_transitions() -> TransitionSpec:
    return TransitionSpec(
        fine=(DriftSpec("cosine-mix", {"offset": 1.0, "coarse_gain": 0.6}),),
        coarse=(
            DriftSpec(
                "sine",
                {
                    "amplitude": 3.0,
                    "phase": float(np.pi / 4),
                    "fine_gain": 1.0,
                    "coupling_gain": 0.5,
                    "adjacency_gain": 0.3,
                },
            ),
            DriftSpec(
                "damped-cosine",
                {
                    "amplitude": 2.0,
                    "frequency": 1.2,
                    "decay": 0.05,
                    "fine_gain": 1.0,
                    "coupling_gain": 1.0,
                    "adjacency_gain": 0.5,
                },
            ),
        ),
    )


def _study_config(
    seed: int, num_coarse_steps: int, fine_window: int, structure_seed: int
) -> ScaleSystemConfig:
    D = 6
    transitions = _study_transitions()
    return ScaleSystemConfig(
        num_scales=2,
        num_individuals=D,
        state_dims=(3, 3),
        horizons=(fine_window, num_coarse_steps),
        num_models=2,
        process_noise=tuple(
            (
                _FINE_PROCESS_VAR * np.eye(3),
                _COARSE_PROCESS_VARS[d % len(_COARSE_PROCESS_VARS)] * np.eye(3),
            )
            for d in range(D)
        ),
        measurement_noise=tuple(
            (_FINE_MEAS_VAR * np.eye(3), _COARSE_MEAS_VAR * np.eye(3)) for d in range(D)
        ),
        adjacency=(
            generate_adjacency(structure_seed, 0, 3, transitions, num_scales=2),
            generate_adjacency(structure_seed, 1, 3, transitions, num_scales=2),
        ),
        interaction=generate_interaction(structure_seed, D),
        measurement_rotation=(0.0, 0.0),
        dirichlet_alpha=np.ones(2),
        fine_summary_weights=(np.ones(fine_window),),
        initial_states=np.array([_INITIAL_CYCLE[d % 3] for d in range(D)]),
        seed=seed,
        transitions=transitions,
    )


def build_sim1(
    seed: int = DEFAULT_SEED,
    num_coarse_steps: int = 100,
    fine_window: int = 50,
    structure_seed: int | None = None,
) -> tuple[ScaleSystemConfig, RegimeSchedule]:
    """First simulation study: shared 0/1/0 regime thirds across six individuals.

    ``seed`` drives the noise streams only; the structure matrices come from
    ``structure_seed`` (default: the canonical seed) so repeated runs of the
    same study vary the realization, not the system.
    """
    structure = CANONICAL_STRUCTURE_SEED if structure_seed is None else structure_seed
    cfg = _study_config(seed, num_coarse_steps, fine_window, structure)
    return cfg, build_sim1_schedule(num_coarse_steps, cfg.num_individuals)


def build_sim2(
    seed: int = DEFAULT_SEED,
    num_coarse_steps: int = 100,
    fine_window: int = 50,
    structure_seed: int | None = None,
) -> tuple[ScaleSystemConfig, RegimeSchedule]:
    """Second simulation study: per-individual regime thirds patterns.

    Seed semantics match ``build_sim1``.
    """
    structure = CANONICAL_STRUCTURE_SEED if structure_seed is None else structure_seed
    cfg = _study_config(seed, num_coarse_steps, fine_window, structure)
    return cfg, build_sim2_schedule(num_coarse_steps, cfg.num_individuals)


def build_linear_gaussian(
    dim: int = 3,
    horizon: int = 150,
    drift_gain: float = 0.9,
    process_var: float = 0.5,
    measurement_var: float = 0.5,
    seed: int = DEFAULT_SEED,
    initial: float = 0.5,
) -> tuple[ScaleSystemConfig, RegimeSchedule]:
    """Single-scale, single-model linear-Gaussian system.

    ``x_t = drift_gain * x_{t-1} + w`` observed through the identity; the
    exact posterior is available in closed form, which makes this the
    benchmark configuration for checking the filter against a Kalman
    recursion.
    """
    cfg = ScaleSystemConfig(
        num_scales=1,
        num_individuals=1,
        state_dims=(dim,),
        horizons=(horizon,),
        num_models=1,
        process_noise=((process_var * np.eye(dim),),),
        measurement_noise=((measurement_var * np.eye(dim),),),
        adjacency=(np.eye(dim),),
        interaction=np.eye(1),
        measurement_rotation=(0.0,),
        dirichlet_alpha=np.ones(1),
        fine_summary_weights=(),
        initial_states=np.array([float(initial)]),
        seed=seed,
        transitions=TransitionSpec(
            fine=(),
            coarse=(DriftSpec("linear", {"adjacency_gain": float(drift_gain)}),),
        ),
    )
    schedule = RegimeSchedule(models=np.zeros((1, horizon), dtype=np.int64))
    return cfg, schedule
