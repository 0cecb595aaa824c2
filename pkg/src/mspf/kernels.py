"""Stochastic and linear-algebra primitives shared by the simulator and filter.

Everything here is deterministic given its inputs: samplers consume an
explicitly derived numpy ``Generator``, densities and reductions are pure
functions. Particle weights live in log domain end to end; conversion to
probabilities happens only inside :func:`normalize_log_weights` via
max-subtraction.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "DegenerateWeightsError",
    "NotPositiveDefiniteError",
    "StreamPurpose",
    "derive_rng",
    "cholesky_factor",
    "gaussian_logpdf",
    "sample_gaussian",
    "sample_dirichlet",
    "sample_dirichlet_rows",
    "sample_categorical",
    "sample_categorical_rows",
    "normalize_log_weights",
    "effective_sample_size",
    "systematic_resample",
    "weighted_time_average",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


class DegenerateWeightsError(RuntimeError):
    """Every log-weight is -inf: no particle explains the data."""


class NotPositiveDefiniteError(ValueError):
    """A covariance expected to be positive definite failed its Cholesky."""


class StreamPurpose(IntEnum):
    """Namespace tags separating the random streams derived from one seed.

    Each (seed, purpose, *key) tuple names exactly one stream; distinct
    tuples give statistically independent streams. Simulator and filter use
    disjoint purposes so sharing a master seed never aliases draws.
    """

    STRUCTURE_ADJACENCY = 1
    STRUCTURE_INTERACTION = 2
    SIM_PROCESS = 3
    SIM_MEASUREMENT = 4
    PF_FINE_PROCESS = 5
    PF_FINE_RESAMPLE = 6
    PF_MODEL_PROBS = 7
    PF_CANDIDATE = 8
    PF_SELECT = 9
    PF_REDRAW = 10
    PF_COARSE_RESAMPLE = 11
    TEST = 99


def derive_rng(master_seed: int, purpose: int, *key: int) -> np.random.Generator:
    """Deterministic generator for (master_seed, purpose, *key).

    The same tuple always yields the same stream; any differing component
    yields an independent one. Components must be non-negative integers.
    """
    entropy = [int(master_seed), int(purpose), *(int(k) for k in key)]
    if any(e < 0 for e in entropy):
        raise ValueError(f"stream key components must be non-negative: {entropy}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def cholesky_factor(cov: np.ndarray, name: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor of ``cov``; raises naming the matrix if not PD.

    No jitter is ever added: a covariance that fails its factorization is a
    configuration error, not something to paper over.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise NotPositiveDefiniteError(f"{name} must be square, got shape {cov.shape}")
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            f"{name} is not positive definite: {np.array2string(cov, precision=6)}"
        ) from exc


def gaussian_logpdf(
    x: np.ndarray,
    mean: np.ndarray | float,
    cov: np.ndarray,
    name: str = "covariance",
) -> np.ndarray | float:
    """Multivariate normal log-density, evaluated point-wise.

    ``x`` may be a single vector ``(n,)`` or a batch ``(k, n)``; ``mean``
    broadcasts against it. Returns a scalar for vector input, ``(k,)`` for a
    batch. ``cov`` must be positive definite (zero is rejected here; the
    limiting delta case is only meaningful for sampling).
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    chol = cholesky_factor(cov, name=name)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    resid = np.atleast_2d(x - np.asarray(mean, dtype=float))
    n = cov.shape[0]
    if resid.shape[-1] != n:
        raise ValueError(f"dimension mismatch: x has {resid.shape[-1]} dims, cov has {n}")
    z = solve_triangular(chol, resid.T, lower=True)
    quad = np.sum(z * z, axis=0)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    out = -0.5 * (n * _LOG_2PI + logdet + quad)
    return float(out[0]) if single else out


def sample_gaussian(
    mean: np.ndarray,
    cov: np.ndarray,
    rng: np.random.Generator,
    size: int | None = None,
) -> np.ndarray:
    """Draw ``mean + chol(cov) @ z`` with ``z`` standard normal.

    ``mean`` may be ``(n,)`` (then ``size`` draws that many rows) or ``(k, n)``
    for one draw per row. An all-zero covariance is the limiting PSD case and
    returns the mean exactly; any other non-PD covariance raises.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    n = cov.shape[0]
    if mean.ndim == 2:
        if size is not None:
            raise ValueError("size must be None when mean is a batch of rows")
        shape: tuple[int, ...] = mean.shape
    elif size is None:
        shape = (n,)
    else:
        shape = (int(size), n)
    if not np.any(cov):
        return mean + np.zeros(shape)
    chol = cholesky_factor(cov, name="covariance")
    z = rng.standard_normal(shape)
    return mean + z @ chol.T


def sample_dirichlet_rows(alphas: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One Dirichlet draw per row of ``alphas`` (k, m), via gamma normalization."""
    alphas = np.asarray(alphas, dtype=float)
    if np.any(alphas <= 0.0):
        raise ValueError("Dirichlet parameters must be strictly positive")
    gammas = rng.standard_gamma(alphas)
    sums = gammas.sum(axis=-1, keepdims=True)
    if np.any(sums == 0.0):
        raise RuntimeError("Dirichlet gamma draws underflowed to zero")
    return gammas / sums


def sample_dirichlet(alpha: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Single Dirichlet draw for parameter vector ``alpha``."""
    return sample_dirichlet_rows(np.asarray(alpha, dtype=float)[None, :], rng)[0]


def _check_simplex(probs: np.ndarray, what: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0.0) or np.any(~np.isfinite(probs)):
        raise ValueError(f"{what} must be finite and non-negative")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise ValueError(f"{what} must sum to 1 within 1e-9")
    return probs


def sample_categorical_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical index per row of ``probs`` (k, m)."""
    probs = _check_simplex(np.atleast_2d(probs), "categorical probabilities")
    cum = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])
    idx = (cum < u[:, None]).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Single categorical draw from a probability vector."""
    return int(sample_categorical_rows(np.asarray(probs, dtype=float)[None, :], rng)[0])


def normalize_log_weights(log_weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Log weights -> (probabilities, log normalizer), via max-subtraction.

    -inf entries are allowed (zero probability); if every entry is -inf there
    is nothing to normalize and :class:`DegenerateWeightsError` is raised.
    +inf or NaN entries are rejected outright.
    """
    logw = np.asarray(log_weights, dtype=float)
    if np.any(np.isnan(logw)) or np.any(logw == np.inf):
        raise ValueError("log weights must not contain NaN or +inf")
    m = logw.max(initial=-np.inf)
    if m == -np.inf:
        raise DegenerateWeightsError("all log weights are -inf")
    shifted = np.exp(logw - m)
    total = float(shifted.sum())
    return shifted / total, float(m + np.log(total))


def effective_sample_size(probs: np.ndarray) -> float:
    """ESS = 1 / sum(p_i^2) of normalized weights; N for uniform, 1 for a point mass."""
    probs = np.asarray(probs, dtype=float)
    return float(1.0 / np.sum(probs * probs))


def systematic_resample(
    probs: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Low-variance systematic resampling: ancestor indices for ``count`` draws.

    A single uniform offsets an evenly spaced grid through the CDF, so each
    index's multiplicity deviates from ``count * p_i`` by less than one.
    """
    probs = _check_simplex(np.asarray(probs, dtype=float), "resampling weights")
    if count <= 0:
        raise ValueError("count must be positive")
    positions = (rng.random() + np.arange(count)) / count
    cum = np.cumsum(probs)
    cum[-1] = 1.0  # guard the tail against accumulated rounding
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, probs.size - 1).astype(np.int64)


def weighted_time_average(trajectory: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted average over the time axis of a fine-scale window.

    ``trajectory`` is ``(T, n)`` or batched ``(k, T, n)`` (time on the second
    to last axis); ``weights`` is ``(T,)``, non-negative with positive sum.
    """
    traj = np.asarray(trajectory, dtype=float)
    w = np.asarray(weights, dtype=float)
    if traj.ndim < 2:
        raise ValueError("trajectory must have a (time, dim) layout")
    if w.ndim != 1 or traj.shape[-2] != w.size:
        raise ValueError(
            f"weights length {w.size} does not match window length {traj.shape[-2]}"
        )
    if np.any(w < 0.0):
        raise ValueError("summary weights must be non-negative")
    total = float(w.sum())
    if total <= 0.0:
        raise ValueError("summary weights must have positive sum")
    return np.tensordot(traj, w, axes=([-2], [0])) / total
