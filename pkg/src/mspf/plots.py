"""Diagnostic figures rendered next to the delimited outputs.

Figures are PNGs with the software metadata chunk stripped so repeated runs
produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .types import FilterOutput, GroundTruth

__all__ = ["save_state_figure", "save_indicator_figure"]

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": None}}


def save_state_figure(
    truth: GroundTruth,
    out: FilterOutput,
    scale: int,
    path: str | Path,
    max_individuals: int | None = None,
) -> None:
    """Truth vs estimate per individual and dimension at one scale."""
    tru = truth.states[scale]
    est = out.state_estimates[scale]
    num_ind = tru.shape[0] if max_individuals is None else min(tru.shape[0], max_individuals)
    dims = tru.shape[2]
    fig, axes = plt.subplots(
        num_ind,
        dims,
        figsize=(4.0 * dims, 2.2 * num_ind),
        sharex=True,
        squeeze=False,
    )
    steps = np.arange(1, tru.shape[1] + 1)
    for d in range(num_ind):
        for n in range(dims):
            ax = axes[d][n]
            ax.plot(steps, tru[d, :, n], lw=1.0, label="truth")
            ax.plot(steps, est[d, :, n], lw=1.0, ls="--", label="estimate")
            if d == 0 and n == 0:
                ax.legend(loc="upper right", fontsize=7)
            if n == 0:
                ax.set_ylabel(f"ind {d}", fontsize=8)
            if d == 0:
                ax.set_title(f"dim {n}", fontsize=9)
    fig.suptitle(f"scale {scale} states")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)


def save_indicator_figure(
    truth: GroundTruth, out: FilterOutput, path: str | Path
) -> None:
    """True vs MAP regime per individual as step plots."""
    tru = truth.indicators
    est = out.indicator_map
    num_ind = tru.shape[0]
    fig, axes = plt.subplots(
        num_ind, 1, figsize=(8.0, 1.6 * num_ind), sharex=True, squeeze=False
    )
    steps = np.arange(1, tru.shape[1] + 1)
    for d in range(num_ind):
        ax = axes[d][0]
        ax.step(steps, tru[d], where="post", lw=1.2, label="truth")
        ax.step(steps, est[d], where="post", lw=1.0, ls="--", label="MAP")
        ax.set_ylabel(f"ind {d}", fontsize=8)
        ax.set_yticks(sorted(set(np.unique(tru)) | set(np.unique(est))))
        if d == 0:
            ax.legend(loc="upper right", fontsize=7)
    axes[-1][0].set_xlabel("coarse step")
    fig.suptitle("regime indicators")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KWARGS)
    plt.close(fig)
