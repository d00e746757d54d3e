"""Figure rendering for the report-style CLI outputs (Agg backend)."""

from pathlib import Path
from typing import Optional, Sequence

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# Fixed metadata keeps PNG bytes reproducible across identical runs.
_META = {"Software": "rbcmech"}


def _save(fig, path):
    fig.savefig(path, dpi=130, bbox_inches="tight", metadata=_META)
    plt.close(fig)


def posterior_histograms(samples: np.ndarray, names: Sequence[str], path,
                         bins: int = 40) -> Path:
    """One histogram panel per parameter."""
    n = len(names)
    ncols = min(n, 3)
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows))
    axes = np.atleast_1d(axes).ravel()
    for j, name in enumerate(names):
        ax = axes[j]
        ax.hist(samples[:, j], bins=bins, color="#4878b0", alpha=0.85)
        ax.set_xlabel(name)
        ax.set_yticks([])
    for ax in axes[n:]:
        ax.axis("off")
    fig.tight_layout()
    _save(fig, path)
    return Path(path)


def band_figure(bands: dict, path, data: Optional[dict] = None,
                xlabel: str = "F_ext (pN)") -> Path:
    """Shaded credible bands per output channel with optional data overlay."""
    names = bands["output_names"]
    fig, axes = plt.subplots(1, len(names), figsize=(4.2 * len(names), 3.2))
    axes = np.atleast_1d(axes)
    grid = bands["grid"]
    order = np.argsort(bands["levels"])[::-1]
    shades = np.linspace(0.18, 0.5, len(order))
    for ci, name in enumerate(names):
        ax = axes[ci]
        for si, li in enumerate(order):
            ax.fill_between(grid, bands["lo"][li, :, ci], bands["hi"][li, :, ci],
                            color="#4878b0", alpha=shades[si], linewidth=0,
                            label=f"{bands['levels'][li]:.0%}")
        ax.plot(grid, bands["median"][:, ci], "--", color="#1f3d5c", lw=1.2)
        if data is not None and name in data:
            x, y, yerr = data[name]
            ax.errorbar(x, y, yerr=yerr, fmt="o", ms=4, color="#b04848",
                        capsize=2, lw=1)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(name)
    axes[0].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    _save(fig, path)
    return Path(path)


def profile_figure(r: np.ndarray, z_top: np.ndarray, z_bot: np.ndarray, path,
                   title: str = "") -> Path:
    """Axisymmetric cross-section of a cell shape."""
    fig, ax = plt.subplots(figsize=(4.6, 3.0))
    rr = np.concatenate([-r[::-1], r])
    ax.plot(rr, np.concatenate([z_top[::-1], z_top]), color="#1f3d5c", lw=1.4)
    ax.plot(rr, np.concatenate([z_bot[::-1], z_bot]), color="#1f3d5c", lw=1.4)
    ax.set_aspect("equal")
    ax.set_xlabel("r (um)")
    ax.set_ylabel("z (um)")
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    _save(fig, path)
    return Path(path)


def series_figure(t: np.ndarray, z: np.ndarray, fit: Optional[dict], path) -> Path:
    """Relaxation diameter-ratio series with its exponential fit."""
    fig, ax = plt.subplots(figsize=(4.6, 3.0))
    ax.plot(t, z, "o", ms=3, color="#b04848", label="simulated")
    if fit:
        tt = np.linspace(t[0], t[-1], 300)
        ax.plot(tt, fit["z_inf"] + (fit["z0"] - fit["z_inf"])
                * np.exp(-tt / fit["t_c"]),
                color="#1f3d5c", lw=1.3,
                label=f"fit t_c = {fit['t_c']:.1f} ms")
    ax.set_xlabel("t (ms)")
    ax.set_ylabel("D_ax / D_tr")
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    _save(fig, path)
    return Path(path)
