"""Figures written next to the CSV outputs (objective traces, summaries, centroids)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import PALETTE  # noqa: E402

plt.rcParams["axes.grid"] = True
plt.rcParams["grid.alpha"] = 0.3
plt.rcParams["savefig.dpi"] = 120
plt.rcParams["font.size"] = 10


def _colors(r):
    return PALETTE[np.arange(r) % len(PALETTE)] / 255.0


def plot_traces(reports, path, title=None):
    """Objective value per iteration, one line per successful run."""
    fig, ax = plt.subplots(figsize=(6, 4))
    styles = {"fro": "-", "kl": "--"}
    for rep in reports:
        if rep.failed or not rep.objective:
            continue
        obj = np.asarray(rep.objective, dtype=float)
        obj = np.where(np.isfinite(obj), obj, np.nan)
        ax.plot(np.arange(1, obj.size + 1), obj, styles.get(rep.algorithm, "-"),
                lw=1, alpha=0.7, label=f"{rep.dataset}/{rep.algorithm}")
    handles, labels = ax.get_legend_handles_labels()
    uniq = dict(zip(labels, handles))
    if uniq:
        ax.legend(uniq.values(), uniq.keys(), fontsize="small")
    ax.set_yscale("symlog", linthresh=1e-12)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_summary(summaries, path):
    """Grouped bars of the mean metric and mean time per dataset and algorithm."""
    datasets = list(dict.fromkeys(s.dataset for s in summaries))
    algorithms = list(dict.fromkeys(s.algorithm for s in summaries))
    lookup = {(s.dataset, s.algorithm): s for s in summaries}
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    width = 0.8 / max(len(algorithms), 1)
    x = np.arange(len(datasets))
    colors = _colors(len(algorithms))
    metric_names = {s.metric_name for s in summaries if s.metric_name}
    for a, alg in enumerate(algorithms):
        for ax, attr in zip(axes, ("metric_mean", "mean_time_s")):
            vals = [getattr(lookup[(d, alg)], attr) if (d, alg) in lookup else np.nan for d in datasets]
            ax.bar(x + a * width - 0.4 + width / 2, vals, width, label=alg, color=colors[a])
    axes[0].set_ylabel(" / ".join(sorted(metric_names)) or "metric")
    axes[1].set_ylabel("mean time (s)")
    for ax in axes:
        ax.set_xticks(x)
        ax.set_xticklabels(datasets, rotation=30, ha="right")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def plot_centroids(w, path, wavelengths=None, title=None):
    """Columns of W as curves, e.g. spectral signatures of the extracted endmembers."""
    w = np.asarray(w, dtype=float)
    xs = np.arange(w.shape[0]) if wavelengths is None else np.asarray(wavelengths)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, c in enumerate(_colors(w.shape[1])):
        ax.plot(xs, w[:, k], color=c, label=f"cluster {k}")
    ax.set_xlabel("band" if wavelengths is None else "wavelength (nm)")
    ax.set_ylabel("centroid value")
    ax.legend(fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
