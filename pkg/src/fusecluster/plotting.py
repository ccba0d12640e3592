"""Report figures. Uses the non-interactive Agg backend; every function writes
one file and returns its path."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata so PNG bytes do not depend on the matplotlib build date
_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_fused(M, path, title="fused matrix"):
    """Spy plot of the nonzero pattern with the block boundaries marked."""
    fig, ax = plt.subplots(figsize=(6, 5))
    ax.spy(M.values, markersize=0.6, aspect="auto", color="k")
    ax.axhline(M.n - 0.5, color="tab:red", lw=0.8)
    ax.axvline(M.p - 0.5, color="tab:red", lw=0.8)
    ax.set_xlabel(f"features (p={M.p} visual, q={M.q} text)")
    ax.set_ylabel(f"documents (n={M.n} images, k={M.k} articles)")
    ax.set_title(title)
    return _save(fig, path)


def plot_cost_trace(factors, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    trace = np.asarray(factors.cost_trace)
    ax.semilogy(np.arange(1, len(trace) + 1), np.maximum(trace, 1e-300))
    ax.set_xlabel("iteration")
    ax.set_ylabel(r"$\|M - UV\|_F^2$")
    ax.set_title(f"NMF cost, k*={factors.k_star}")
    return _save(fig, path)


def plot_variants(aggregate: dict, path):
    """Mean purity and z-Rand per variant with one-std error bars."""
    names = list(aggregate)
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.5))
    for ax, key in zip(axes, ("purity", "zrand")):
        means = [aggregate[v][f"{key}_mean"] or 0.0 for v in names]
        stds = [aggregate[v][f"{key}_std"] or 0.0 for v in names]
        ax.bar(names, means, yerr=stds, capsize=4, color="0.6", edgecolor="k")
        ax.set_ylabel(key)
    axes[0].set_ylim(0, 1)
    fig.suptitle("variant comparison")
    return _save(fig, path)


def plot_sweep(fractions, purity_means, purity_stds, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(fractions, purity_means, yerr=purity_stds, marker="o", capsize=3)
    ax.set_xlabel("labeled fraction")
    ax.set_ylabel("purity")
    ax.set_ylim(0, 1.02)
    return _save(fig, path)
