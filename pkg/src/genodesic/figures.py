"""Render result tables to PNG files.

Each renderer takes the rows its CSV counterpart stores and writes a
standalone figure next to the delimited output. Only the CSVs carry the
reproducibility guarantee; figures are a convenience view.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_tau_sweep(taus, nmis, out_path, title="NMI vs temperature"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(taus, nmis, marker="o", color="tab:blue")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel("NMI")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_convergence(rows, out_path, title="Geodesic error vs sample size"):
    """rows: (n, mode, mean_err, std_err, fail_count, mean_hausdorff)."""
    modes = []
    for r in rows:
        if r[1] not in modes:
            modes.append(r[1])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    for mode in modes:
        ns = np.array([r[0] for r in rows if r[1] == mode], dtype=float)
        err = np.array([r[2] for r in rows if r[1] == mode], dtype=float)
        std = np.array([r[3] for r in rows if r[1] == mode], dtype=float)
        hd = np.array([r[5] for r in rows if r[1] == mode], dtype=float)
        ax1.errorbar(ns, err, yerr=std, marker="o", capsize=3, label=mode)
        ax2.plot(ns, hd, marker="s", label=mode)
    for ax, ylabel in ((ax1, "mean abs error"), (ax2, "mean Hausdorff")):
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path


def plot_limits(lambdas, gaps, out_path, title="Gap to Euclidean graph distance"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(lambdas, gaps, marker="o", color="tab:red")
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("max gap")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
