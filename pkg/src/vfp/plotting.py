"""SVG line charts. Output is byte-reproducible (fixed hash salt, no date)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "vfp"
_META = {"Date": None, "Creator": "vfp"}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata=_META)
    plt.close(fig)


def plot_entropy(traj, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(traj.times, traj.column("entropy"), lw=1.5)
    ax.set_xlabel("t")
    ax.set_ylabel("H = int f log f")
    ax.set_title("entropy")
    _save(fig, path)


def plot_drift(traj, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    t = traj.times
    names = ["mass"] + [f"mom_{k + 1}" for k in range(traj.dim)] + ["energy"]
    for name in names:
        s = traj.column(name)
        ax.plot(t, np.abs(s - s[0]) + 1e-300, label=name)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("|Q(t) - Q(0)|")
    ax.legend()
    ax.set_title("moment drift")
    _save(fig, path)


def plot_residuals(residuals, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    r = np.asarray(residuals, dtype=float)
    ax.semilogy(np.arange(1, len(r) + 1), r, marker="o")
    ax.set_xlabel("iteration n")
    ax.set_ylabel("r_n")
    ax.set_title("Picard residuals")
    _save(fig, path)


def plot_continuation(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    idx = np.arange(len(rows))
    for key in ("dist_rho", "dist_mom", "dist_energy"):
        ax.semilogy(idx, [r[key] for r in rows], marker="o", label=key)
    ax.set_xticks(idx)
    ax.set_xticklabels([f"{r['eps']:g}/{r['delta']:g}" for r in rows], rotation=30)
    ax.set_xlabel("eps/delta")
    ax.set_ylabel("L1 distance")
    ax.legend()
    ax.set_title("continuation distances")
    _save(fig, path)
