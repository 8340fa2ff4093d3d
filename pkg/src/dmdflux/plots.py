"""Figure rendering for the report path.

Every helper writes a PNG next to the delimited output and returns the path.
The module forces the Agg backend so rendering works headless.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return path


def save_energy_decay(path, singular_values, rank, epsilon, title=""):
    """Snapshot-energy deficit against the retained rank."""
    s = np.asarray(singular_values, dtype=float)
    sq = s * s
    tails = np.concatenate([np.cumsum(sq[::-1])[::-1][1:], [0.0]]) / sq.sum()
    ks = np.arange(1, s.size + 1)
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    positive = tails > 0
    ax.semilogy(ks[positive], tails[positive], "b.-", lw=0.8, ms=3)
    ax.axhline(epsilon, color="gray", ls="--", lw=0.8, label=f"threshold {epsilon:g}")
    ax.axvline(rank, color="r", ls=":", lw=0.8, label=f"rank {rank}")
    ax.set_xlabel("rank")
    ax.set_ylabel("energy deficit")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def save_interface_profiles(path, mesh1, profiles, title=""):
    """Solution traces along the interface, one line per scheme."""
    ys = mesh1.coords[mesh1.gamma_nodes, 1]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for label, values in profiles.items():
        style = "k-" if label == "monolithic" else None
        if style:
            ax.plot(ys, values, style, lw=1.2, label=label)
        else:
            ax.plot(ys, values, lw=0.9, ls="--", marker=".", ms=2, label=label)
    ax.set_xlabel("y")
    ax.set_ylabel("u on the interface")
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    return _finish(fig, path)


def save_solution_surface(path, full_mesh, nodal_values, title=""):
    """Surface plot of a full-domain nodal field."""
    nx, ny = full_mesh.nx, full_mesh.ny
    x = full_mesh.coords[:, 0].reshape(nx, ny)
    y = full_mesh.coords[:, 1].reshape(nx, ny)
    z = np.asarray(nodal_values).reshape(nx, ny)
    fig = plt.figure(figsize=(5.0, 4.0))
    ax = fig.add_subplot(projection="3d")
    ax.plot_surface(x, y, z, cmap="viridis", linewidth=0, antialiased=True)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    return _finish(fig, path)


def save_sync_times(path, timings, title=""):
    """Bar chart of median per-step synchronization times."""
    labels = list(timings)
    values = [timings[k]["per_step"] * 1e6 for k in labels]
    fig, ax = plt.subplots(figsize=(4.4, 3.2))
    ax.bar(labels, values, color="steelblue")
    ax.set_ylabel("median sync time per step [us]")
    if title:
        ax.set_title(title)
    return _finish(fig, path)
