"""SVG renderings of the CSV outputs (convenience only)."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402

plt.rcParams["svg.hashsalt"] = "bohmsteer"


def _header(path: Path) -> tuple[str, ...]:
    with open(path, newline="", encoding="utf-8") as fh:
        return tuple(next(csv.reader(fh)))


def _trajectories(ax, path):
    groups = io.read_trajectories(path)
    thetas = sorted({g["theta_deg"] for g in groups.values() if g["theta_deg"] is not None})
    colors = dict(zip(thetas, plt.cm.viridis(np.linspace(0, 0.9, max(len(thetas), 1)))))
    for g in groups.values():
        if g["theta_deg"] is None:
            ax.plot(g["z"], g["x"] * 1e3, color="k", lw=0.6, ls="--")
        else:
            ax.plot(g["z"], g["x"] * 1e3, color=colors[g["theta_deg"]], lw=0.8)
    for t in thetas:
        ax.plot([], [], color=colors[t], label=f"θ = {t:g}°")
    if thetas:
        ax.legend(fontsize=7, loc="upper left")
    ax.axhline(0.0, color="k", lw=0.5, ls=":")
    ax.set_xlabel("z (m)")
    ax.set_ylabel("x (mm)")


def _heat(ax, x, z, values, label):
    vmax = float(np.max(np.abs(values))) if values.count() else 1.0
    mesh = ax.pcolormesh(z, x * 1e3, values.T, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="nearest")
    plt.colorbar(mesh, ax=ax, label=label)
    ax.axhline(0.0, color="k", lw=0.5, ls=":")
    ax.set_xlabel("z (m)")
    ax.set_ylabel("x (mm)")


def render_csv(path, out_path) -> Path:
    path, out_path = Path(path), Path(out_path)
    header = _header(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    if header == io.TRAJECTORY_COLUMNS:
        _trajectories(ax, path)
    elif header == io.MAP_COLUMNS:
        x, z, dv = io.read_map(path)
        _heat(ax, x, z, dv, "Δv / c")
    elif header == io.PROFILE_COLUMNS:
        profiles = io.read_profiles(path)
        zs = sorted(profiles)
        for z in zs:
            xs, v = profiles[z]
            ax.plot(xs * 1e3, v, lw=0.5)
        ax.set_xlabel("x (mm)")
        ax.set_ylabel("v / c")
    else:
        plt.close(fig)
        raise ValueError(f"{path}: unrecognised CSV columns {header}")
    ax.set_title(path.stem, fontsize=8)
    fig.tight_layout()
    tmp = out_path.with_name(f".{out_path.name}.tmp")
    fig.savefig(tmp, format="svg", metadata={"Date": None})
    plt.close(fig)
    tmp.replace(out_path)
    return out_path
