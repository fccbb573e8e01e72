"""PNG rendering of scenario results (optional; the CSV files are canonical)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, out_dir: Path, name: str) -> str:
    fig.tight_layout()
    fig.savefig(Path(out_dir) / name, dpi=120)
    plt.close(fig)
    return name


def plot_sweep(sweep, scale: float, out_dir: Path) -> str:
    """Tail mean with tail-std error bars against the sweep variable."""
    pts = [p for p in sweep.points if p.stats is not None]
    x = np.array([p.sweep_value / scale for p in pts])
    mean = np.array([p.stats.tail_mean for p in pts])
    std = np.array([p.stats.tail_std for p in pts])
    fig, (ax, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax.errorbar(x, mean, yerr=std, marker="o", capsize=3)
    ax.set_xlabel(sweep.variable)
    ax.set_ylabel("fidelity (tail mean)")
    ax.set_title(sweep.series)
    for p in pts:
        if p.times is not None:
            ax2.plot(p.times, p.pops[:, 0], lw=0.8, label=f"{p.sweep_value / scale:g}")
    ax2.set_xlabel("t (ns)")
    ax2.set_ylabel("p0")
    if len(pts) <= 10:
        ax2.legend(fontsize=7)
    return _save(fig, out_dir, f"fig_{sweep.series}.png")


def plot_wigner(grid, name: str, out_dir: Path) -> str:
    fig, ax = plt.subplots(figsize=(4.5, 4))
    lim = float(np.max(np.abs(grid.values))) or 1.0
    mesh = ax.pcolormesh(grid.x, grid.p, grid.values.T, cmap="RdBu_r", vmin=-lim, vmax=lim, shading="auto")
    fig.colorbar(mesh, ax=ax)
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    ax.set_aspect("equal")
    ax.set_title(name, fontsize=9)
    return _save(fig, out_dir, f"fig_{name}.png")


def plot_traces(series: dict, title: str, ylabel: str, out_dir: Path, name: str, xlabel: str = "t (ns)") -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, (t, y) in series.items():
        ax.plot(t, y, lw=0.8, label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    return _save(fig, out_dir, name)


def render(figures, out_dir) -> list[str]:
    """Render the ``(kind, payload, extra)`` descriptors collected by the CLI."""
    names = []
    for kind, payload, extra in figures:
        if kind == "sweep":
            names.append(plot_sweep(payload, extra, out_dir))
        elif kind == "wigner":
            names.append(plot_wigner(payload, extra, out_dir))
        elif kind == "rx":
            series = {dyn: (p.times, p.pops[:, 0]) for dyn, p in payload.items() if p.times is not None}
            names.append(plot_traces(series, "R_x(pi/2)", "target population", out_dir, "fig_rx.png"))
        elif kind == "rz":
            series = {k: (payload[k].times, payload[k].pops[:, 0]) for k in ("driven", "control")
                      if payload[k].times is not None}
            names.append(plot_traces(series, "R_z(pi)", "fidelity", out_dir, "fig_rz.png"))
        elif kind == "scan":
            ratios, fid = payload
            names.append(plot_traces({"rwa": (ratios, fid)}, "R_x target population vs |delta0|/chi",
                                     "population at T_g", out_dir, "fig_rx_scan.png", "|delta0|/chi"))
    return names
