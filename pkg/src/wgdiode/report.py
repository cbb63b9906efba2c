"""Figure rendering for the CLI report path (heatmaps and curves to PNG)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sweep import OptimizeResult, SweepGrid

__all__ = ["render_sweep", "render_optimize", "render_validate"]


def _cell_array(grid: SweepGrid, attr: str) -> np.ndarray:
    out = np.full((len(grid.delta_values), len(grid.kl_values)), np.nan)
    for i in range(len(grid.delta_values)):
        for j in range(len(grid.kl_values)):
            m = grid.metrics[i][j]
            if m.ok:
                out[i, j] = getattr(m, attr)
    return out


def render_sweep(grid: SweepGrid, path: Path, clamped: bool = False) -> Path:
    """Two-panel map of rectification and diode efficiency over the grid."""
    rect = _cell_array(grid, "rectification")
    eff = _cell_array(grid, "efficiency_clamped" if clamped else "efficiency")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    titles = ["rectification", "diode efficiency" + (" (clamped)" if clamped else "")]
    for ax, data, title in zip(axes, [rect, eff], titles):
        vmax = np.nanmax(np.abs(data)) or 1.0
        mesh = ax.pcolormesh(grid.kl_values, grid.delta_values, data,
                             shading="nearest", cmap="RdBu_r", vmin=-vmax, vmax=vmax)
        ax.set_xlabel(r"$kL$")
        ax.set_ylabel(r"$\Delta_1 / \gamma$")
        ax.set_title(title)
        fig.colorbar(mesh, ax=ax)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_optimize(results: list[OptimizeResult], path: Path) -> Path:
    """Optimised diode efficiency against the noise-to-signal ratio."""
    ratios = [r.noise_ratio for r in results]
    d_opt = [r.d_opt for r in results]
    fig, ax = plt.subplots(figsize=(5.5, 4), constrained_layout=True)
    ax.plot(ratios, d_opt, "o-", color="tab:blue")
    ax.set_xlabel(r"noise-to-signal ratio $\Gamma_n / |E|^2$")
    ax.set_ylabel(r"optimised efficiency $D_{\mathrm{opt}}$")
    ax.grid(True, alpha=0.4)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def render_validate(payload: dict, path: Path) -> Path:
    """Ensemble fluxes with error bars against the deterministic prediction."""
    ens = payload["ensemble"]
    det = payload["deterministic"]
    labels = ["phi_r_out", "phi_l_out"]
    mc = [ens["phi_r_out"], ens["phi_l_out"]]
    se = [ens["se_r"], ens["se_l"]]
    ref = [det["phi_r_out"], det["phi_l_out"]]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(5, 4), constrained_layout=True)
    ax.errorbar(x - 0.08, mc, yerr=[3 * s for s in se], fmt="o", capsize=4,
                label="trajectories (3 s.e.)")
    ax.plot(x + 0.08, ref, "s", color="tab:red", label="dephasing channel")
    ax.set_xticks(x, labels)
    ax.set_ylabel("output flux")
    ax.legend()
    ax.set_title(f"trace distance {payload['trace_distance']:.4f} "
                 f"(bound {payload['trace_distance_bound']:.4f})")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
