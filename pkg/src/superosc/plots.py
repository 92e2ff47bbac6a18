"""SVG figures with the configuration hash embedded in the metadata."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "superosc"


def _save(fig, path, config_hash: str, title: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Title": title,
                                              "Description": f"config_hash={config_hash}"})
    plt.close(fig)


def plot_state(path, x, log_abs_psi, window_x, window_psi, window_ref, radius: float,
               config_hash: str) -> None:
    """Box state over the whole box (log scale) and its central region against sin(alpha x)."""
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 6))
    ax0.plot(x, log_abs_psi, lw=0.8)
    ax0.axvspan(-radius, radius, color="tab:orange", alpha=0.25, label=r"$|x|\leq\sqrt{N}$")
    ax0.set_xlabel("x")
    ax0.set_ylabel(r"$\log_{10}|\psi(x)|$")
    ax0.legend(loc="lower center")
    ax1.plot(window_x, window_psi, lw=1.2, label=r"$\psi$ (scaled)")
    ax1.plot(window_x, window_ref, "--", lw=1.0, label=r"$\sin(\alpha x)$")
    ax1.set_xlabel("x")
    ax1.legend(loc="upper right")
    fig.tight_layout()
    _save(fig, path, config_hash, "box state")


def plot_photon(path, initial, released, alpha: float, config_hash: str) -> None:
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax0.bar(initial.levels, initial.weights, width=max(initial.levels.max() / 200, 1e-4))
    ax0.set_xlabel("photon energy (initial)")
    ax0.set_ylabel("probability")
    ax1.plot(released.energies, released.density, lw=1.0)
    ax1.axvline(0.5 * alpha ** 2, color="k", ls=":", lw=0.8)
    ax1.set_xlim(0, 2 * alpha ** 2)
    ax1.set_xlabel("photon energy (released, conditional)")
    ax1.set_ylabel("density")
    fig.tight_layout()
    _save(fig, path, config_hash, "photon energy distributions")


def plot_opener(path, initial, released, config_hash: str, span: float | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 3.6))
    ax.plot(initial.energies, initial.density, lw=1.4, label="initial")
    ax.plot(released.energies, released.density, "--", lw=1.0, label="final, released")
    if span:
        ax.set_xlim(-span, span)
    ax.set_xlabel("opener energy")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    _save(fig, path, config_hash, "opener energy distributions")


def plot_characteristic(path, series: list, T: float, config_hash: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.6))
    for s in series:
        ax.plot(s.tau, np.abs(s.values), lw=0.9, label=s.label)
    ax.axvline(T, color="k", ls=":", lw=0.8)
    ax.axvline(-T, color="k", ls=":", lw=0.8)
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$|\tilde P(\tau)|$")
    ax.legend()
    fig.tight_layout()
    _save(fig, path, config_hash, "characteristic functions")


def plot_sweep(path, axis: str, values, columns: dict, config_hash: str) -> None:
    fig, axes = plt.subplots(1, len(columns), figsize=(3.4 * len(columns), 3.2))
    axes = np.atleast_1d(axes)
    for ax, (name, vals) in zip(axes, columns.items()):
        ax.plot(values, vals, "o-")
        ax.set_xlabel(axis)
        ax.set_title(name)
    fig.tight_layout()
    _save(fig, path, config_hash, f"sweep over {axis}")
