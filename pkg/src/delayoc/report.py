"""Figure rendering for the report path: trajectories and value sweeps
drawn to files next to the delimited output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_trajectory_figure", "save_value_chain_figure"]


def save_trajectory_figure(times, traj, control_nodes, out_path) -> None:
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7.0, 5.5))
    ax1.plot(times, traj.k, lw=1.6, label="state k")
    ax1.plot(times, traj.output, lw=1.0, ls="--", label="output")
    ax1.axhline(0.0, color="0.6", lw=0.6)
    ax1.set_ylabel("level")
    ax1.legend(frameon=False, fontsize=9)
    ax2.step(times, control_nodes, where="post", lw=1.2, color="tab:red", label="control")
    ax2.set_xlabel("s")
    ax2.set_ylabel("control")
    ax2.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)


def save_value_chain_figure(n_list, values, out_path) -> None:
    n_arr = np.asarray(n_list, dtype=float)
    vals = np.asarray(values, dtype=float)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.4))
    ax1.plot(n_arr, vals, "o-", lw=1.2)
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("penalization index n")
    ax1.set_ylabel("value")
    ax1.set_title("monotone approach", fontsize=10)
    gaps = vals[:-1] - vals[1:]
    if gaps.size:
        ax2.semilogy(n_arr[:-1], np.maximum(gaps, 1e-18), "s-", lw=1.2, color="tab:green")
    ax2.set_xscale("log", base=2)
    ax2.set_xlabel("penalization index n")
    ax2.set_ylabel("successive gap")
    ax2.set_title("tail diagnostic", fontsize=10)
    fig.tight_layout()
    fig.savefig(out_path, dpi=140)
    plt.close(fig)
