"""Figure rendering for reports and sweeps (written next to the CSV/JSON)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_TRANS_FIELDS = ["t_x", "t_y", "t_z"]
_ROT_FIELDS = ["r_x", "r_y", "r_z"]


def render_sweep_figure(table, path):
    """Mean error curves with +-1 std bands, one panel for translation (cm)
    and one for rotation (deg), against the swept axis."""
    summary = table.summary()
    values = np.array([s["axis_value"] for s in summary])
    means = np.array([s["mean"] for s in summary])
    stds = np.array([s["std"] for s in summary])

    fig, (ax_t, ax_r) = plt.subplots(1, 2, figsize=(9, 3.5), sharex=True)
    for i, name in enumerate(_TRANS_FIELDS):
        ax_t.plot(values, means[:, i], marker="o", label=name)
        ax_t.fill_between(values, means[:, i] - stds[:, i],
                          means[:, i] + stds[:, i], alpha=0.2)
    for i, name in enumerate(_ROT_FIELDS):
        ax_r.plot(values, means[:, 3 + i], marker="o", label=name)
        ax_r.fill_between(values, means[:, 3 + i] - stds[:, 3 + i],
                          means[:, 3 + i] + stds[:, 3 + i], alpha=0.2)
    xlabel = "noise scale" if table.axis == "lambda" else "number of images"
    ax_t.set_xlabel(xlabel)
    ax_r.set_xlabel(xlabel)
    ax_t.set_ylabel("translation error [cm]")
    ax_r.set_ylabel("rotation error [deg]")
    ax_t.legend()
    ax_r.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report_figure(per_camera_errors, path):
    """Grouped bar chart of per-axis errors for each calibrated camera."""
    num_cameras = len(per_camera_errors)
    width = 0.8 / max(num_cameras, 1)
    xs = np.arange(6)
    labels = _TRANS_FIELDS + _ROT_FIELDS

    fig, ax = plt.subplots(figsize=(7, 3.5))
    for c, err in enumerate(per_camera_errors):
        ax.bar(xs + c * width, err.as_array(), width, label=f"camera {c}")
    ax.set_xticks(xs + width * (num_cameras - 1) / 2)
    ax.set_xticklabels([f"{n}\n[{'cm' if n.startswith('t') else 'deg'}]"
                        for n in labels])
    ax.set_ylabel("absolute error")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
