"""Figure rendering for score tables and ROC curves.

Uses the Agg backend so figures render to files on headless machines.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .detector import ScoreTable
from .evaluation import GroundTruth, RocCurve


def save_score_figure(
    table: ScoreTable,
    path: str,
    truth: GroundTruth | None = None,
    log_scale: bool = False,
) -> str:
    """Render the per-frame anomaly score timeline to ``path``.

    Ground-truth anomaly frames, when given, are shaded; flagged
    (never-scored) frames are ticked along the bottom edge.
    """
    frames = np.arange(table.num_frames)
    fig, ax = plt.subplots(figsize=(10.0, 3.5))
    if truth is not None:
        if truth.num_frames != table.num_frames:
            raise ValueError(
                f"truth has {truth.num_frames} labels, table has {table.num_frames} frames"
            )
        anomalous = truth.labels.astype(bool)
        ax.fill_between(
            frames, 0.0, 1.0,
            where=anomalous, transform=ax.get_xaxis_transform(),
            color="tab:red", alpha=0.15, linewidth=0, label="ground truth",
        )
    ax.plot(frames, table.anomaly_score, color="tab:blue", linewidth=1.0, label="anomaly score")
    if table.flagged.any():
        ax.plot(
            frames[table.flagged], np.zeros(int(table.flagged.sum())),
            transform=ax.get_xaxis_transform(), linestyle="none",
            marker="|", color="tab:gray", label="never scored",
        )
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("frame")
    ax.set_ylabel("odds")
    ax.set_title(f"anomaly scores over {table.num_frames} frames")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_roc_figure(curve: RocCurve, path: str) -> str:
    """Render the ROC curve with its AUC in the title."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(curve.fpr, curve.tpr, color="tab:blue", linewidth=1.5)
    ax.plot([0.0, 1.0], [0.0, 1.0], color="tab:gray", linewidth=0.8, linestyle="--")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"ROC (AUC = {curve.area:.4f})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
