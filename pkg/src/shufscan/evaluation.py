"""Frame-level evaluation: ROC curves, AUC, and score smoothing.

The ROC walks thresholds down through the distinct score values, so tied
scores collapse into a single curve point and the curve always starts at
(0, 0) and ends at (1, 1).  The trapezoidal area under that curve equals
the Mann-Whitney pairwise statistic (ties counted half), which the test
suite checks against a brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ROC_HEADER = "threshold,fpr,tpr"


@dataclass(frozen=True)
class GroundTruth:
    """Per-frame 0/1 anomaly labels aligned with a feature sequence."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] < 1:
            raise ValueError(f"labels must be a nonempty 1-D array, got shape {labels.shape}")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        labels = np.array(labels, dtype=np.int8)  # copy: never lock caller memory
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def num_frames(self) -> int:
        return self.labels.shape[0]

    @property
    def num_anomalies(self) -> int:
        return int(self.labels.sum())


@dataclass(frozen=True)
class RocCurve:
    """An ROC curve: one row per distinct threshold, plus the start point.

    ``thresholds[0]`` is +inf (nothing flagged); both rate arrays are
    nondecreasing and end at 1.  ``area`` caches the trapezoidal AUC of
    the stored points.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    area: float

    def __post_init__(self):
        thresholds = np.array(self.thresholds, dtype=np.float64)
        fpr = np.array(self.fpr, dtype=np.float64)
        tpr = np.array(self.tpr, dtype=np.float64)
        if not (thresholds.shape == fpr.shape == tpr.shape) or thresholds.ndim != 1:
            raise ValueError("thresholds, fpr, tpr must be 1-D arrays of equal length")
        if thresholds.shape[0] < 2:
            raise ValueError("a curve needs at least the start point and one threshold")
        for name, rates in (("fpr", fpr), ("tpr", tpr)):
            if (np.diff(rates) < 0).any() or rates[0] != 0.0 or rates[-1] != 1.0:
                raise ValueError(f"{name} must be nondecreasing from 0 to 1")
        if abs(float(np.trapezoid(tpr, fpr)) - self.area) > 1e-12:
            raise ValueError("area does not match the trapezoid of the stored points")
        for arr in (thresholds, fpr, tpr):
            arr.setflags(write=False)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "fpr", fpr)
        object.__setattr__(self, "tpr", tpr)
        object.__setattr__(self, "area", float(self.area))


def roc_curve(scores, truth: GroundTruth) -> RocCurve:
    """Build the ROC of ``scores`` against 0/1 labels.

    Scores must be finite and both classes must be present.  Higher score
    means "more anomalous".
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1:
        raise ValueError(f"scores must be 1-D, got shape {scores.shape}")
    if scores.shape[0] != truth.num_frames:
        raise ValueError(f"{scores.shape[0]} scores but {truth.num_frames} labels")
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite (exclude flagged frames before evaluating)")
    labels = truth.labels.astype(np.int64)
    num_pos = int(labels.sum())
    num_neg = labels.shape[0] - num_pos
    if num_pos == 0 or num_neg == 0:
        raise ValueError("both an anomalous and a normal frame are required")

    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    true_pos = np.cumsum(labels[order])
    false_pos = np.cumsum(1 - labels[order])
    # Keep only the last index of each run of tied scores.
    distinct = np.nonzero(np.diff(sorted_scores, append=-np.inf))[0]

    thresholds = np.concatenate(([np.inf], sorted_scores[distinct]))
    fpr = np.concatenate(([0.0], false_pos[distinct] / num_neg))
    tpr = np.concatenate(([0.0], true_pos[distinct] / num_pos))
    area = float(np.trapezoid(tpr, fpr))
    return RocCurve(thresholds, fpr, tpr, area)


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve's stored points."""
    return float(np.trapezoid(curve.tpr, curve.fpr))


def moving_average(values, half_width: int) -> np.ndarray:
    """Centered moving average with truncation at the sequence edges.

    Position ``t`` averages ``values[t-half_width : t+half_width+1]``
    clipped to the valid range, so edge windows shrink instead of padding.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"values must be 1-D, got shape {values.shape}")
    if half_width < 0:
        raise ValueError(f"half_width must be >= 0, got {half_width}")
    if half_width == 0:
        return values.copy()
    out = np.empty_like(values)
    n = values.shape[0]
    for t in range(n):
        lo = max(0, t - half_width)
        hi = min(n, t + half_width + 1)
        out[t] = values[lo:hi].mean()
    return out


def load_ground_truth(path: str) -> GroundTruth:
    """Read a label file: one 0 or 1 per line, frame order."""
    from .ingest import FeatureFormatError

    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if text not in ("0", "1"):
                raise FeatureFormatError(f"{path}: line {lineno}: expected 0 or 1, got {text!r}")
            labels.append(int(text))
    if not labels:
        raise FeatureFormatError(f"{path}: no labels")
    return GroundTruth(np.array(labels, dtype=np.int8))


def save_ground_truth(truth: GroundTruth, path: str) -> None:
    """Write one 0/1 label per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for label in truth.labels:
            fh.write(f"{int(label)}\n")


def write_roc_csv(curve: RocCurve, path: str) -> None:
    """Write curve points as CSV with the AUC in a trailing comment line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_ROC_HEADER + "\n")
        for threshold, x, y in zip(curve.thresholds, curve.fpr, curve.tpr):
            fh.write(f"{repr(float(threshold))},{repr(float(x))},{repr(float(y))}\n")
        fh.write(f"# auc={curve.area:.17g}\n")
