"""Tests for figure rendering (headless Agg backend)."""

import numpy as np
import pytest

from shufscan.detector import DetectorConfig, detect
from shufscan.evaluation import GroundTruth, roc_curve
from shufscan.ingest import FeatureSequence
from shufscan.report import save_roc_figure, save_score_figure
from shufscan.rng import SplitMix64

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def small_table():
    frames = SplitMix64(61).normals(60).reshape(30, 2)
    return detect(FeatureSequence(frames), DetectorConfig(num_shuffles=2, window_size=5, seed=1))


def test_score_figure_writes_a_png(tmp_path):
    table = small_table()
    path = str(tmp_path / "scores.png")
    returned = save_score_figure(table, path)
    assert returned == path
    data = (tmp_path / "scores.png").read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000


def test_score_figure_with_truth_and_flags(tmp_path):
    # An identity-only run leaves the head flagged; both decorations at once.
    frames = SplitMix64(62).normals(60).reshape(30, 2)
    table = detect(FeatureSequence(frames), DetectorConfig(num_shuffles=0, window_size=5))
    assert table.flagged.any()
    labels = np.zeros(30, dtype=int)
    labels[12:15] = 1
    path = save_score_figure(
        table, str(tmp_path / "shaded.png"), truth=GroundTruth(labels), log_scale=True
    )
    assert open(path, "rb").read(8) == PNG_MAGIC


def test_score_figure_rejects_mismatched_truth(tmp_path):
    table = small_table()
    with pytest.raises(ValueError):
        save_score_figure(table, str(tmp_path / "bad.png"), truth=GroundTruth(np.array([0, 1])))


def test_roc_figure_writes_a_png(tmp_path):
    scores = SplitMix64(63).normals(40)
    labels = np.array([1 if i < 8 else 0 for i in range(40)])
    curve = roc_curve(scores, GroundTruth(labels))
    path = save_roc_figure(curve, str(tmp_path / "roc.png"))
    data = open(path, "rb").read()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000
