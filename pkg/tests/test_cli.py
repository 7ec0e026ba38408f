"""End-to-end tests of the command-line interface (subprocess level)."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from shufscan.detector import DetectorConfig, ScoreTable, detect, export_scores, load_scores
from shufscan.evaluation import GroundTruth, load_ground_truth, roc_curve
from shufscan.ingest import load_features
from shufscan.synth import ToySpec
from shufscan.theory import ShuffleBoundQuery, required_shuffles

# A small recipe keeps each subprocess run well under a second of compute.
SMALL_SPEC = ToySpec(
    num_classes=3,
    prototype_dim=4,
    noise_sigma=0.3,
    block_plan=((0, 20), (1, 20), (0, 10), (2, 4), (1, 6)),
    anomaly_classes=frozenset({2}),
    prototype_separation=3.0,
    seed=7,
)


def run_cli(args, cwd, env_extra=None):
    env = dict(os.environ)
    env.pop("SHUFSCAN_THREADS", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "shufscan", *args],
        cwd=str(cwd),
        env=env,
        capture_output=True,
        text=True,
        timeout=300,
    )


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A directory with a generated sequence and one baseline detect run."""
    root = tmp_path_factory.mktemp("cli")
    (root / "spec.json").write_text(SMALL_SPEC.to_json() + "\n")
    synth = run_cli(
        [
            "synth", "--spec", "spec.json",
            "--features-out", "features.csv", "--truth-out", "truth.txt",
        ],
        root,
    )
    assert synth.returncode == 0, synth.stderr
    base = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--out", "scores.csv",
        ],
        root,
    )
    assert base.returncode == 0, base.stderr
    return root


def test_version_flag(tmp_path):
    result = run_cli(["--version"], tmp_path)
    assert result.returncode == 0
    assert result.stdout.strip() == "shufscan 1.0.0"


def test_missing_subcommand_is_usage_error(tmp_path):
    assert run_cli([], tmp_path).returncode == 2
    assert run_cli(["detect", "--bogus-flag"], tmp_path).returncode == 2


def test_synth_is_deterministic(tmp_path):
    args = [
        "synth", "--preset", "default", "--seed", "7",
        "--features-out", "a.csv", "--truth-out", "a.txt",
    ]
    first = run_cli(args, tmp_path)
    assert first.returncode == 0, first.stderr
    assert "600 frames x 16 features" in first.stdout
    args[6], args[8] = "b.csv", "b.txt"
    second = run_cli(args, tmp_path)
    assert second.returncode == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()


def test_synth_spec_and_seed_override(tmp_path):
    (tmp_path / "spec.json").write_text(SMALL_SPEC.to_json() + "\n")
    result = run_cli(
        [
            "synth", "--spec", "spec.json", "--seed", "99",
            "--features-out", "f.csv", "--truth-out", "t.txt",
            "--dump-spec", "resolved.json",
        ],
        tmp_path,
    )
    assert result.returncode == 0, result.stderr
    resolved = ToySpec.from_json((tmp_path / "resolved.json").read_text())
    assert resolved.seed == 99
    assert resolved.block_plan == SMALL_SPEC.block_plan
    truth = load_ground_truth(str(tmp_path / "t.txt"))
    assert truth.num_frames == SMALL_SPEC.num_frames
    assert truth.num_anomalies == 4


def test_detect_writes_scores_diagnostics_and_manifest(workspace):
    table = load_scores(str(workspace / "scores.csv"))
    assert table.num_frames == 60
    assert not table.flagged.any()

    assert (workspace / "scores.csv.diagnostics.log").exists()

    manifest = json.loads((workspace / "scores.csv.manifest.json").read_text())
    assert manifest["tool"] == "shufscan"
    assert manifest["command"] == "detect"
    assert manifest["config"]["num_shuffles"] == 3
    assert manifest["config"]["window_size"] == 5
    assert manifest["config"]["window_stride"] == 5
    assert manifest["config"]["seed"] == 1
    assert manifest["config"]["fit_intercept"] is False
    assert manifest["counts"]["frames"] == 60
    assert manifest["counts"]["flagged_frames"] == 0
    assert manifest["outputs"]["scores"] == "scores.csv"
    assert manifest["duration_seconds"] >= 0


def test_detect_rerun_from_manifest_reproduces_bitwise(workspace):
    manifest = json.loads((workspace / "scores.csv.manifest.json").read_text())
    config = manifest["config"]
    args = [
        "detect",
        "--features", manifest["inputs"]["features"],
        "--format", manifest["inputs"]["format"],
        "--shuffles", str(config["num_shuffles"]),
        "--window", str(config["window_size"]),
        "--stride", str(config["window_stride"]),
        "--lambda", str(config["l2_penalty"]),
        "--seed", str(config["seed"]),
        "--clamp", str(config["prob_clamp"]),
        "--threads", str(config["threads"]),
        "--out", "replay.csv",
    ]
    if not config["include_identity_shuffle"]:
        args.append("--no-identity")
    result = run_cli(args, workspace)
    assert result.returncode == 0, result.stderr
    assert (workspace / "replay.csv").read_bytes() == (workspace / "scores.csv").read_bytes()


def test_detect_matches_the_library_exactly(workspace, tmp_path):
    seq = load_features(str(workspace / "features.csv"), "csv")
    table = detect(seq, DetectorConfig(num_shuffles=3, window_size=5, seed=1))
    export_scores(table, str(tmp_path / "library.csv"))
    assert (tmp_path / "library.csv").read_bytes() == (workspace / "scores.csv").read_bytes()


def test_identity_only_run_flags_head_and_warns(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "0",
            "--window", "5", "--out", "k0.csv",
        ],
        workspace,
    )
    assert result.returncode == 0
    assert "5 frame(s) never scored" in result.stderr
    table = load_scores(str(workspace / "k0.csv"))
    assert table.flagged[:5].all()
    assert not table.flagged[5:].any()


def test_eval_matches_library_auc(workspace):
    result = run_cli(
        ["eval", "--scores", "scores.csv", "--truth", "truth.txt", "--out", "roc.csv"],
        workspace,
    )
    assert result.returncode == 0, result.stderr
    printed = float(result.stdout.strip())

    table = load_scores(str(workspace / "scores.csv"))
    truth = load_ground_truth(str(workspace / "truth.txt"))
    scored = ~table.flagged
    curve = roc_curve(table.anomaly_score[scored], GroundTruth(truth.labels[scored]))
    assert printed == curve.area

    roc_lines = (workspace / "roc.csv").read_text().splitlines()
    assert roc_lines[0] == "threshold,fpr,tpr"
    assert roc_lines[-1].startswith("# auc=")


def test_eval_of_negated_scores_mirrors_auc(workspace, tmp_path):
    table = load_scores(str(workspace / "scores.csv"))
    negated = ScoreTable(
        table.prob_sum, table.prob_count, table.mean_prob,
        -table.anomaly_score, table.flagged, [],
    )
    export_scores(negated, str(tmp_path / "negated.csv"))
    (tmp_path / "truth.txt").write_bytes((workspace / "truth.txt").read_bytes())

    direct = run_cli(["eval", "--scores", "scores.csv", "--truth", "truth.txt"], workspace)
    mirrored = run_cli(["eval", "--scores", "negated.csv", "--truth", "truth.txt"], tmp_path)
    assert direct.returncode == 0 and mirrored.returncode == 0
    total = float(direct.stdout.strip()) + float(mirrored.stdout.strip())
    assert total == pytest.approx(1.0, abs=1e-12)


def test_eval_single_class_truth_is_a_data_error(workspace, tmp_path):
    (tmp_path / "allzero.txt").write_text("0\n" * 60)
    (tmp_path / "scores.csv").write_bytes((workspace / "scores.csv").read_bytes())
    result = run_cli(["eval", "--scores", "scores.csv", "--truth", "allzero.txt"], tmp_path)
    assert result.returncode == 4
    assert "error:" in result.stderr


def test_missing_input_file_is_an_io_error(tmp_path):
    result = run_cli(
        ["detect", "--features", "nope.csv", "--out", "scores.csv"], tmp_path
    )
    assert result.returncode == 3
    assert "error:" in result.stderr


def test_invalid_window_is_a_data_error(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--window", "0",
            "--out", "bad.csv",
        ],
        workspace,
    )
    assert result.returncode == 4


def test_sequence_shorter_than_window_is_a_data_error(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--window", "60",
            "--out", "bad.csv",
        ],
        workspace,
    )
    assert result.returncode == 4
    assert "window" in result.stderr


def test_log_odds_column_is_log_of_plain_odds(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--log-odds", "--out", "logodds.csv",
        ],
        workspace,
    )
    assert result.returncode == 0
    plain = load_scores(str(workspace / "scores.csv"))
    logged = load_scores(str(workspace / "logodds.csv"))
    np.testing.assert_array_equal(logged.anomaly_score, np.log(plain.anomaly_score))
    np.testing.assert_array_equal(logged.mean_prob, plain.mean_prob)  # probabilities untouched


def test_smooth_column_is_moving_average_of_odds(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--smooth", "2", "--out", "smooth.csv",
        ],
        workspace,
    )
    assert result.returncode == 0
    plain = load_scores(str(workspace / "scores.csv"))
    smooth = load_scores(str(workspace / "smooth.csv"))
    values = plain.anomaly_score
    for t in range(60):
        lo, hi = max(0, t - 2), min(60, t + 3)
        assert smooth.anomaly_score[t] == pytest.approx(values[lo:hi].mean(), rel=1e-15)


def test_threads_env_fallback_and_flag_priority(workspace):
    env_run = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--out", "threaded.csv",
        ],
        workspace,
        env_extra={"SHUFSCAN_THREADS": "2"},
    )
    assert env_run.returncode == 0, env_run.stderr
    manifest = json.loads((workspace / "threaded.csv.manifest.json").read_text())
    assert manifest["config"]["threads"] == 2
    # Thread count must not change a single byte of the scores.
    assert (workspace / "threaded.csv").read_bytes() == (workspace / "scores.csv").read_bytes()

    flag_run = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--threads", "1", "--out", "flagged.csv",
        ],
        workspace,
        env_extra={"SHUFSCAN_THREADS": "2"},
    )
    assert flag_run.returncode == 0
    manifest = json.loads((workspace / "flagged.csv.manifest.json").read_text())
    assert manifest["config"]["threads"] == 1


def test_no_identity_changes_the_result(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "3",
            "--window", "5", "--seed", "1", "--no-identity", "--out", "noid.csv",
        ],
        workspace,
    )
    assert result.returncode == 0
    manifest = json.loads((workspace / "noid.csv.manifest.json").read_text())
    assert manifest["config"]["include_identity_shuffle"] is False
    assert (workspace / "noid.csv").read_bytes() != (workspace / "scores.csv").read_bytes()


def test_bound_prints_required_count_and_bounds(tmp_path):
    result = run_cli(["bound", "--anomalies", "10", "--delta", "0.05", "--eps-p", "0.25"], tmp_path)
    assert result.returncode == 0
    expected = required_shuffles(ShuffleBoundQuery(10, 0.05, 0.25))
    assert int(result.stdout.strip()) == expected

    at_zero = run_cli(
        ["bound", "--anomalies", "10", "--delta", "0.05", "--eps-p", "0.25", "--shuffles", "0"],
        tmp_path,
    )
    assert at_zero.returncode == 0
    assert at_zero.stdout.strip() == "10.0 (vacuous)"

    at_k = run_cli(
        ["bound", "--anomalies", "10", "--delta", "0.05", "--eps-p", "0.25",
         "--shuffles", str(expected)],
        tmp_path,
    )
    assert float(at_k.stdout.split()[0]) <= 0.05
    assert "vacuous" not in at_k.stdout

    bad = run_cli(["bound", "--anomalies", "1", "--delta", "0.05", "--eps-p", "0.25"], tmp_path)
    assert bad.returncode == 4


def test_rademacher_subcommand(workspace):
    result = run_cli(
        [
            "rademacher", "--features", "features.csv", "--subset-size", "4",
            "--trials", "5", "--seed", "0",
        ],
        workspace,
    )
    assert result.returncode == 0, result.stderr
    fields = dict(part.split("=") for part in result.stdout.split())
    assert -0.05 <= float(fields["value"]) <= 1.0
    assert float(fields["std_error"]) >= 0.0
    assert fields["m"] == "4"
    assert fields["trials"] == "5"


def test_preprocess_standardize_and_pca(workspace):
    result = run_cli(
        [
            "preprocess", "--features", "features.csv", "--standardize",
            "--out", "standardized.csv",
        ],
        workspace,
    )
    assert result.returncode == 0, result.stderr
    seq = load_features(str(workspace / "standardized.csv"), "csv")
    np.testing.assert_allclose(seq.frames.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(seq.frames.std(axis=0), 1.0, atol=1e-12)

    reduced = run_cli(
        [
            "preprocess", "--features", "features.csv", "--standardize",
            "--pca", "2", "--out", "reduced.bin", "--out-format", "bin",
        ],
        workspace,
    )
    assert reduced.returncode == 0, reduced.stderr
    low = load_features(str(workspace / "reduced.bin"), "bin")
    assert low.num_features == 2
    assert low.num_frames == 60
    covariance = np.cov(low.frames.T, bias=True)
    assert abs(covariance[0, 1]) < 1e-8  # components are decorrelated

    nothing = run_cli(
        ["preprocess", "--features", "features.csv", "--out", "x.csv"], workspace
    )
    assert nothing.returncode == 4


def test_report_renders_figures(workspace):
    result = run_cli(
        ["report", "--scores", "scores.csv", "--truth", "truth.txt", "--out-dir", "figs"],
        workspace,
    )
    assert result.returncode == 0, result.stderr
    printed = result.stdout.split()
    assert len(printed) == 2
    for name in ("scores_timeline.png", "scores_roc.png"):
        data = (workspace / "figs" / name).read_bytes()
        assert data.startswith(b"\x89PNG\r\n\x1a\n")


def test_detect_plot_writes_timeline(workspace):
    result = run_cli(
        [
            "detect", "--features", "features.csv", "--shuffles", "2",
            "--window", "5", "--plot", "--out", "plotted.csv",
        ],
        workspace,
    )
    assert result.returncode == 0, result.stderr
    data = (workspace / "plotted_timeline.png").read_bytes()
    assert data.startswith(b"\x89PNG\r\n\x1a\n")
    manifest = json.loads((workspace / "plotted.csv.manifest.json").read_text())
    assert manifest["outputs"]["figure"] == "plotted_timeline.png"
