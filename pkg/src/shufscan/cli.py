"""Command-line front end: detect / eval / synth / bound / rademacher / preprocess / report.

Exit codes: 0 success, 2 bad usage (argparse), 3 I/O failure, 4 bad or
degenerate data.  Errors go to standard error.  Every ``detect`` run
writes, next to the score CSV, a diagnostics log (one line per recorded
split) and a JSON manifest capturing the full configuration, so a run
can be reproduced bitwise from its manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .detector import DetectorConfig, ScoreTable, detect, export_scores, load_scores
from .evaluation import (
    GroundTruth,
    load_ground_truth,
    moving_average,
    roc_curve,
    save_ground_truth,
    write_roc_csv,
)
from .ingest import (
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    load_features,
    project,
    save_features,
)
from .synth import ToySpec, default_toy_plan, make_toy_sequence, reseeded
from .theory import ShuffleBoundQuery, chernoff_failure_prob, empirical_rademacher, required_shuffles

_PRESETS = ("default",)


def _default_threads() -> int:
    raw = os.environ.get("SHUFSCAN_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shufscan",
        description="Order-free anomaly scoring for frame sequences via shuffled sliding-window classification.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="score a feature sequence")
    p.add_argument("--features", required=True, help="input feature file")
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="feature file format")
    p.add_argument("--shuffles", type=int, default=10, help="number of generated orderings K")
    p.add_argument("--window", type=int, default=10, help="window size t_w")
    p.add_argument("--stride", type=int, default=None, help="window stride (default: window size)")
    p.add_argument("--lambda", dest="l2_penalty", type=float, default=1.0, help="l2 penalty")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: SHUFSCAN_THREADS or 1)")
    p.add_argument("--clamp", type=float, default=1e-6, help="probability clamp")
    p.add_argument("--no-identity", action="store_true",
                   help="drop the identity ordering, use generated shuffles only")
    p.add_argument("--standardize", action="store_true",
                   help="standardize features (per-feature mean 0, scale 1) before scoring")
    p.add_argument("--log-odds", action="store_true",
                   help="export log(odds) instead of odds in the anomaly_score column")
    p.add_argument("--smooth", type=int, default=0, metavar="HW",
                   help="moving-average half-width applied to the exported anomaly_score "
                        "column (after --log-odds if both are given)")
    p.add_argument("--plot", action="store_true", help="also render a score timeline figure")
    p.add_argument("--out", required=True, help="output score CSV path")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="ROC/AUC of a score CSV against ground truth")
    p.add_argument("--scores", required=True, help="score CSV from detect")
    p.add_argument("--truth", required=True, help="ground-truth label file (one 0/1 per line)")
    p.add_argument("--smooth", type=int, default=0, metavar="HW",
                   help="moving-average half-width applied to scores before ranking")
    p.add_argument("--out", default=None, help="ROC CSV output path")
    p.add_argument("--plot", action="store_true", help="also render the ROC figure (needs --out)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic labeled sequence")
    p.add_argument("--preset", choices=_PRESETS, default="default", help="built-in recipe")
    p.add_argument("--spec", default=None, help="JSON recipe file (overrides --preset)")
    p.add_argument("--seed", type=int, default=None, help="override the recipe seed")
    p.add_argument("--features-out", required=True, help="feature file to write")
    p.add_argument("--truth-out", required=True, help="label file to write")
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="feature file format")
    p.add_argument("--dump-spec", default=None, help="also write the resolved recipe as JSON")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bound", help="shuffle-count bound calculator")
    p.add_argument("--anomalies", type=int, required=True, help="number of anomalous frames A")
    p.add_argument("--delta", type=float, required=True, help="acceptable failure probability")
    p.add_argument("--eps-p", type=float, required=True, help="relative rate tolerance")
    p.add_argument("--shuffles", type=int, default=None,
                   help="evaluate the failure bound at this K instead of printing required K")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("rademacher", help="empirical classifier-capacity estimate")
    p.add_argument("--features", required=True, help="input feature file")
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="feature file format")
    p.add_argument("--subset-size", type=int, required=True, help="frames per trial m")
    p.add_argument("--trials", type=int, default=200, help="number of trials")
    p.add_argument("--lambda", dest="l2_penalty", type=float, default=1.0, help="l2 penalty")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.set_defaults(func=cmd_rademacher)

    p = sub.add_parser("preprocess", help="standardize and/or PCA-project a feature file")
    p.add_argument("--features", required=True, help="input feature file")
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="input format")
    p.add_argument("--standardize", action="store_true", help="per-feature mean 0, scale 1")
    p.add_argument("--pca", type=int, default=None, metavar="R", help="project to R components")
    p.add_argument("--out", required=True, help="output feature file")
    p.add_argument("--out-format", choices=("csv", "bin"), default=None,
                   help="output format (default: same as input)")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("report", help="render figures for an existing score CSV")
    p.add_argument("--scores", required=True, help="score CSV from detect")
    p.add_argument("--truth", default=None, help="optional label file; adds shading and an ROC figure")
    p.add_argument("--out-dir", default=None, help="figure directory (default: alongside the scores)")
    p.add_argument("--log-scale", action="store_true", help="log-scaled score axis")
    p.set_defaults(func=cmd_report)

    return parser


def _figure_path(base: str, suffix: str) -> str:
    stem = os.path.splitext(base)[0]
    return f"{stem}_{suffix}.png"


def _masked_moving_average(values: np.ndarray, valid: np.ndarray, half_width: int) -> np.ndarray:
    """Moving average that ignores invalid positions instead of spreading NaN."""
    out = values.copy()
    n = values.shape[0]
    for t in range(n):
        if not valid[t]:
            continue
        lo = max(0, t - half_width)
        hi = min(n, t + half_width + 1)
        window = values[lo:hi][valid[lo:hi]]
        out[t] = window.mean()
    return out


def cmd_detect(args) -> int:
    started = time.monotonic()
    seq = load_features(args.features, args.format)
    if args.standardize:
        seq = apply_standardizer(seq, fit_standardizer(seq))
    if args.smooth < 0:
        raise ValueError(f"--smooth must be >= 0, got {args.smooth}")
    config = DetectorConfig(
        num_shuffles=args.shuffles,
        window_size=args.window,
        window_stride=args.stride,
        l2_penalty=args.l2_penalty,
        seed=args.seed,
        prob_clamp=args.clamp,
        threads=args.threads if args.threads is not None else _default_threads(),
        include_identity_shuffle=not args.no_identity,
    )
    table = detect(seq, config)

    export = table
    if args.log_odds or args.smooth:
        scores = table.anomaly_score.copy()
        scored = ~table.flagged
        if args.log_odds:
            scores[scored] = np.log(scores[scored])
        if args.smooth:
            scores = _masked_moving_average(scores, scored, args.smooth)
        export = ScoreTable(
            table.prob_sum, table.prob_count, table.mean_prob,
            scores, table.flagged, table.diagnostics,
        )
    export_scores(export, args.out)

    diagnostics_path = args.out + ".diagnostics.log"
    with open(diagnostics_path, "w", encoding="utf-8") as fh:
        for diag in table.diagnostics:
            fh.write(
                f"shuffle={diag.shuffle_index} window_start={diag.window_start} "
                f"reason={diag.reason} scored={int(diag.scored)}\n"
            )

    figure_path = None
    if args.plot:
        from .report import save_score_figure

        figure_path = save_score_figure(export, _figure_path(args.out, "timeline"))

    manifest = {
        "tool": "shufscan",
        "version": __version__,
        "command": "detect",
        "config": {
            "num_shuffles": config.num_shuffles,
            "window_size": config.window_size,
            "window_stride": config.window_stride,
            "l2_penalty": config.l2_penalty,
            "seed": config.seed,
            "prob_clamp": config.prob_clamp,
            "threads": config.threads,
            "include_identity_shuffle": config.include_identity_shuffle,
            "fit_intercept": config.fit_intercept,
        },
        "inputs": {"features": args.features, "format": args.format, "standardize": args.standardize},
        "transforms": {"log_odds": args.log_odds, "smooth_half_width": args.smooth},
        "outputs": {"scores": args.out, "diagnostics": diagnostics_path, "figure": figure_path},
        "duration_seconds": round(time.monotonic() - started, 6),
        "counts": {
            "frames": table.num_frames,
            "flagged_frames": int(table.flagged.sum()),
            "skipped_splits": sum(1 for d in table.diagnostics if not d.scored),
            "non_converged_splits": sum(1 for d in table.diagnostics if d.scored),
        },
    }
    with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")

    flagged = int(table.flagged.sum())
    if flagged:
        print(f"warning: {flagged} frame(s) never scored (flagged)", file=sys.stderr)
    return 0


def cmd_eval(args) -> int:
    table = load_scores(args.scores)
    truth = load_ground_truth(args.truth)
    if truth.num_frames != table.num_frames:
        raise ValueError(
            f"{args.truth} has {truth.num_frames} labels but {args.scores} has "
            f"{table.num_frames} frames"
        )
    if args.smooth < 0:
        raise ValueError(f"--smooth must be >= 0, got {args.smooth}")

    scored = ~table.flagged
    if not scored.all():
        print(
            f"note: excluding {int((~scored).sum())} flagged frame(s) from evaluation",
            file=sys.stderr,
        )
    scores = table.anomaly_score[scored]
    if args.smooth:
        scores = moving_average(scores, args.smooth)
    curve = roc_curve(scores, GroundTruth(truth.labels[scored]))

    if args.out:
        write_roc_csv(curve, args.out)
        if args.plot:
            from .report import save_roc_figure

            save_roc_figure(curve, _figure_path(args.out, "roc"))
    elif args.plot:
        raise ValueError("--plot requires --out for the figure location")
    print(repr(curve.area))
    return 0


def cmd_synth(args) -> int:
    if args.spec is not None:
        with open(args.spec, "r", encoding="utf-8") as fh:
            spec = ToySpec.from_json(fh.read())
    else:
        spec = default_toy_plan()
    if args.seed is not None:
        spec = reseeded(spec, args.seed)

    seq, truth = make_toy_sequence(spec)
    save_features(seq, args.features_out, args.format)
    save_ground_truth(truth, args.truth_out)
    if args.dump_spec:
        with open(args.dump_spec, "w", encoding="utf-8") as fh:
            fh.write(spec.to_json())
            fh.write("\n")
    print(
        f"wrote {seq.num_frames} frames x {seq.num_features} features, "
        f"{truth.num_anomalies} anomalous"
    )
    return 0


def cmd_bound(args) -> int:
    query = ShuffleBoundQuery(
        num_anomalies=args.anomalies,
        failure_prob=args.delta,
        rel_tolerance=args.eps_p,
    )
    if args.shuffles is None:
        print(required_shuffles(query))
    else:
        bound = chernoff_failure_prob(query, args.shuffles)
        tag = " (vacuous)" if bound > 1.0 else ""
        print(f"{repr(bound)}{tag}")
    return 0


def cmd_rademacher(args) -> int:
    seq = load_features(args.features, args.format)
    estimate = empirical_rademacher(
        seq, args.subset_size, args.l2_penalty, args.trials, args.seed
    )
    print(
        f"value={repr(estimate.value)} std_error={repr(estimate.std_error)} "
        f"m={estimate.subset_size} trials={estimate.num_trials} "
        f"resampled={estimate.resampled_draws}"
    )
    return 0


def cmd_preprocess(args) -> int:
    seq = load_features(args.features, args.format)
    if not args.standardize and args.pca is None:
        raise ValueError("nothing to do: pass --standardize and/or --pca R")
    if args.standardize:
        seq = apply_standardizer(seq, fit_standardizer(seq))
    if args.pca is not None:
        seq = project(seq, fit_pca(seq, args.pca))
    save_features(seq, args.out, args.out_format or args.format)
    print(f"wrote {seq.num_frames} frames x {seq.num_features} features to {args.out}")
    return 0


def cmd_report(args) -> int:
    from .report import save_roc_figure, save_score_figure

    table = load_scores(args.scores)
    out_dir = args.out_dir or (os.path.dirname(args.scores) or ".")
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.scores))[0]

    truth = None
    if args.truth is not None:
        truth = load_ground_truth(args.truth)
        if truth.num_frames != table.num_frames:
            raise ValueError(
                f"{args.truth} has {truth.num_frames} labels but {args.scores} has "
                f"{table.num_frames} frames"
            )

    paths = [
        save_score_figure(
            table, os.path.join(out_dir, f"{stem}_timeline.png"),
            truth=truth, log_scale=args.log_scale,
        )
    ]
    if truth is not None:
        scored = ~table.flagged
        curve = roc_curve(table.anomaly_score[scored], GroundTruth(truth.labels[scored]))
        paths.append(save_roc_figure(curve, os.path.join(out_dir, f"{stem}_roc.png")))
    for path in paths:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
