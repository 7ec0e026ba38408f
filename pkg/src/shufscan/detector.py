"""Permutation-averaged sliding-window anomaly scoring.

The engine treats "anomalous" as "easy to tell apart from the rest of the
sequence with a simple classifier", with no reference to temporal order:

1. generate ``num_shuffles`` random orderings of the frames (plus the
   identity ordering, by default);
2. in each ordering, slide a window of ``window_size`` positions forward
   by ``window_stride``; for each placement, train an l2-regularized
   logistic regression labeling window positions 1 against all earlier
   positions 0;
3. every window frame's predicted probability is accumulated against its
   original frame index;
4. per-frame mean probabilities are clamped away from 0 and 1 and turned
   into odds, ``score = p / (1 - p)``.

Frames that are easy to single out keep high probability under many
orderings; interchangeable frames hover near chance.  A frame scored by
no (ordering, window) pair at all - possible only for the first
``window_size`` frames when few orderings run - is flagged instead of
being given a made-up score.

Determinism: scoring work is cut into (ordering, window) items whose
results are folded into the accumulators in a fixed order, ordering-major
then window-minor, whether items run inline or on a process pool.  Output
is therefore bitwise identical for any ``threads`` setting.

The classifier is trained without an intercept.  This matches the linear
scorer the probability ratio argument is built on, and it is what makes
indistinguishable input degrade gracefully: zero-vector frames give every
split probability exactly one half regardless of how unbalanced the label
split is, whereas a free intercept would chase the class ratio of each
window placement.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .classifier import SingleClassError, TrainSpec, predict_proba, train
from .ingest import FeatureSequence
from .rng import SplitMix64, derive_seed

_SCORE_HEADER = "frame_index,mean_prob,anomaly_score,prob_count,flagged"


class SequenceTooShortError(ValueError):
    """The sequence has no positions left over to score against."""


@dataclass(frozen=True)
class DetectorConfig:
    """Settings for one detection run.

    ``window_stride`` defaults to ``window_size`` (non-overlapping windows)
    when left as None.  ``num_shuffles`` = 0 with the identity ordering
    kept is plain change detection in the given frame order.
    """

    num_shuffles: int = 10
    window_size: int = 10
    window_stride: int | None = None
    l2_penalty: float = 1.0
    seed: int = 0
    prob_clamp: float = 1e-6
    threads: int = 1
    include_identity_shuffle: bool = True
    fit_intercept: bool = False

    def __post_init__(self):
        if self.num_shuffles < 0:
            raise ValueError(f"num_shuffles must be >= 0, got {self.num_shuffles}")
        if self.window_size < 1:
            raise ValueError(f"window_size must be >= 1, got {self.window_size}")
        stride = self.window_size if self.window_stride is None else self.window_stride
        if not 1 <= stride <= self.window_size:
            raise ValueError(
                f"window_stride must be in [1, window_size], got {stride} with window_size "
                f"{self.window_size} (larger strides would leave frames never scored)"
            )
        object.__setattr__(self, "window_stride", stride)
        if self.l2_penalty < 0:
            raise ValueError(f"l2_penalty must be >= 0, got {self.l2_penalty}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if not 0.0 < self.prob_clamp < 0.5:
            raise ValueError(f"prob_clamp must be in (0, 0.5), got {self.prob_clamp}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.num_shuffles == 0 and not self.include_identity_shuffle:
            raise ValueError("num_shuffles=0 requires include_identity_shuffle")


@dataclass(frozen=True)
class Split:
    """One window placement: positives [window_start, window_end), negatives before."""

    window_start: int
    window_end: int

    def __post_init__(self):
        if not 1 <= self.window_start < self.window_end:
            raise ValueError(
                f"need 1 <= window_start < window_end, got [{self.window_start}, {self.window_end})"
            )


@dataclass(frozen=True)
class SplitDiagnostic:
    """Why one (ordering, window) item deviated from the normal path.

    ``shuffle_index`` is 0 for the identity ordering and k for the k-th
    generated permutation (1-based).  ``scored`` tells whether the item
    still contributed probabilities.
    """

    shuffle_index: int
    window_start: int
    reason: str
    scored: bool


@dataclass
class ScoreTable:
    """Per-frame results of a detection run.

    ``mean_prob`` is the clamped mean probability (NaN for flagged frames)
    and ``anomaly_score`` its odds.  ``flagged`` marks frames no item ever
    scored; they carry no invented score.
    """

    prob_sum: np.ndarray
    prob_count: np.ndarray
    mean_prob: np.ndarray
    anomaly_score: np.ndarray
    flagged: np.ndarray
    diagnostics: list[SplitDiagnostic] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return self.prob_sum.shape[0]


def generate_permutations(num_frames: int, num_shuffles: int, seed: int) -> list[np.ndarray]:
    """Draw ``num_shuffles`` uniform orderings of ``range(num_frames)``.

    Each permutation comes from its own derived stream, so permutation k
    is the same no matter how many others are requested.
    """
    if num_frames < 1:
        raise ValueError(f"num_frames must be >= 1, got {num_frames}")
    if num_shuffles < 0:
        raise ValueError(f"num_shuffles must be >= 0, got {num_shuffles}")
    return [
        SplitMix64(derive_seed(seed, k)).permutation(num_frames)
        for k in range(num_shuffles)
    ]


def enumerate_splits(num_frames: int, window_size: int, window_stride: int) -> list[Split]:
    """List window placements: starts at window_size, window_size+stride, ... < T.

    The final window is kept even when truncated by the end of the
    sequence; dropping it would bias against late positions.  Returns an
    empty list (with a warning) when no start position exists.
    """
    if window_size < 1:
        raise ValueError(f"window_size must be >= 1, got {window_size}")
    if not 1 <= window_stride <= window_size:
        raise ValueError(
            f"window_stride must be in [1, window_size], got {window_stride}"
        )
    if num_frames <= window_size:
        warnings.warn(
            f"no scorable window: num_frames={num_frames} <= window_size={window_size}",
            stacklevel=2,
        )
        return []
    return [
        Split(start, min(start + window_size, num_frames))
        for start in range(window_size, num_frames, window_stride)
    ]


def _check_permutation(perm: np.ndarray, num_frames: int) -> np.ndarray:
    perm = np.asarray(perm)
    if perm.shape != (num_frames,):
        raise ValueError(f"permutation shape {perm.shape} does not match {num_frames} frames")
    if not np.array_equal(np.sort(perm), np.arange(num_frames)):
        raise ValueError("permutation is not a bijection on frame indices")
    return perm.astype(np.int64, copy=False)


def _score_split(permuted: np.ndarray, split: Split, config: DetectorConfig):
    """Score one window placement on an already-permuted frame block.

    Returns ``(probs, reason)``: probabilities for the window positions
    (None when training is degenerate) and a diagnostic reason (None on
    the clean path).
    """
    labels = np.zeros(split.window_end, dtype=np.int64)
    labels[split.window_start:] = 1
    spec = TrainSpec(l2_penalty=config.l2_penalty, fit_intercept=config.fit_intercept)
    try:
        result = train(permuted[: split.window_end], labels, spec)
    except SingleClassError:
        return None, "single-class"
    probs = predict_proba(result.model, permuted[split.window_start : split.window_end])
    return probs, None if result.converged else "non-converged"


def score_shuffle(seq: FeatureSequence, perm: np.ndarray, config: DetectorConfig, shuffle_index: int = 0):
    """Accumulate one ordering's contributions against original frame indices.

    Returns ``(prob_sum, prob_count, diagnostics)`` over all window
    placements of this ordering.  Degenerate placements are skipped and
    recorded; non-converged fits are scored but recorded too.
    """
    perm = _check_permutation(perm, seq.num_frames)
    splits = enumerate_splits(seq.num_frames, config.window_size, config.window_stride)
    prob_sum = np.zeros(seq.num_frames)
    prob_count = np.zeros(seq.num_frames, dtype=np.int64)
    diagnostics: list[SplitDiagnostic] = []
    permuted = seq.frames[perm]
    for split in splits:
        probs, reason = _score_split(permuted, split, config)
        if reason is not None:
            diagnostics.append(
                SplitDiagnostic(shuffle_index, split.window_start, reason, probs is not None)
            )
        if probs is None:
            continue
        original = perm[split.window_start : split.window_end]
        prob_sum[original] += probs
        prob_count[original] += 1
    return prob_sum, prob_count, diagnostics


# Per-process state for pool workers, set once by _init_worker after fork.
_WORKER: dict = {}


def _init_worker(frames: np.ndarray, perms: list[np.ndarray], splits: list[Split], config: DetectorConfig):
    _WORKER.clear()
    _WORKER.update(frames=frames, perms=perms, splits=splits, config=config, cache={})


def _run_item(item: tuple[int, int]):
    ordering_pos, split_pos = item
    permuted = _WORKER["cache"].get(ordering_pos)
    if permuted is None:
        permuted = _WORKER["frames"][_WORKER["perms"][ordering_pos]]
        _WORKER["cache"][ordering_pos] = permuted
    return _score_split(permuted, _WORKER["splits"][split_pos], _WORKER["config"])


def detect(seq: FeatureSequence, config: DetectorConfig = DetectorConfig()) -> ScoreTable:
    """Run the full scoring pass and return the per-frame score table.

    Raises ``SequenceTooShortError`` when no window placement exists
    (``num_frames <= window_size``).
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        splits = enumerate_splits(seq.num_frames, config.window_size, config.window_stride)
    if not splits:
        raise SequenceTooShortError(
            f"cannot score {seq.num_frames} frames with window_size {config.window_size}; "
            "need num_frames > window_size"
        )

    orderings: list[tuple[int, np.ndarray]] = []
    if config.include_identity_shuffle:
        orderings.append((0, np.arange(seq.num_frames, dtype=np.int64)))
    for k, perm in enumerate(generate_permutations(seq.num_frames, config.num_shuffles, config.seed)):
        orderings.append((k + 1, perm))

    perms = [perm for _, perm in orderings]
    items = [(oi, si) for oi in range(len(orderings)) for si in range(len(splits))]

    if config.threads == 1:
        _init_worker(seq.frames, perms, splits, config)
        try:
            results = [_run_item(item) for item in items]
        finally:
            _WORKER.clear()
    else:
        with ProcessPoolExecutor(
            max_workers=config.threads,
            initializer=_init_worker,
            initargs=(seq.frames, perms, splits, config),
        ) as pool:
            chunk = max(1, len(items) // (config.threads * 4))
            results = list(pool.map(_run_item, items, chunksize=chunk))

    prob_sum = np.zeros(seq.num_frames)
    prob_count = np.zeros(seq.num_frames, dtype=np.int64)
    diagnostics: list[SplitDiagnostic] = []
    # Fold in item order (ordering-major, window-minor): this fixed order is
    # what makes the output independent of the thread count.
    for (oi, si), (probs, reason) in zip(items, results):
        label = orderings[oi][0]
        split = splits[si]
        if reason is not None:
            diagnostics.append(SplitDiagnostic(label, split.window_start, reason, probs is not None))
        if probs is None:
            continue
        original = perms[oi][split.window_start : split.window_end]
        prob_sum[original] += probs
        prob_count[original] += 1

    flagged = prob_count == 0
    mean_prob = np.full(seq.num_frames, np.nan)
    scored = ~flagged
    mean_prob[scored] = prob_sum[scored] / prob_count[scored]
    mean_prob[scored] = np.clip(mean_prob[scored], config.prob_clamp, 1.0 - config.prob_clamp)
    anomaly_score = mean_prob / (1.0 - mean_prob)
    for arr in (prob_sum, prob_count, mean_prob, anomaly_score, flagged):
        arr.setflags(write=False)
    return ScoreTable(prob_sum, prob_count, mean_prob, anomaly_score, flagged, diagnostics)


def export_scores(table: ScoreTable, path: str, fmt: str = "csv") -> None:
    """Write the score table as CSV, one row per frame.

    Flagged frames get empty probability and score cells and a 1 in the
    ``flagged`` column; scored frames leave the flag cell empty.  Floats
    are written with ``repr``, so a round trip through ``load_scores`` is
    value-exact.
    """
    if fmt != "csv":
        raise ValueError(f"format must be 'csv', got {fmt!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_SCORE_HEADER + "\n")
        for t in range(table.num_frames):
            if table.flagged[t]:
                fh.write(f"{t},,,0,1\n")
            else:
                fh.write(
                    f"{t},{repr(float(table.mean_prob[t]))},{repr(float(table.anomaly_score[t]))},"
                    f"{int(table.prob_count[t])},\n"
                )


def load_scores(path: str) -> ScoreTable:
    """Read a score CSV back into a ScoreTable.

    The CSV stores means, not raw sums, so ``prob_sum`` is reconstructed
    as ``mean_prob * prob_count``; diagnostics are not persisted.
    """
    from .ingest import FeatureFormatError  # local import to keep module deps one-way

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _SCORE_HEADER:
        raise FeatureFormatError(f"{path}: missing score header {_SCORE_HEADER!r}")

    rows = [line for line in lines[1:] if line.strip()]
    t_total = len(rows)
    prob_count = np.zeros(t_total, dtype=np.int64)
    mean_prob = np.full(t_total, np.nan)
    anomaly_score = np.full(t_total, np.nan)
    flagged = np.zeros(t_total, dtype=bool)
    for i, line in enumerate(rows):
        cells = line.split(",")
        if len(cells) != 5:
            raise FeatureFormatError(f"{path}: line {i + 2} has {len(cells)} cells, expected 5")
        try:
            frame = int(cells[0])
            if frame != i:
                raise ValueError(f"frame index {frame}, expected {i}")
            prob_count[i] = int(cells[3])
            flagged[i] = bool(int(cells[4])) if cells[4] else False
            if not flagged[i]:
                mean_prob[i] = float(cells[1])
                anomaly_score[i] = float(cells[2])
        except ValueError as exc:
            raise FeatureFormatError(f"{path}: line {i + 2}: {exc}") from exc

    prob_sum = np.where(flagged, 0.0, mean_prob * prob_count)
    for arr in (prob_sum, prob_count, mean_prob, anomaly_score, flagged):
        arr.setflags(write=False)
    return ScoreTable(prob_sum, prob_count, mean_prob, anomaly_score, flagged, [])
