"""Parameter-selection math: shuffle-count bounds and capacity estimation.

How many shuffles are enough?  Model one anomalous frame's per-shuffle
"was it scored anomalous" indicator as a Bernoulli draw with mean mu, and
ask for the chance its K-shuffle average falls below mu - eps.  A Chernoff
argument bounds that chance by exp(-K * KL(mu - eps, mu)) per frame, and a
union bound over A anomalous frames multiplies by A.  Inverting gives the
shuffle count needed for a target failure probability; it grows like
A*log(A).  Here mu = 1/A and eps = eps_rel/A.

Window size is guided the other way, by measuring classifier capacity:
the empirical Rademacher statistic trains the detector's (interceptless)
classifier to fit random +-1 labels on random m-frame subsets.  Values
near 1 mean the window is small enough for the classifier to separate
anything (scores would saturate); values near 0 mean no capacity left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .classifier import TrainSpec, predict_proba, train
from .ingest import FeatureSequence
from .rng import SplitMix64, derive_seed

# Give up if this many consecutive label draws in one trial are one-sided;
# each redraw is one-sided with probability 2**(1-m), so reaching the cap
# means something is wrong with the input, not bad luck.
_MAX_LABEL_REDRAWS = 1000


@dataclass(frozen=True)
class ShuffleBoundQuery:
    """Inputs of the shuffle-count bound.

    ``num_anomalies`` is A, the number of anomalous frames to protect;
    ``failure_prob`` the acceptable chance any of them is under-scored;
    ``rel_tolerance`` the relative slack: a frame fails when its observed
    rate drops below (1 - rel_tolerance)/A.
    """

    num_anomalies: int
    failure_prob: float
    rel_tolerance: float

    def __post_init__(self):
        if self.num_anomalies < 2:
            raise ValueError(f"num_anomalies must be >= 2, got {self.num_anomalies}")
        if not 0.0 < self.failure_prob < 1.0:
            raise ValueError(f"failure_prob must be in (0, 1), got {self.failure_prob}")
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError(f"rel_tolerance must be in (0, 1), got {self.rel_tolerance}")

    @property
    def mean_rate(self) -> float:
        """The target per-shuffle rate mu = 1/A."""
        return 1.0 / self.num_anomalies

    @property
    def deviation(self) -> float:
        """The absolute slack eps = rel_tolerance/A."""
        return self.rel_tolerance / self.num_anomalies


@dataclass(frozen=True)
class RademacherEstimate:
    """Monte-Carlo estimate of classifier capacity at subset size m."""

    subset_size: int
    num_trials: int
    value: float
    std_error: float
    resampled_draws: int

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError(f"std_error must be >= 0, got {self.std_error}")


def bernoulli_kl(p: float, q: float) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), in nats.

    ``p*log(p/q) + (1-p)*log((1-p)/(1-q))`` with the 0*log(0) = 0
    convention; ``q`` must lie strictly inside (0, 1).
    """
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must be in (0, 1), got {q}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    total = 0.0
    if p > 0.0:
        total += p * math.log(p / q)
    if p < 1.0:
        total += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    # Cancellation near p == q can round a hair below zero; the divergence
    # itself is never negative.
    return max(total, 0.0)


def chernoff_failure_prob(query: ShuffleBoundQuery, num_shuffles: int) -> float:
    """Union-bound failure probability after ``num_shuffles`` shuffles.

    ``A * exp(-K * KL(mu - eps, mu))``: the chance that at least one of
    the A anomalous frames sees an average rate below ``mu - eps``.
    Values above 1 are returned as-is; they are vacuous but show how far
    from useful a small K is.
    """
    if num_shuffles < 0:
        raise ValueError(f"num_shuffles must be >= 0, got {num_shuffles}")
    rate = bernoulli_kl(query.mean_rate - query.deviation, query.mean_rate)
    return query.num_anomalies * math.exp(-num_shuffles * rate)


def required_shuffles(query: ShuffleBoundQuery) -> int:
    """Smallest shuffle count whose failure bound is at most ``failure_prob``.

    ``ceil(log(A/delta) / KL(mu - eps, mu))``, rounded up so the
    guarantee is preserved.
    """
    rate = bernoulli_kl(query.mean_rate - query.deviation, query.mean_rate)
    return math.ceil(math.log(query.num_anomalies / query.failure_prob) / rate)


def empirical_rademacher(
    seq: FeatureSequence,
    subset_size: int,
    l2_penalty: float,
    num_trials: int,
    seed: int,
) -> RademacherEstimate:
    """Estimate how well the classifier fits random labels on m-frame subsets.

    Each trial draws ``subset_size`` distinct frames and uniform +-1
    labels, trains the interceptless classifier on them, and records the
    mean of ``label * (2*prob - 1)`` over the subset.  All-same-sign label
    draws are redrawn (and counted), since a one-class problem has no fit
    to measure.  The estimate is the trial mean; ``std_error`` is the
    trial standard deviation over sqrt(num_trials).
    """
    if not 2 <= subset_size <= seq.num_frames:
        raise ValueError(
            f"subset_size must be in [2, {seq.num_frames}], got {subset_size}"
        )
    if num_trials < 1:
        raise ValueError(f"num_trials must be >= 1, got {num_trials}")
    if l2_penalty < 0:
        raise ValueError(f"l2_penalty must be >= 0, got {l2_penalty}")

    spec = TrainSpec(l2_penalty=l2_penalty, fit_intercept=False)
    stats = np.empty(num_trials)
    resampled = 0
    for trial in range(num_trials):
        rng = SplitMix64(derive_seed(seed, trial))
        subset = seq.frames[rng.sample_without_replacement(seq.num_frames, subset_size)]
        for _ in range(_MAX_LABEL_REDRAWS):
            signs = np.array(
                [1.0 if rng.next_u64() >> 63 else -1.0 for _ in range(subset_size)]
            )
            if signs.min() != signs.max():
                break
            resampled += 1
        else:
            raise RuntimeError(
                f"{_MAX_LABEL_REDRAWS} one-sided label draws in a row at m={subset_size}"
            )
        result = train(subset, (signs > 0).astype(np.int64), spec)
        fitted = 2.0 * predict_proba(result.model, subset) - 1.0
        stats[trial] = float(signs @ fitted) / subset_size

    value = float(stats.mean())
    std_error = float(stats.std()) / math.sqrt(num_trials)
    return RademacherEstimate(subset_size, num_trials, value, std_error, resampled)
