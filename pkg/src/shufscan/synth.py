"""Synthetic labeled sequences for exercising and validating the detector.

A toy sequence is built from a handful of well-separated prototype
vectors, one per class; the sequence is a concatenation of runs, each
frame its run's prototype plus isotropic Gaussian noise.  Rare classes
are declared anomalous in the ground truth.  The default plan opens with
a long run of class 0, then mixes classes 0 and 1 with two short, widely
separated visits from each of the rare classes 2 and 3: an ordering
engineered so a plain forward change detector is fooled by the late first
appearance of prevalent class 1, while rare classes stay rare overall.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .evaluation import GroundTruth
from .ingest import FeatureSequence
from .rng import SplitMix64, derive_seed

_MAX_PROTOTYPE_RETRIES = 16

# The default block plan: (class_id, run_length) in sequence order.
# T = 600; classes 2 and 3 contribute 12 frames each (4% anomalous).
_DEFAULT_PLAN = (
    (0, 200),
    (1, 60),
    (0, 40),
    (2, 6),
    (1, 50),
    (0, 40),
    (3, 6),
    (1, 40),
    (0, 40),
    (2, 6),
    (1, 30),
    (0, 30),
    (3, 6),
    (1, 20),
    (0, 26),
)


@dataclass(frozen=True)
class ToySpec:
    """Recipe for one synthetic sequence."""

    num_classes: int
    prototype_dim: int
    noise_sigma: float
    block_plan: tuple[tuple[int, int], ...]
    anomaly_classes: frozenset[int]
    prototype_separation: float
    seed: int

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.prototype_dim < 1:
            raise ValueError(f"prototype_dim must be >= 1, got {self.prototype_dim}")
        if self.noise_sigma <= 0:
            raise ValueError(f"noise_sigma must be positive, got {self.noise_sigma}")
        if self.prototype_separation <= 0:
            raise ValueError(
                f"prototype_separation must be positive, got {self.prototype_separation}"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        plan = tuple((int(c), int(n)) for c, n in self.block_plan)
        if not plan:
            raise ValueError("block_plan must contain at least one run")
        for class_id, length in plan:
            if not 0 <= class_id < self.num_classes:
                raise ValueError(f"block class {class_id} outside 0..{self.num_classes - 1}")
            if length < 1:
                raise ValueError(f"run length must be >= 1, got {length}")
        anomalies = frozenset(int(c) for c in self.anomaly_classes)
        all_classes = set(range(self.num_classes))
        if not anomalies or not anomalies < all_classes:
            raise ValueError(
                f"anomaly_classes must be a nonempty strict subset of 0..{self.num_classes - 1}"
            )
        object.__setattr__(self, "block_plan", plan)
        object.__setattr__(self, "anomaly_classes", anomalies)

    @property
    def num_frames(self) -> int:
        return sum(length for _, length in self.block_plan)

    def to_json(self) -> str:
        """Serialize the recipe as a small JSON document."""
        return json.dumps(
            {
                "num_classes": self.num_classes,
                "prototype_dim": self.prototype_dim,
                "noise_sigma": self.noise_sigma,
                "block_plan": [list(run) for run in self.block_plan],
                "anomaly_classes": sorted(self.anomaly_classes),
                "prototype_separation": self.prototype_separation,
                "seed": self.seed,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ToySpec":
        raw = json.loads(text)
        return cls(
            num_classes=raw["num_classes"],
            prototype_dim=raw["prototype_dim"],
            noise_sigma=raw["noise_sigma"],
            block_plan=tuple(tuple(run) for run in raw["block_plan"]),
            anomaly_classes=frozenset(raw["anomaly_classes"]),
            prototype_separation=raw["prototype_separation"],
            seed=raw["seed"],
        )


def default_toy_plan(seed: int = 0) -> ToySpec:
    """The canonical four-class plan used by the acceptance experiments.

    600 frames, 16 features: prevalent classes 0 and 1 (class 1 absent
    from the 200-frame opening block), rare anomalous classes 2 and 3
    visiting twice each in well-separated 6-frame runs.
    """
    return ToySpec(
        num_classes=4,
        prototype_dim=16,
        noise_sigma=0.1,
        block_plan=_DEFAULT_PLAN,
        anomaly_classes=frozenset({2, 3}),
        prototype_separation=4.0,
        seed=seed,
    )


def _draw_prototypes(spec: ToySpec) -> np.ndarray:
    """Draw class prototypes and rescale so pairwise distances >= separation."""
    rng = SplitMix64(derive_seed(spec.seed, 0))
    for _ in range(_MAX_PROTOTYPE_RETRIES):
        protos = rng.normals(spec.num_classes * spec.prototype_dim).reshape(
            spec.num_classes, spec.prototype_dim
        )
        deltas = protos[:, None, :] - protos[None, :, :]
        dists = np.sqrt((deltas**2).sum(axis=2))
        min_dist = float(dists[np.triu_indices(spec.num_classes, k=1)].min())
        if min_dist > 0.0:
            if min_dist < spec.prototype_separation:
                protos = protos * (spec.prototype_separation / min_dist)
            return protos
    raise ValueError(
        f"could not draw {spec.num_classes} distinct prototypes in dimension "
        f"{spec.prototype_dim} after {_MAX_PROTOTYPE_RETRIES} attempts"
    )


def make_toy_sequence(spec: ToySpec) -> tuple[FeatureSequence, GroundTruth]:
    """Generate the sequence and its frame labels for ``spec``.

    Deterministic per seed: prototypes come from one derived stream and
    frame noise from another, so the same seed always gives the same
    frames on every platform that reproduces the generator's streams.
    """
    protos = _draw_prototypes(spec)
    noise_rng = SplitMix64(derive_seed(spec.seed, 1))
    frames = np.empty((spec.num_frames, spec.prototype_dim))
    labels = np.empty(spec.num_frames, dtype=np.int8)
    t = 0
    for class_id, length in spec.block_plan:
        for _ in range(length):
            frames[t] = protos[class_id] + spec.noise_sigma * noise_rng.normals(
                spec.prototype_dim
            )
            labels[t] = 1 if class_id in spec.anomaly_classes else 0
            t += 1
    seq = FeatureSequence(frames, source=f"synthetic:seed={spec.seed}")
    return seq, GroundTruth(labels)


def reseeded(spec: ToySpec, seed: int) -> ToySpec:
    """The same recipe with a different seed."""
    return replace(spec, seed=seed)
