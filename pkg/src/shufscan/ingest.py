"""Feature-sequence containers, file formats, and preprocessing.

A sequence is a dense ``(T, d)`` float64 array: ``T`` frames in time order,
``d`` features per frame.  Two on-disk formats are supported:

* CSV, one frame per line, with an optional declaring header line
  ``# shufscan features v1 T=<int> d=<int>``;
* a packed binary layout: magic ``SFSQ``, little-endian u16 version (1),
  u64 frame count, u64 feature count, then ``T * d`` little-endian float64
  values in row-major order.

Preprocessing is limited to per-feature standardization and PCA.  Both use
the population (1/T) convention for variance and covariance: the sequence
being scored is the whole population of interest, not a sample from a
larger one.  The PCA eigensolver is a cyclic Jacobi iteration rather than
a library call so that component signs and tie ordering are identical on
every platform.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

_CSV_MAGIC = "# shufscan features v1"
_BIN_MAGIC = b"SFSQ"
_BIN_VERSION = 1
_FORMATS = ("csv", "bin")

# Relative cutoff below which a variance or eigenvalue counts as zero.
_ZERO_VARIANCE_REL = 1e-12


class FeatureFormatError(ValueError):
    """A feature or score file exists but its contents are malformed."""


class RankDeficientError(ValueError):
    """The covariance matrix has lower rank than the requested PCA size."""


class JacobiConvergenceError(RuntimeError):
    """The Jacobi eigensolver failed to reach its off-diagonal tolerance."""


def _as_readonly_f64(values, name: str, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)  # copy: never lock caller memory
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureSequence:
    """An immutable ``(T, d)`` block of frame features in time order."""

    frames: np.ndarray
    source: str = ""

    def __post_init__(self):
        frames = _as_readonly_f64(self.frames, "frames", 2)
        if frames.shape[0] < 1 or frames.shape[1] < 1:
            raise ValueError(f"need at least one frame and one feature, got shape {frames.shape}")
        if not np.isfinite(frames).all():
            bad = np.argwhere(~np.isfinite(frames))[0]
            raise ValueError(
                f"non-finite value at frame {bad[0]}, feature {bad[1]}"
            )
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_features(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True)
class StandardizerParams:
    """Per-feature affine transform: ``(x - mean) / scale``."""

    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        mean = _as_readonly_f64(self.mean, "mean", 1)
        scale = _as_readonly_f64(self.scale, "scale", 1)
        if mean.shape != scale.shape:
            raise ValueError(f"mean shape {mean.shape} != scale shape {scale.shape}")
        if not (np.isfinite(mean).all() and np.isfinite(scale).all()):
            raise ValueError("standardizer parameters must be finite")
        if (scale <= 0).any():
            raise ValueError("scale entries must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "scale", scale)


@dataclass(frozen=True)
class PcaModel:
    """Centering vector plus an orthonormal ``(d, r)`` projection basis."""

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        mean = _as_readonly_f64(self.mean, "mean", 1)
        components = _as_readonly_f64(self.components, "components", 2)
        eigenvalues = _as_readonly_f64(self.eigenvalues, "eigenvalues", 1)
        d, r = components.shape
        if mean.shape[0] != d:
            raise ValueError(f"mean has {mean.shape[0]} entries but components have {d} rows")
        if eigenvalues.shape[0] != r:
            raise ValueError(f"{r} components but {eigenvalues.shape[0]} eigenvalues")
        gram = components.T @ components
        if not np.allclose(gram, np.eye(r), atol=1e-8):
            raise ValueError("components must be orthonormal")
        if (eigenvalues <= 0).any():
            raise ValueError("eigenvalues must be positive")
        if (np.diff(eigenvalues) > 0).any():
            raise ValueError("eigenvalues must be nonincreasing")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "components", components)
        object.__setattr__(self, "eigenvalues", eigenvalues)


def _check_format(fmt: str) -> str:
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    return fmt


def load_features(path: str, fmt: str = "csv") -> FeatureSequence:
    """Read a feature sequence from ``path`` in the given format.

    Missing files raise ``FileNotFoundError``; present-but-malformed files
    raise ``FeatureFormatError`` naming the offending location.
    """
    _check_format(fmt)
    if fmt == "csv":
        return _load_csv(path)
    return _load_bin(path)


def save_features(seq: FeatureSequence, path: str, fmt: str = "csv") -> None:
    """Write ``seq`` to ``path``; a CSV/bin round trip is value-exact."""
    _check_format(fmt)
    if fmt == "csv":
        _save_csv(seq, path)
    else:
        _save_bin(seq, path)


def _load_csv(path: str) -> FeatureSequence:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    declared_t = declared_d = None
    start = 0
    if lines and lines[0].startswith("#"):
        header = lines[0]
        if not header.startswith(_CSV_MAGIC):
            raise FeatureFormatError(f"{path}: unrecognized header line {header!r}")
        try:
            fields = dict(part.split("=", 1) for part in header[len(_CSV_MAGIC):].split())
            declared_t = int(fields["T"])
            declared_d = int(fields["d"])
        except (KeyError, ValueError) as exc:
            raise FeatureFormatError(f"{path}: malformed header line {header!r}") from exc
        start = 1

    rows = []
    width = declared_d
    for lineno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FeatureFormatError(
                f"{path}: line {lineno} has {len(cells)} values, expected {width}"
            )
        row = np.empty(width, dtype=np.float64)
        for col, cell in enumerate(cells):
            try:
                row[col] = float(cell)
            except ValueError as exc:
                raise FeatureFormatError(
                    f"{path}: line {lineno}, column {col + 1}: not a number: {cell.strip()!r}"
                ) from exc
            if not np.isfinite(row[col]):
                raise FeatureFormatError(
                    f"{path}: line {lineno}, column {col + 1}: non-finite value {cell.strip()!r}"
                )
        rows.append(row)

    if not rows:
        raise FeatureFormatError(f"{path}: no data rows")
    if declared_t is not None and len(rows) != declared_t:
        raise FeatureFormatError(
            f"{path}: header declares T={declared_t} but file has {len(rows)} data rows"
        )
    return FeatureSequence(np.vstack(rows), source=path)


def _save_csv(seq: FeatureSequence, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_CSV_MAGIC} T={seq.num_frames} d={seq.num_features}\n")
        for row in seq.frames:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _load_bin(path: str) -> FeatureSequence:
    with open(path, "rb") as fh:
        blob = fh.read()

    header = struct.calcsize("<4sHQQ")
    if len(blob) < header:
        raise FeatureFormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, num_frames, num_features = struct.unpack_from("<4sHQQ", blob)
    if magic != _BIN_MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}, expected {_BIN_MAGIC!r}")
    if version != _BIN_VERSION:
        raise FeatureFormatError(f"{path}: unsupported version {version}")
    expected = header + 8 * num_frames * num_features
    if len(blob) != expected:
        raise FeatureFormatError(
            f"{path}: payload is {len(blob) - header} bytes, expected {expected - header}"
        )
    frames = np.frombuffer(blob, dtype="<f8", offset=header).reshape(num_frames, num_features)
    if not np.isfinite(frames).all():
        bad = np.argwhere(~np.isfinite(frames))[0]
        raise FeatureFormatError(f"{path}: non-finite value at frame {bad[0]}, feature {bad[1]}")
    return FeatureSequence(frames, source=path)


def _save_bin(seq: FeatureSequence, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHQQ", _BIN_MAGIC, _BIN_VERSION, seq.num_frames, seq.num_features))
        fh.write(np.ascontiguousarray(seq.frames, dtype="<f8").tobytes())


def fit_standardizer(seq: FeatureSequence) -> StandardizerParams:
    """Compute per-feature mean and population standard deviation.

    Features with (near-)zero variance get scale 1 so that applying the
    transform maps them to exactly zero instead of dividing by zero.
    """
    mean = seq.frames.mean(axis=0)
    var = seq.frames.var(axis=0)  # population convention, 1/T
    scale = np.sqrt(var)
    floor = _ZERO_VARIANCE_REL * max(1.0, float(np.abs(seq.frames).max()))
    scale[scale <= floor] = 1.0
    # Exactly constant columns standardize to exactly zero: snap the mean to
    # the constant so rounding in the column sum cannot leak through.
    lo = seq.frames.min(axis=0)
    constant = lo == seq.frames.max(axis=0)
    mean[constant] = lo[constant]
    return StandardizerParams(mean=mean, scale=scale)


def apply_standardizer(seq: FeatureSequence, params: StandardizerParams) -> FeatureSequence:
    """Return a new sequence with ``(x - mean) / scale`` applied per feature."""
    if params.mean.shape[0] != seq.num_features:
        raise ValueError(
            f"standardizer is for {params.mean.shape[0]} features, sequence has {seq.num_features}"
        )
    return FeatureSequence((seq.frames - params.mean) / params.scale, source=seq.source)


def _jacobi_eigh(matrix: np.ndarray, tol: float = 1e-10, max_sweeps: int = 60):
    """Diagonalize a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, vectors)`` with ``vectors[:, k]`` the unit
    eigenvector for ``eigenvalues[k]``, in diagonal position order.  Sweeps
    run until every off-diagonal magnitude is at most ``tol``.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), v

    for _ in range(max_sweeps):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off = max(off, abs(a[p, q]))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) if theta != 0 else 1.0
                t = t / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                a[p, q] = a[q, p] = 0.0
                rot_p = c * v[:, p] - s * v[:, q]
                rot_q = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = rot_p, rot_q
    else:
        off = max(abs(a[p, q]) for p in range(n - 1) for q in range(p + 1, n))
        if off > tol:
            raise JacobiConvergenceError(
                f"off-diagonal magnitude {off:.3e} still above {tol:.1e} after {max_sweeps} sweeps"
            )
    return a.diagonal().copy(), v


def fit_pca(seq: FeatureSequence, target_dim: int) -> PcaModel:
    """Fit a ``target_dim``-component PCA of the sequence.

    Components are eigenvectors of the population covariance, ordered by
    descending eigenvalue (ties keep their first-occurrence order), each
    signed so its largest-magnitude coordinate is positive.  Raises
    ``RankDeficientError`` when the covariance rank is below ``target_dim``.
    """
    t, d = seq.frames.shape
    if t < 2:
        raise ValueError(f"PCA needs at least 2 frames, got {t}")
    if not 1 <= target_dim <= min(t, d):
        raise ValueError(
            f"target_dim must be in [1, {min(t, d)}] for a {t}x{d} sequence, got {target_dim}"
        )

    mean = seq.frames.mean(axis=0)
    centered = seq.frames - mean
    cov = (centered.T @ centered) / t
    values, vectors = _jacobi_eigh(cov)

    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    rank = int((values > _ZERO_VARIANCE_REL * max(values[0], 0.0)).sum()) if values.size else 0
    if rank < target_dim:
        raise RankDeficientError(
            f"covariance rank is {rank}, cannot extract {target_dim} components"
        )

    components = vectors[:, :target_dim].copy()
    for k in range(target_dim):
        anchor = int(np.argmax(np.abs(components[:, k])))
        if components[anchor, k] < 0:
            components[:, k] = -components[:, k]
    return PcaModel(mean=mean, components=components, eigenvalues=values[:target_dim])


def project(seq: FeatureSequence, model: PcaModel) -> FeatureSequence:
    """Center the sequence and project it onto the model's components."""
    if model.components.shape[0] != seq.num_features:
        raise ValueError(
            f"model is for {model.components.shape[0]} features, sequence has {seq.num_features}"
        )
    return FeatureSequence((seq.frames - model.mean) @ model.components, source=seq.source)
