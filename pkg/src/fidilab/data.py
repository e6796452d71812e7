"""Labeled feature-vector datasets: synthetic generation, CSV I/O, the PK
identity-balanced batch sampler, and identity-disjoint splitting.

The synthetic generator works directly in feature space. Identities come
in confusable pairs: two cluster centers a configurable distance apart,
so that the only way to tell the pair apart is a small, specific
difference, while intra-identity spread (noise plus fixed per-camera
offsets) can be much larger. That is the regime where fine-grained
losses and margin losses part ways.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError, SamplingError, ShapeError
from .numerics import Rng


@dataclass(frozen=True)
class SampleSet:
    """Immutable labeled feature set.

    features: (N, F) float64. identity/camera: (N,) non-negative ints.
    Identity labels are dense 0..C-1 after construction (build via
    ``make_sampleset`` unless the inputs are already dense).
    """

    features: np.ndarray
    identity: np.ndarray
    camera: np.ndarray

    def __post_init__(self):
        n = self.features.shape[0]
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.identity.shape != (n,) or self.camera.shape != (n,):
            raise ShapeError(
                f"label lengths {self.identity.shape[0]}/{self.camera.shape[0]} "
                f"do not match {n} feature rows")
        if n and (self.identity.min() < 0 or self.camera.min() < 0):
            raise ConfigError("identity and camera labels must be non-negative")
        if n:
            uniq = np.unique(self.identity)
            if uniq[0] != 0 or uniq[-1] != len(uniq) - 1:
                raise ConfigError("identity labels must be dense 0..C-1; "
                                  "use make_sampleset to densify")

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_identities(self) -> int:
        return int(self.identity.max()) + 1 if self.num_samples else 0


def make_sampleset(features, identity, camera) -> SampleSet:
    """Build a SampleSet, densifying identity labels.

    Original labels map to 0..C-1 in sorted order, so densification is
    deterministic and order-independent.
    """
    feats = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    ident = np.asarray(identity, dtype=np.int64)
    cams = np.asarray(camera, dtype=np.int64)
    if ident.size:
        uniq, dense = np.unique(ident, return_inverse=True)
        if uniq[0] < 0:
            raise ConfigError("identity labels must be non-negative")
        ident = dense.astype(np.int64)
    return SampleSet(feats, ident, cams)


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic dataset knobs.

    pair_separation is the exact Euclidean distance between the two
    centers of each confusable identity pair; intra_noise the per-
    dimension Gaussian std around a center; camera_offset_scale the
    per-dimension std of the fixed (identity, camera) offset.

    The feature space is split into a small identity subspace (the last
    max(2, F//4) dimensions) and a nuisance remainder. Identity centers,
    including the pair separations, live in the identity subspace (unit
    per-dim scale); the fixed per-(identity, camera) offsets live in the
    nuisance subspace; sample noise is isotropic over all F dims. All
    identity-discriminating structure therefore sits in a few globally
    consistent directions while most feature variance is nuisance, so a
    metric model has structure worth learning and the learned weighting
    transfers to held-out identities.
    """

    num_identity_pairs: int = 10
    samples_per_identity: int = 8
    feature_dim: int = 16
    pair_separation: float = 1.0
    intra_noise: float = 0.25
    camera_count: int = 2
    camera_offset_scale: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ConfigError("feature_dim must be >= 1")
        if self.num_identity_pairs < 1 or self.samples_per_identity < 1 or self.camera_count < 1:
            raise ConfigError("counts must be >= 1")
        if self.pair_separation < 0:
            raise ConfigError("pair_separation must be >= 0")
        if self.intra_noise <= 0:
            raise ConfigError("intra_noise must be > 0")
        if self.camera_offset_scale < 0:
            raise ConfigError("camera_offset_scale must be >= 0")

    @property
    def fine_dim(self) -> int:
        return min(self.feature_dim, max(2, self.feature_dim // 4))


@dataclass(frozen=True)
class Batch:
    """Index selection produced by the PK sampler: P identities x K
    instances each."""

    indices: np.ndarray
    identities_in_batch: int
    instances_per_identity: int

    def __post_init__(self):
        if len(self.indices) != self.identities_in_batch * self.instances_per_identity:
            raise ShapeError("batch index count must equal P*K")


def generate_synthetic(cfg: SynthConfig) -> SampleSet:
    """Deterministic synthetic SampleSet of N = 2*pairs*K samples.

    Draw order (fixed so results are reproducible byte-for-byte): per
    pair, a base center ~ N(0, I) within the identity subspace and a
    unit direction in that subspace; the two identity centers sit at
    base +- (separation/2) * direction. Then one offset vector per
    (identity, camera) in the nuisance subspace, then per-sample
    isotropic noise. Sample j of an identity gets camera
    j mod camera_count.
    """
    rng = Rng(cfg.seed)
    f = cfg.feature_dim
    n_fine = cfg.fine_dim
    n_coarse = f - n_fine
    num_ids = 2 * cfg.num_identity_pairs
    k = cfg.samples_per_identity

    centers = np.empty((num_ids, f))
    for p in range(cfg.num_identity_pairs):
        base = np.zeros(f)
        base[f - n_fine:] = rng.normals(n_fine)
        direction = np.zeros(f)
        fine = rng.normals(n_fine)
        direction[f - n_fine:] = fine / np.linalg.norm(fine)
        half = 0.5 * cfg.pair_separation
        centers[2 * p] = base + half * direction
        centers[2 * p + 1] = base - half * direction

    offsets = np.zeros((num_ids, cfg.camera_count, f))
    if cfg.camera_offset_scale > 0 and n_coarse > 0:
        for i in range(num_ids):
            for c in range(cfg.camera_count):
                offsets[i, c, :n_coarse] = cfg.camera_offset_scale * rng.normals(n_coarse)
    else:
        # keep the stream identical whether or not offsets are used
        rng.u64s(2 * num_ids * cfg.camera_count * n_coarse)

    n = num_ids * k
    features = np.empty((n, f))
    identity = np.empty(n, dtype=np.int64)
    camera = np.empty(n, dtype=np.int64)
    row = 0
    for i in range(num_ids):
        for j in range(k):
            cam = j % cfg.camera_count
            features[row] = centers[i] + offsets[i, cam] + cfg.intra_noise * rng.normals(f)
            identity[row] = i
            camera[row] = cam
            row += 1
    return SampleSet(features, identity, camera)


# ---------------------------------------------------------------------------
# CSV round-trip
# ---------------------------------------------------------------------------

def save_sampleset(s: SampleSet, path) -> None:
    """Write the dataset CSV: header id,cam,f0..f{F-1}; repr() floats so
    the round-trip is exact."""
    cols = ",".join(f"f{i}" for i in range(s.feature_dim))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"id,cam,{cols}\n")
        for i in range(s.num_samples):
            feats = ",".join(repr(float(v)) for v in s.features[i])
            fh.write(f"{int(s.identity[i])},{int(s.camera[i])},{feats}\n")


def load_sampleset(path) -> SampleSet:
    """Parse a dataset CSV; malformed input raises DataFormatError with
    the offending line number."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read dataset {path}: {exc}") from exc
    if not lines or not lines[0].strip():
        raise DataFormatError(f"{path}: no header")
    header = [h.strip() for h in lines[0].split(",")]
    for col in ("id", "cam"):
        if col not in header:
            raise DataFormatError(f"{path}: line 1: missing {col!r} column")
    feat_cols = [h for h in header if h not in ("id", "cam")]
    expected = ["id", "cam"] + [f"f{i}" for i in range(len(feat_cols))]
    if header != expected:
        raise DataFormatError(
            f"{path}: line 1: header must be id,cam,f0..f{{F-1}}, got {lines[0]!r}")

    width = len(header)
    ids, cams, rows = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != width:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {width} cells, got {len(cells)}")
        try:
            ids.append(int(cells[0]))
            cams.append(int(cells[1]))
            feats = [float(c) for c in cells[2:]]
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: non-numeric cell ({exc})") from exc
        if not all(np.isfinite(v) for v in feats):
            raise DataFormatError(f"{path}: line {lineno}: non-finite feature value")
        rows.append(feats)
    features = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feat_cols))
    return make_sampleset(features, np.asarray(ids), np.asarray(cams))


# ---------------------------------------------------------------------------
# sampling / splitting
# ---------------------------------------------------------------------------

def pk_sample(s: SampleSet, p: int, k: int, rng: Rng) -> Batch:
    """Draw P identities without replacement and K instances each.

    Identities with fewer than K samples fall back to drawing with
    replacement so the batch shape stays fixed at P*K.
    """
    c = s.num_identities
    if p > c:
        raise SamplingError(f"requested {p} identities but the set has only {c}")
    if p < 1 or k < 1:
        raise SamplingError("P and K must be >= 1")
    chosen = rng.shuffled(range(c))[:p]
    indices = []
    for ident in chosen:
        pool = np.flatnonzero(s.identity == ident)
        if len(pool) >= k:
            take = rng.shuffled(range(len(pool)))[:k]
        else:
            take = [rng.randbelow(len(pool)) for _ in range(k)]
        indices.extend(int(pool[t]) for t in take)
    return Batch(np.asarray(indices, dtype=np.int64), p, k)


def split_identities(s: SampleSet, keep_fraction: float, rng: Rng) -> tuple[SampleSet, SampleSet]:
    """Identity-disjoint split: round(keep_fraction * C) identities (all
    of their samples) in the first set, the rest in the second. Labels
    are re-densified independently in each output.

    Rounding is half-up so the result does not depend on the platform's
    default rounding mode.
    """
    if not (0.0 < keep_fraction <= 1.0):
        raise ConfigError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    c = s.num_identities
    n_keep = int(np.floor(keep_fraction * c + 0.5))
    order = rng.shuffled(range(c))
    kept_ids = set(order[:n_keep])

    keep_mask = np.asarray([int(i) in kept_ids for i in s.identity], dtype=bool)
    first = make_sampleset(s.features[keep_mask], s.identity[keep_mask],
                           s.camera[keep_mask])
    second = make_sampleset(s.features[~keep_mask], s.identity[~keep_mask],
                            s.camera[~keep_mask])
    return first, second
