"""Sample universe, labeled/unlabeled partition, and dataset sources."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, InvalidState, ParseError


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if X.ndim != 2:
            raise InvalidArgument(f"features must be a 2-d matrix, got shape {X.shape}")
        if y.shape != (X.shape[0],):
            raise InvalidArgument(f"{X.shape[0]} feature rows but labels shape {y.shape}")
        if self.num_classes < 1:
            raise InvalidArgument("num_classes must be positive")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise InvalidArgument(f"labels must lie in [0, {self.num_classes})")
        if not np.all(np.isfinite(X)):
            raise InvalidArgument("features must be finite")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass
class PoolState:
    """Ascending index arrays for the labeled and unlabeled halves of the pool."""

    dataset: Dataset
    labeled: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    unlabeled: np.ndarray = None

    def __post_init__(self):
        n = len(self.dataset)
        self.labeled = np.sort(np.asarray(self.labeled, dtype=np.int64))
        if self.unlabeled is None:
            self.unlabeled = np.setdiff1d(np.arange(n), self.labeled)
        else:
            self.unlabeled = np.sort(np.asarray(self.unlabeled, dtype=np.int64))
        self.check()

    @classmethod
    def fresh(cls, dataset: Dataset) -> "PoolState":
        return cls(dataset)

    @property
    def n_labeled(self) -> int:
        return len(self.labeled)

    @property
    def n_unlabeled(self) -> int:
        return len(self.unlabeled)

    def check(self):
        """Raise InvalidState unless labeled/unlabeled partition 0..n-1 exactly."""
        n = len(self.dataset)
        both = np.concatenate([self.labeled, self.unlabeled])
        if len(both) != n or not np.array_equal(np.sort(both), np.arange(n)):
            raise InvalidState("labeled and unlabeled sets do not partition the dataset")

    def labeled_data(self):
        return self.dataset.features[self.labeled], self.dataset.labels[self.labeled]

    def unlabeled_features(self):
        return self.dataset.features[self.unlabeled]

    def copy(self) -> "PoolState":
        return PoolState(self.dataset, self.labeled.copy(), self.unlabeled.copy())


def annotate(pool: PoolState, indices) -> PoolState:
    """Move ``indices`` from unlabeled to labeled; labels come from the dataset."""
    idx = np.asarray(list(indices), dtype=np.int64)
    if idx.size == 0:
        return pool.copy()
    if len(np.unique(idx)) != idx.size:
        raise InvalidArgument("annotation indices must be distinct")
    n = len(pool.dataset)
    bad = idx[(idx < 0) | (idx >= n)]
    if bad.size:
        raise InvalidArgument(f"index {int(bad[0])} out of range for pool of {n}")
    already = np.intersect1d(idx, pool.labeled)
    if already.size:
        raise InvalidArgument(f"index {int(already[0])} is already labeled")
    return PoolState(
        pool.dataset,
        np.union1d(pool.labeled, idx),
        np.setdiff1d(pool.unlabeled, idx),
    )


def balanced_initial_sample(pool: PoolState, k: int, rng: np.random.Generator) -> PoolState:
    """Label k/C uniformly chosen unlabeled samples from every class."""
    C = pool.dataset.num_classes
    if k < 0 or k % C:
        raise InvalidArgument(f"initial size {k} is not divisible by {C} classes")
    per_class = k // C
    labels = pool.dataset.labels[pool.unlabeled]
    chosen = []
    for c in range(C):
        members = pool.unlabeled[labels == c]
        if len(members) < per_class:
            raise InvalidState(
                f"class {c} has {len(members)} unlabeled samples, need {per_class}"
            )
        chosen.append(rng.choice(members, size=per_class, replace=False))
    return annotate(pool, np.concatenate(chosen) if chosen else [])


@dataclass(frozen=True)
class BlobSpec:
    num_classes: int = 4
    samples_per_class: int = 100
    dim: int = 2
    center_scale: float = 1.0
    noise_sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        for name in ("num_classes", "samples_per_class", "dim"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.center_scale > 0:
            raise InvalidArgument(f"center_scale must be > 0, got {self.center_scale}")
        if not self.noise_sigma >= 0:
            raise InvalidArgument(f"noise_sigma must be >= 0, got {self.noise_sigma}")


def blob_centers(spec: BlobSpec) -> np.ndarray:
    rng = np.random.default_rng([spec.seed, 0])
    return rng.uniform(-spec.center_scale, spec.center_scale, size=(spec.num_classes, spec.dim))


def _sample_blobs(spec: BlobSpec, per_class: int, stream: int) -> Dataset:
    centers = blob_centers(spec)
    rng = np.random.default_rng([spec.seed, stream])
    labels = np.repeat(np.arange(spec.num_classes), per_class)
    noise = rng.standard_normal((labels.size, spec.dim)) * spec.noise_sigma
    return Dataset(centers[labels] + noise, labels, spec.num_classes)


def generate_blobs(spec: BlobSpec) -> Dataset:
    """Isotropic Gaussian blobs around centers drawn from [-scale, scale]^dim.

    Rows are grouped by class in ascending order. Centers and noise come from
    separate seeded streams so the test split can share the centers.
    """
    return _sample_blobs(spec, spec.samples_per_class, stream=1)


def generate_test_blobs(spec: BlobSpec, samples_per_class: int | None = None) -> Dataset:
    """Independent draw around the same centers with a derived noise seed."""
    per_class = spec.samples_per_class if samples_per_class is None else samples_per_class
    if per_class < 1:
        raise InvalidArgument("test samples_per_class must be >= 1")
    return _sample_blobs(spec, per_class, stream=2)


def standardize(X: np.ndarray) -> np.ndarray:
    """Zero-mean, unit-variance columns; constant columns become all zeros."""
    X = np.asarray(X, dtype=np.float64)
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    out = X - mu
    nonconst = sd > 0
    out[:, nonconst] /= sd[nonconst]
    out[:, ~nonconst] = 0.0
    return out


def read_csv_raw(path) -> tuple:
    """Parse the dataset CSV without standardizing. Returns (features, labels)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ParseError("missing header", line=1)
        if header[-1].strip() != "label" or len(header) < 2:
            raise ParseError("header must be f0,...,f{d-1},label", line=1)
        width = len(header)
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", line=lineno)
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError:
                raise ParseError("non-numeric feature value", line=lineno) from None
            try:
                label = int(row[-1])
            except ValueError:
                raise ParseError(f"label {row[-1]!r} is not an integer", line=lineno) from None
            if label < 0:
                raise ParseError(f"negative label {label}", line=lineno)
            if not all(np.isfinite(feats)):
                raise ParseError("non-finite feature value", line=lineno)
            rows.append(feats)
            labels.append(label)
    if not rows:
        raise ParseError("no samples")
    return np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64)


def load_csv_dataset(path) -> Dataset:
    X, y = read_csv_raw(path)
    return Dataset(standardize(X), y, int(y.max()) + 1)


def write_csv_dataset(dataset: Dataset, path) -> None:
    """Write with ``repr`` floats so a reload is lossless."""
    path = Path(path)
    header = [f"f{j}" for j in range(dataset.dim)] + ["label"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def stratified_split(dataset: Dataset, test_fraction: float, seed: int):
    """Per-class holdout for file datasets that ship without a test file."""
    if not 0 < test_fraction < 1:
        raise InvalidArgument("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx = []
    for c in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == c)
        take = int(round(len(members) * test_fraction))
        if take:
            test_idx.append(rng.choice(members, size=take, replace=False))
    test_idx = np.sort(np.concatenate(test_idx)) if test_idx else np.zeros(0, dtype=np.int64)
    train_idx = np.setdiff1d(np.arange(len(dataset)), test_idx)
    X, y = dataset.features, dataset.labels
    return (
        Dataset(X[train_idx], y[train_idx], dataset.num_classes),
        Dataset(X[test_idx], y[test_idx], dataset.num_classes),
    )
