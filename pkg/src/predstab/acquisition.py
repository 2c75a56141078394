"""Acquisition scores and top-b selection.

Two families of criteria:

* spatial: score each unlabeled sample from the final model's softmax output
  (``random``, ``entropy``, ``least_confidence``);
* sequential: score each sample from the stack of predictions recorded at
  scheduled epochs during training (``prediction_stability``,
  ``absolute_increase``).

Every score follows one convention: larger means "label this first". For the
stability criterion the stored score is the summed per-class variance across
snapshots, so the least stable samples rank highest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidArgument

SPATIAL_KINDS = ("random", "entropy", "least_confidence")
SEQUENTIAL_KINDS = ("prediction_stability", "absolute_increase")
KINDS = SPATIAL_KINDS + SEQUENTIAL_KINDS
SPACES = ("softmax", "logit")
NORMALIZATION_TOL = 1e-4


@dataclass(frozen=True)
class EpochSchedule:
    """Snapshot epochs, latest first: N_e, N_e - interval, ..."""

    epochs: tuple
    interval: int

    @property
    def count(self) -> int:
        return len(self.epochs)

    def position(self, epoch: int) -> Optional[int]:
        """0-based schedule slot for ``epoch``, or None if it is not scheduled."""
        try:
            return self.epochs.index(epoch)
        except ValueError:
            return None


def epoch_schedule(num_epochs: int, interval: int, count: int) -> EpochSchedule:
    if interval < 1 or count < 1:
        raise InvalidArgument("interval and count must both be >= 1")
    last = num_epochs - (count - 1) * interval
    if last < 1:
        raise InvalidArgument(
            f"{count} snapshots every {interval} epochs from epoch {num_epochs} "
            f"reach epoch {last}, before epoch 1"
        )
    return EpochSchedule(tuple(num_epochs - i * interval for i in range(count)), interval)


@dataclass(frozen=True)
class StrategySpec:
    kind: str
    space: str = "softmax"
    interval: int = 5
    count: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(
                f"unknown strategy {self.kind!r}; valid kinds: {', '.join(KINDS)}"
            )
        if self.space not in SPACES:
            raise InvalidArgument(f"space must be one of {SPACES}, got {self.space!r}")
        if self.is_sequential:
            if self.count < 2:
                raise InvalidArgument("sequential strategies need at least 2 snapshot epochs")
            if self.interval < 1:
                raise InvalidArgument("schedule interval must be >= 1")
        elif self.space != "softmax":
            raise InvalidArgument(f"{self.kind} scores softmax outputs only")

    @property
    def is_sequential(self) -> bool:
        return self.kind in SEQUENTIAL_KINDS

    @property
    def label(self) -> str:
        """Name used in metrics files; the logit-space variant gets a suffix."""
        return self.kind if self.space == "softmax" else f"{self.kind}@{self.space}"

    @classmethod
    def parse(cls, text: str, **kwargs) -> "StrategySpec":
        """Build from a label such as ``entropy`` or ``prediction_stability@logit``."""
        kind, _, space = text.strip().partition("@")
        return cls(kind=kind, space=space or "softmax", **kwargs)

    def schedule(self, num_epochs: int) -> Optional[EpochSchedule]:
        if not self.is_sequential:
            return None
        return epoch_schedule(num_epochs, self.interval, self.count)


@dataclass(eq=False)
class SnapshotTensor:
    """Predictions of shape (n_epochs, n_u, C), slot i holding schedule epoch i."""

    values: np.ndarray
    space: str
    pool_index: np.ndarray
    epochs: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.pool_index = np.asarray(self.pool_index, dtype=np.int64)
        if self.values.ndim != 3:
            raise InvalidArgument(f"snapshot tensor must be 3-d, got {self.values.shape}")
        if self.values.shape[0] != len(self.epochs):
            raise InvalidArgument("one snapshot slice per scheduled epoch required")
        if self.values.shape[1] != len(self.pool_index):
            raise InvalidArgument("pool index map does not match snapshot row count")
        if self.space not in SPACES:
            raise InvalidArgument(f"space must be one of {SPACES}, got {self.space!r}")

    @classmethod
    def empty(cls, schedule: EpochSchedule, pool_index, num_classes: int, space: str):
        shape = (schedule.count, len(pool_index), num_classes)
        return cls(np.full(shape, np.nan), space, pool_index, schedule.epochs)

    @property
    def n_rows(self) -> int:
        return self.values.shape[1]

    def per_sample(self) -> np.ndarray:
        """Rearranged to (n_u, n_epochs, C)."""
        return np.swapaxes(self.values, 0, 1)


def _as_prob(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if abs(p.sum(axis=-1) - 1.0).max(initial=0.0) > NORMALIZATION_TOL:
        raise InvalidArgument("expected a normalized probability vector")
    return p


def entropy_score(p) -> float:
    """Shannon entropy in nats, with 0 ln 0 = 0."""
    p = _as_prob(p)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def least_confidence_score(p) -> float:
    return float(1.0 - np.max(_as_prob(p)))


def _as_snapshots(snapshots) -> np.ndarray:
    s = np.asarray(snapshots, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2:
        raise InvalidArgument(f"expected (epochs, classes) snapshots, got shape {s.shape}")
    if s.shape[0] < 2:
        raise InvalidArgument("need at least 2 epoch snapshots")
    return s


def variance_score(snapshots) -> float:
    """Sum over classes of the population variance across epochs."""
    s = _as_snapshots(snapshots)
    return float(np.var(s, axis=0).sum())


def absolute_increase_score(snapshots) -> float:
    """L1 size of the change between consecutive snapshots, summed."""
    s = _as_snapshots(snapshots)
    return float(np.abs(np.diff(s, axis=0)).sum())


# Row-wise versions used by score_pool; each takes (n_u, ...) and returns (n_u,).

def _entropy_rows(P):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=1)


def _least_confidence_rows(P):
    return 1.0 - P.max(axis=1)


def _variance_rows(S):
    return np.var(S, axis=1).sum(axis=1)


def _absolute_increase_rows(S):
    return np.abs(np.diff(S, axis=1)).sum(axis=(1, 2))


def score_pool(
    spec: StrategySpec,
    final_predictions=None,
    snapshots: Optional[SnapshotTensor] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Score every unlabeled row; output is aligned with the input rows.

    Spatial kinds read ``final_predictions`` (softmax, shape (n_u, C)).
    Sequential kinds read ``snapshots``. The random kind only needs a row
    count, taken from whichever input is present, and draws from ``rng``
    (defaulting to ``default_rng(spec.seed)``).
    """
    if spec.kind == "random":
        if final_predictions is not None:
            n = len(final_predictions)
        elif snapshots is not None:
            n = snapshots.n_rows
        else:
            raise InvalidArgument("random scoring needs predictions or snapshots for the row count")
        rng = np.random.default_rng(spec.seed) if rng is None else rng
        return rng.random(n)

    if spec.is_sequential:
        if snapshots is None:
            raise InvalidArgument(f"{spec.kind} requires a snapshot tensor")
        if snapshots.space != spec.space:
            raise InvalidArgument(
                f"{spec.label} expects {spec.space} snapshots, got {snapshots.space}"
            )
        if snapshots.values.shape[0] < 2:
            raise InvalidArgument("need at least 2 epoch snapshots")
        if not np.all(np.isfinite(snapshots.values)):
            raise InvalidArgument("snapshot tensor has unrecorded or non-finite entries")
        S = snapshots.per_sample()
        if spec.kind == "prediction_stability":
            return _variance_rows(S)
        return _absolute_increase_rows(S)

    if final_predictions is None:
        raise InvalidArgument(f"{spec.kind} requires the final softmax predictions")
    P = np.asarray(final_predictions, dtype=np.float64)
    if P.ndim != 2:
        raise InvalidArgument(f"expected a (n_u, C) matrix, got shape {P.shape}")
    if P.shape[0] and abs(P.sum(axis=1) - 1.0).max() > NORMALIZATION_TOL:
        raise InvalidArgument(f"{spec.kind} requires softmax-space predictions")
    if spec.kind == "entropy":
        return _entropy_rows(P)
    return _least_confidence_rows(P)


def select_top_b(scores, pool_index, b: int) -> np.ndarray:
    """Pool indices of the b highest scores, ties going to the lower pool index.

    Returned in selection order. ``b`` larger than the pool is clamped.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pool_index = np.asarray(pool_index, dtype=np.int64)
    if scores.shape != pool_index.shape:
        raise InvalidArgument("scores and pool index map differ in length")
    if b < 0:
        raise InvalidArgument(f"b must be >= 0, got {b}")
    b = min(b, len(scores))
    # lexsort: last key is primary.
    order = np.lexsort((pool_index, -scores))
    return pool_index[order[:b]]


def write_snapshots_csv(snapshots: SnapshotTensor, path) -> None:
    """One row per (pool_index, epoch); epochs in schedule order within a sample."""
    C = snapshots.values.shape[2]
    rows_by_index = np.argsort(snapshots.pool_index, kind="stable")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pool_index", "epoch"] + [f"c{c}" for c in range(C)])
        for r in rows_by_index:
            for slot, epoch in enumerate(snapshots.epochs):
                w.writerow(
                    [int(snapshots.pool_index[r]), epoch]
                    + [repr(float(v)) for v in snapshots.values[slot, r]]
                )
