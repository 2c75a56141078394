"""Pool-based active-learning driver with per-epoch prediction snapshots.

One *round* retrains a freshly initialized model on the labeled set, records
unlabeled-pool predictions at the scheduled epochs, evaluates on the test
set, scores the pool and labels the top ``b``. A *trial* is a balanced
initial draw followed by rounds until the budget is reached. An *experiment*
averages trials.

All randomness is derived from ``(master_seed, trial, purpose, round)`` so
that every strategy sees the same initial labeled set, the same round-0
model and the same shuffles for a given trial. Strategies can then be
compared trial by trial.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import nn
from .acquisition import SnapshotTensor, StrategySpec, score_pool, select_top_b
from .errors import InvalidArgument, InvalidState
from .pool import (
    BlobSpec,
    Dataset,
    PoolState,
    annotate,
    balanced_initial_sample,
    generate_blobs,
    generate_test_blobs,
    read_csv_raw,
    standardize,
    stratified_split,
)

log = logging.getLogger("predstab.loop")

# Purpose tags for seed derivation.
_INIT_SAMPLE, _MODEL_INIT, _SHUFFLE, _RANDOM_SCORES = 0, 1, 2, 3


def derive_seed(*keys: int) -> int:
    """A 64-bit seed that depends only on ``keys``."""
    seq = np.random.SeedSequence([int(k) for k in keys])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class DataSource:
    """Blobs when ``path`` is unset, otherwise a dataset CSV.

    For CSV data the test set is ``test_path`` if given, else a stratified
    ``test_fraction`` holdout. Both files are standardized with the pool's
    column statistics.
    """

    blobs: BlobSpec = field(default_factory=BlobSpec)
    test_samples_per_class: Optional[int] = None
    path: Optional[str] = None
    test_path: Optional[str] = None
    test_fraction: float = 0.2

    def load(self):
        if self.path is None:
            return generate_blobs(self.blobs), generate_test_blobs(
                self.blobs, self.test_samples_per_class
            )
        X, y = read_csv_raw(self.path)
        if self.test_path is None:
            full = Dataset(standardize(X), y, int(y.max()) + 1)
            return stratified_split(full, self.test_fraction, self.blobs.seed)
        Xt, yt = read_csv_raw(self.test_path)
        mu, sd = X.mean(axis=0), X.std(axis=0)
        sd = np.where(sd > 0, sd, np.inf)
        C = int(max(y.max(), yt.max())) + 1
        return Dataset((X - mu) / sd, y, C), Dataset((Xt - mu) / sd, yt, C)


@dataclass(frozen=True)
class ExperimentConfig:
    data: DataSource = field(default_factory=DataSource)
    hidden: tuple = (32,)
    initial: int = 40
    batch: int = 20
    budget: int = 240
    train: nn.TrainConfig = field(default_factory=nn.TrainConfig)
    strategy: StrategySpec = field(default_factory=lambda: StrategySpec("random"))
    trials: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if self.initial < 1:
            raise InvalidArgument("initial labeled count must be >= 1")
        if self.initial > self.budget:
            raise InvalidArgument(f"initial {self.initial} exceeds budget {self.budget}")
        if self.budget > self.initial:
            if self.batch < 1:
                raise InvalidArgument("per-round batch must be >= 1")
            if (self.budget - self.initial) % self.batch:
                raise InvalidArgument(
                    f"budget - initial = {self.budget - self.initial} "
                    f"is not a multiple of batch {self.batch}"
                )
        if self.trials < 1:
            raise InvalidArgument("trials must be >= 1")
        if any(h < 1 for h in self.hidden):
            raise InvalidArgument(f"hidden sizes must be positive, got {self.hidden}")
        # Fails early if the snapshot schedule does not fit in the epoch count.
        self.strategy.schedule(self.train.epochs)

    @property
    def num_rounds(self) -> int:
        """Selection rounds after the initial training."""
        if self.budget == self.initial:
            return 0
        return (self.budget - self.initial) // self.batch


@dataclass(frozen=True)
class RoundMetrics:
    round: int
    labeled_count: int
    test_accuracy: float
    selected: tuple = ()
    losses: tuple = ()
    wall_time: float = 0.0

    def same_outcome(self, other: "RoundMetrics") -> bool:
        """Equality ignoring wall time."""
        return (
            self.round == other.round
            and self.labeled_count == other.labeled_count
            and self.test_accuracy == other.test_accuracy
            and self.selected == other.selected
            and self.losses == other.losses
        )


@dataclass
class ExperimentResult:
    strategy: str
    trials: list

    @property
    def accuracies(self) -> np.ndarray:
        """(trials, rounds + 1) test accuracies."""
        return np.array([[m.test_accuracy for m in t] for t in self.trials])

    @property
    def labeled_counts(self) -> list:
        return [m.labeled_count for m in self.trials[0]]

    @property
    def mean(self) -> np.ndarray:
        return self.accuracies.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.accuracies.std(axis=0)

    @property
    def final_accuracies(self) -> np.ndarray:
        return self.accuracies[:, -1]


# Learners ------------------------------------------------------------------

PredictFn = Callable[[np.ndarray, str], np.ndarray]


class MLPLearner:
    """Adapter from the loop's fit/predict protocol to :mod:`predstab.nn`.

    Any object with the same three methods can stand in, e.g. a stub in tests.
    """

    def __init__(self, hidden: Sequence[int], train_cfg: nn.TrainConfig):
        self.hidden = tuple(hidden)
        self.train_cfg = train_cfg
        self.model = None

    def fit(self, X, y, num_classes, init_seed, shuffle_seed, epoch_hook=None):
        sizes = (X.shape[1], *self.hidden, num_classes)
        model = nn.init_model(sizes, init_seed)
        hook = None
        if epoch_hook is not None:
            def hook(epoch, m):
                epoch_hook(epoch, partial(nn.predict_pool, m))
        self.model, losses = nn.train(
            model, X, y, self.train_cfg, hook, rng=np.random.default_rng(shuffle_seed)
        )
        return losses

    def predict(self, X, space="softmax"):
        return nn.predict_pool(self.model, X, space)

    def accuracy(self, X, y):
        return nn.evaluate_accuracy(self.model, X, y)


def default_learner(cfg: ExperimentConfig):
    return MLPLearner(cfg.hidden, cfg.train)


# Driver --------------------------------------------------------------------

def run_round(
    pool: PoolState,
    cfg: ExperimentConfig,
    test: Dataset,
    trial: int,
    round_index: int,
    learner=None,
    snapshot_sink: Optional[Callable[[int, int, SnapshotTensor], None]] = None,
):
    """Train, snapshot, evaluate, then select and annotate up to ``cfg.batch`` samples.

    Returns ``(new_pool, metrics, snapshots)``; ``snapshots`` is None for
    spatial strategies. When ``select`` is False (final round), the round
    stops after evaluation.
    """
    return _run_round(pool, cfg, test, trial, round_index, learner, snapshot_sink, select=True)


def _run_round(pool, cfg, test, trial, round_index, learner, snapshot_sink, select):
    if pool.n_labeled == 0:
        raise InvalidState("cannot train with an empty labeled pool")
    started = time.perf_counter()
    learner = learner if learner is not None else default_learner(cfg)
    spec = cfg.strategy
    C = pool.dataset.num_classes
    unlabeled = pool.unlabeled.copy()
    X_u = pool.dataset.features[unlabeled]

    snapshots = None
    hook = None
    if spec.is_sequential and select:
        schedule = spec.schedule(cfg.train.epochs)
        snapshots = SnapshotTensor.empty(schedule, unlabeled, C, spec.space)

        def hook(epoch, predict):
            slot = schedule.position(epoch)
            if slot is not None:
                snapshots.values[slot] = predict(X_u, spec.space)

    X_l, y_l = pool.labeled_data()
    losses = learner.fit(
        X_l, y_l, C,
        init_seed=derive_seed(cfg.master_seed, trial, _MODEL_INIT, round_index),
        shuffle_seed=derive_seed(cfg.master_seed, trial, _SHUFFLE, round_index),
        epoch_hook=hook,
    )
    accuracy = learner.accuracy(test.features, test.labels)

    chosen = np.zeros(0, dtype=np.int64)
    if select and len(unlabeled):
        if spec.is_sequential:
            scores = score_pool(spec, snapshots=snapshots)
        else:
            rng = np.random.default_rng(
                derive_seed(spec.seed, cfg.master_seed, trial, _RANDOM_SCORES, round_index)
            )
            final = learner.predict(X_u, "softmax")
            scores = score_pool(spec, final_predictions=final, rng=rng)
        if cfg.batch > len(unlabeled):
            log.warning(
                "trial=%d round=%d batch=%d exceeds unlabeled=%d; clamped",
                trial, round_index, cfg.batch, len(unlabeled),
            )
        chosen = select_top_b(scores, unlabeled, cfg.batch)
        if snapshot_sink is not None and snapshots is not None:
            snapshot_sink(trial, round_index, snapshots)

    metrics = RoundMetrics(
        round=round_index,
        labeled_count=pool.n_labeled,
        test_accuracy=float(accuracy),
        selected=tuple(int(i) for i in chosen),
        losses=tuple(float(v) for v in losses),
        wall_time=time.perf_counter() - started,
    )
    log.info(
        "strategy=%s trial=%d round=%d n_l=%d accuracy=%.6f selected=%d wall=%.3fs",
        spec.label, trial, round_index, metrics.labeled_count,
        metrics.test_accuracy, len(chosen), metrics.wall_time,
    )
    return annotate(pool, chosen), metrics, snapshots


def initial_pool(cfg: ExperimentConfig, dataset: Dataset, trial: int) -> PoolState:
    """Balanced initial labeled set; depends on (master_seed, trial) only."""
    if cfg.budget > len(dataset):
        raise InvalidArgument(f"budget {cfg.budget} exceeds pool size {len(dataset)}")
    rng = np.random.default_rng(derive_seed(cfg.master_seed, trial, _INIT_SAMPLE))
    return balanced_initial_sample(PoolState.fresh(dataset), cfg.initial, rng)


def run_trial(
    cfg: ExperimentConfig,
    trial: int,
    data=None,
    learner_factory=None,
    snapshot_sink=None,
) -> list:
    """Round 0 plus ``cfg.num_rounds`` selection rounds; final n_l equals the budget.

    Round r trains on ``initial + r*batch`` labels. Selection happens at the
    end of rounds 0..num_rounds-1, so the last round only trains and
    evaluates on the full budget.
    """
    dataset, test = data if data is not None else cfg.data.load()
    make = learner_factory or default_learner
    pool = initial_pool(cfg, dataset, trial)
    history = []
    for r in range(cfg.num_rounds + 1):
        pool, metrics, _ = _run_round(
            pool, cfg, test, trial, r, make(cfg), snapshot_sink,
            select=r < cfg.num_rounds,
        )
        history.append(metrics)
    if pool.n_labeled != cfg.budget:
        raise InvalidState(f"trial ended with {pool.n_labeled} labels, budget {cfg.budget}")
    return history


def _trial_worker(args):
    cfg, trial, data = args
    return run_trial(cfg, trial, data)


def run_experiment(
    cfg: ExperimentConfig,
    data=None,
    jobs: int = 1,
    learner_factory=None,
    snapshot_sink=None,
) -> ExperimentResult:
    """Run ``cfg.trials`` trials and collect them in trial order.

    ``jobs > 1`` runs trials in worker processes; only the default learner
    and no snapshot sink are supported there.
    """
    data = data if data is not None else cfg.data.load()
    if jobs > 1 and learner_factory is None and snapshot_sink is None:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            trials = list(ex.map(_trial_worker, [(cfg, t, data) for t in range(cfg.trials)]))
    else:
        trials = [
            run_trial(cfg, t, data, learner_factory, snapshot_sink)
            for t in range(cfg.trials)
        ]
    return ExperimentResult(cfg.strategy.label, trials)


def snapshot_dumper(directory, strategy_label: str):
    """A snapshot sink writing one CSV per (trial, round) under ``directory``."""
    from .acquisition import write_snapshots_csv

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    def sink(trial, round_index, snapshots):
        name = f"{strategy_label.replace('@', '-')}_trial{trial}_round{round_index}.csv"
        path = directory / name
        write_snapshots_csv(snapshots, path)
        written.append(path)

    sink.written = written
    return sink
