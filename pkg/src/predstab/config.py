"""Flat ``section.key = value`` experiment configuration.

Example::

    # sparse regime
    data.num_classes = 20
    data.samples_per_class = 40
    model.hidden = 32
    train.epochs = 60
    strategy.kinds = random, prediction_stability, prediction_stability@logit
    strategy.interval = 2

Blank lines and ``#`` comments are ignored. Lists are comma separated.
"""

from __future__ import annotations

from pathlib import Path

from . import nn
from .acquisition import KINDS, StrategySpec
from .errors import InvalidArgument
from .loop import DataSource, ExperimentConfig
from .pool import BlobSpec


class ConfigError(ValueError):
    """Unknown key or unparseable value; carries the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


def _int_list(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _str_list(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _opt_int(text):
    return None if text.strip().lower() in ("", "none") else int(text)


def _opt_str(text):
    return None if text.strip().lower() in ("", "none") else text.strip()


# key -> (parser, default)
SCHEMA = {
    "data.num_classes": (int, 4),
    "data.samples_per_class": (int, 100),
    "data.dim": (int, 2),
    "data.center_scale": (float, 1.0),
    "data.noise_sigma": (float, 0.5),
    "data.seed": (int, 0),
    "data.test_samples_per_class": (_opt_int, None),
    "data.path": (_opt_str, None),
    "data.test_path": (_opt_str, None),
    "data.test_fraction": (float, 0.2),
    "model.hidden": (_int_list, (32,)),
    "train.epochs": (int, 60),
    "train.batch_size": (int, 32),
    "train.learning_rate": (float, 0.05),
    "train.momentum": (float, 0.9),
    "al.initial": (int, 40),
    "al.batch": (int, 20),
    "al.budget": (int, 240),
    "al.trials": (int, 1),
    "al.master_seed": (int, 0),
    "strategy.kinds": (_str_list, ("random",)),
    "strategy.interval": (int, 5),
    "strategy.count": (int, 5),
    "strategy.seed": (int, 0),
    "run.jobs": (int, 1),
}

NUMERIC_KEYS = tuple(k for k, (p, _) in SCHEMA.items() if p in (int, float))


def defaults() -> dict:
    return {k: d for k, (_, d) in SCHEMA.items()}


def parse_value(key: str, text: str):
    if key not in SCHEMA:
        raise ConfigError(key, "unknown configuration key")
    parser = SCHEMA[key][0]
    try:
        return parser(text.strip())
    except ValueError:
        raise ConfigError(key, f"cannot parse {text.strip()!r}") from None


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key = key.strip()
        values[key] = parse_value(key, value)
    return values


def load(path=None, overrides=()) -> dict:
    """Defaults, then the file, then ``key=value`` overrides, in that order."""
    values = defaults()
    if path is not None:
        values.update(parse_text(Path(path).read_text(encoding="utf-8")))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(item, "override must look like key=value")
        values[key.strip()] = parse_value(key.strip(), value)
    return values


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return "none" if value is None else str(value)


def strategy_specs(values: dict) -> list:
    specs = []
    for label in values["strategy.kinds"]:
        try:
            specs.append(StrategySpec.parse(
                label,
                interval=values["strategy.interval"],
                count=values["strategy.count"],
                seed=values["strategy.seed"],
            ))
        except InvalidArgument as exc:
            raise ConfigError("strategy.kinds", f"{exc} (valid kinds: {', '.join(KINDS)})") from None
    if not specs:
        raise ConfigError("strategy.kinds", "at least one strategy is required")
    return specs


def data_source(values: dict) -> DataSource:
    try:
        blobs = BlobSpec(
            num_classes=values["data.num_classes"],
            samples_per_class=values["data.samples_per_class"],
            dim=values["data.dim"],
            center_scale=values["data.center_scale"],
            noise_sigma=values["data.noise_sigma"],
            seed=values["data.seed"],
        )
    except InvalidArgument as exc:
        raise ConfigError("data", str(exc)) from None
    return DataSource(
        blobs=blobs,
        test_samples_per_class=values["data.test_samples_per_class"],
        path=values["data.path"],
        test_path=values["data.test_path"],
        test_fraction=values["data.test_fraction"],
    )


def experiment_configs(values: dict) -> list:
    """One ExperimentConfig per listed strategy, sharing everything else."""
    source = data_source(values)
    try:
        train_cfg = nn.TrainConfig(
            epochs=values["train.epochs"],
            batch_size=values["train.batch_size"],
            learning_rate=values["train.learning_rate"],
            momentum=values["train.momentum"],
        )
    except InvalidArgument as exc:
        raise ConfigError("train", str(exc)) from None
    configs = []
    for spec in strategy_specs(values):
        try:
            configs.append(ExperimentConfig(
                data=source,
                hidden=values["model.hidden"],
                initial=values["al.initial"],
                batch=values["al.batch"],
                budget=values["al.budget"],
                train=train_cfg,
                strategy=spec,
                trials=values["al.trials"],
                master_seed=values["al.master_seed"],
            ))
        except InvalidArgument as exc:
            raise ConfigError("al/strategy", str(exc)) from None
    return configs
