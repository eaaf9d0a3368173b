"""Pipeline configuration: one INI file, full defaults, flag overrides win.

Every key has a default, so an empty config file runs the whole pipeline
on files named ``articles.jsonl``, ``prices.csv``, and ``aliases.csv``
next to the config. Relative paths resolve against the config file's
directory. Overrides use dotted ``section.key=value`` form.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Sequence

from .errors import ConfigError
from .ingest import DateRange, parse_date

# The full schema: section -> key -> default (as written in a config file).
DEFAULTS: dict[str, dict[str, str]] = {
    "paths": {
        "articles": "articles.jsonl",
        "prices": "prices.csv",
        "aliases": "aliases.csv",
        "category_seeds": "",  # empty means the packaged seed list
        "work_dir": "work",
    },
    "dates": {
        "train_start": "1900-01-01",
        "train_end": "2012-12-31",
        "valid_end": "2013-06-15",
    },
    "lexicon": {
        "keywords": "1000",
        "category_words": "100",
    },
    "embedding": {
        "dimension": "100",
        "window": "5",
        "negatives": "5",
        "epochs": "5",
        "learning_rate": "0.025",
        "min_count": "5",
    },
    "training": {
        "hidden": "1024,1024,1024,1024",
        "learning_rate": "0.05",
        "decay": "0.5",
        "decay_every": "10",
        "batch_size": "64",
        "epochs": "30",
        "l2": "0.0",
        "patience": "0",
    },
    "graph": {
        "threshold": "0.8",
        "min_overlap": "252",
        "window_start": "",  # empty start and end mean all common dates
        "window_end": "",
        "iterations": "1",
        "clamp_observed": "false",
    },
    "sweep": {
        "taus": "0.0,0.2,0.4,0.6,0.8,1.0",
        "predict_tau": "0.8",
    },
    "synth": {
        "tickers": "50",
        "group_count": "12",
        "group_size": "3",
        "actives_per_group": "2",
        "start": "2011-01-03",
        "end": "2013-12-31",
        "news_start": "2011-02-01",
        "samples_per_day": "7.0",
        "noise": "0.1",
        "driver_weight": "0.97",
        "mean_reversion": "0.9",
        "volatility": "0.08",
        "seed": "7",
    },
    "pipeline": {
        "seed": "1",
    },
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    """Typed view of the merged defaults, config file, and overrides."""

    articles: Path
    prices: Path
    aliases: Path
    category_seeds: Path | None
    work_dir: Path
    train_start: Date
    train_end: Date
    valid_end: Date
    keywords: int
    category_words: int
    embedding_dimension: int
    embedding_window: int
    embedding_negatives: int
    embedding_epochs: int
    embedding_learning_rate: float
    embedding_min_count: int
    hidden: tuple[int, ...]
    learning_rate: float
    decay: float
    decay_every: int
    batch_size: int
    epochs: int
    l2: float
    patience: int
    graph_threshold: float
    graph_min_overlap: int
    graph_window: DateRange | None
    iterations: int
    clamp_observed: bool
    taus: tuple[float, ...]
    predict_tau: float
    seed: int
    raw: tuple[tuple[str, str, str], ...]  # merged (section, key, value), sorted

    def config_text(self, keys: Sequence[tuple[str, str]]) -> str:
        """Canonical text of the named keys, for per-stage config hashing."""
        wanted = set(keys)
        lines = [f"{s}.{k}={v}" for s, k, v in self.raw if (s, k) in wanted]
        return "\n".join(lines) + "\n"


def _merge(path: Path, overrides: Sequence[str]) -> dict[str, dict[str, str]]:
    merged = {section: dict(keys) for section, keys in DEFAULTS.items()}
    parser = configparser.RawConfigParser()
    parser.optionxform = str  # keep keys case-sensitive
    try:
        with path.open("r", encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    for section in parser.sections():
        if section not in merged:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser.items(section):
            if key not in merged[section]:
                raise ConfigError(f"{path}: unknown key {section}.{key}")
            merged[section][key] = value.strip()
    for item in overrides:
        dotted, sep, value = item.partition("=")
        section, dot, key = dotted.partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        if section not in merged or key not in merged[section]:
            raise ConfigError(f"override names unknown key {section}.{key}")
        merged[section][key] = value.strip()
    return merged


def _int(merged: dict, section: str, key: str) -> int:
    value = merged[section][key]
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: expected an integer, got {value!r}") from exc


def _float(merged: dict, section: str, key: str) -> float:
    value = merged[section][key]
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: expected a number, got {value!r}") from exc


def _bool(merged: dict, section: str, key: str) -> bool:
    value = merged[section][key].lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"{section}.{key}: expected a boolean, got {value!r}")


def _date(merged: dict, section: str, key: str) -> Date:
    try:
        return parse_date(merged[section][key])
    except Exception as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def _int_list(merged: dict, section: str, key: str) -> tuple[int, ...]:
    value = merged[section][key]
    try:
        return tuple(int(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(
            f"{section}.{key}: expected comma-separated integers, got {value!r}"
        ) from exc


def _float_list(merged: dict, section: str, key: str) -> tuple[float, ...]:
    value = merged[section][key]
    try:
        return tuple(float(part) for part in value.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(
            f"{section}.{key}: expected comma-separated numbers, got {value!r}"
        ) from exc


def _path(merged: dict, section: str, key: str, base: Path) -> Path:
    value = merged[section][key]
    if not value:
        raise ConfigError(f"{section}.{key}: path must be non-empty")
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def load_config(path: str | Path, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Parse and validate the config; raises ConfigError before any work runs."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    base = path.resolve().parent
    merged = _merge(path, overrides)

    window_start = merged["graph"]["window_start"]
    window_end = merged["graph"]["window_end"]
    if bool(window_start) != bool(window_end):
        raise ConfigError("graph.window_start and graph.window_end must be set together")
    graph_window = None
    if window_start:
        try:
            graph_window = DateRange(parse_date(window_start), parse_date(window_end))
        except Exception as exc:
            raise ConfigError(f"graph window: {exc}") from exc

    seeds_value = merged["paths"]["category_seeds"]
    category_seeds = (
        _path(merged, "paths", "category_seeds", base) if seeds_value else None
    )

    config = PipelineConfig(
        articles=_path(merged, "paths", "articles", base),
        prices=_path(merged, "paths", "prices", base),
        aliases=_path(merged, "paths", "aliases", base),
        category_seeds=category_seeds,
        work_dir=_path(merged, "paths", "work_dir", base),
        train_start=_date(merged, "dates", "train_start"),
        train_end=_date(merged, "dates", "train_end"),
        valid_end=_date(merged, "dates", "valid_end"),
        keywords=_int(merged, "lexicon", "keywords"),
        category_words=_int(merged, "lexicon", "category_words"),
        embedding_dimension=_int(merged, "embedding", "dimension"),
        embedding_window=_int(merged, "embedding", "window"),
        embedding_negatives=_int(merged, "embedding", "negatives"),
        embedding_epochs=_int(merged, "embedding", "epochs"),
        embedding_learning_rate=_float(merged, "embedding", "learning_rate"),
        embedding_min_count=_int(merged, "embedding", "min_count"),
        hidden=_int_list(merged, "training", "hidden"),
        learning_rate=_float(merged, "training", "learning_rate"),
        decay=_float(merged, "training", "decay"),
        decay_every=_int(merged, "training", "decay_every"),
        batch_size=_int(merged, "training", "batch_size"),
        epochs=_int(merged, "training", "epochs"),
        l2=_float(merged, "training", "l2"),
        patience=_int(merged, "training", "patience"),
        graph_threshold=_float(merged, "graph", "threshold"),
        graph_min_overlap=_int(merged, "graph", "min_overlap"),
        graph_window=graph_window,
        iterations=_int(merged, "graph", "iterations"),
        clamp_observed=_bool(merged, "graph", "clamp_observed"),
        taus=_float_list(merged, "sweep", "taus"),
        predict_tau=_float(merged, "sweep", "predict_tau"),
        seed=_int(merged, "pipeline", "seed"),
        raw=tuple(
            sorted(
                (section, key, value)
                for section, keys in merged.items()
                for key, value in keys.items()
            )
        ),
    )
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    def require(condition: bool, message: str) -> None:
        if not condition:
            raise ConfigError(message)

    require(config.keywords > 0, "lexicon.keywords must be positive")
    require(config.category_words > 0, "lexicon.category_words must be positive")
    require(
        config.train_start <= config.train_end,
        "dates.train_start must not be after dates.train_end",
    )
    require(
        config.train_end < config.valid_end,
        "dates.train_end must precede dates.valid_end",
    )
    for name in ("dimension", "window", "negatives", "epochs", "min_count"):
        require(
            getattr(config, f"embedding_{name}") > 0,
            f"embedding.{name} must be positive",
        )
    require(config.embedding_learning_rate > 0, "embedding.learning_rate must be positive")
    require(bool(config.hidden), "training.hidden needs at least one layer size")
    require(all(h > 0 for h in config.hidden), "training.hidden sizes must be positive")
    require(config.learning_rate > 0, "training.learning_rate must be positive")
    require(0 < config.decay <= 1, "training.decay must be in (0, 1]")
    require(config.decay_every >= 1, "training.decay_every must be at least 1")
    require(config.batch_size >= 1, "training.batch_size must be at least 1")
    require(config.epochs >= 0, "training.epochs must be non-negative")
    require(config.l2 >= 0, "training.l2 must be non-negative")
    require(config.patience >= 0, "training.patience must be non-negative")
    require(0 <= config.graph_threshold <= 1, "graph.threshold must be in [0, 1]")
    require(config.graph_min_overlap >= 2, "graph.min_overlap must be at least 2")
    require(config.iterations >= 0, "graph.iterations must be non-negative")
    require(bool(config.taus), "sweep.taus needs at least one value")
    require(all(t >= 0 for t in config.taus), "sweep.taus must be non-negative")
    require(config.predict_tau >= 0, "sweep.predict_tau must be non-negative")
