"""Command-line pipeline driver: one subcommand per stage.

Each stage reads its declared inputs, writes its artifacts into the work
dir, and records a manifest of content hashes so an unchanged stage is
skipped on rerun. Exit codes: 0 success, 1 validation error, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import date as Date
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import DEFAULTS, PipelineConfig, load_config
from .embedding import SkipGramConfig, load_embeddings, save_embeddings, train_skipgram
from .errors import (
    ConfigError,
    MissingArtifactError,
    ParseError,
    PipelineError,
    ValidationError,
)
from .evaluation import (
    DEFAULT_COMBINATIONS,
    render_ablation,
    render_sweep,
    run_ablation,
    run_propagation_sweep,
    write_ablation_report,
    write_sweep_report,
)
from .features import (
    BLOCK_ORDER,
    FeatureLayout,
    featurize_samples,
    load_feature_matrix,
    write_feature_matrix,
)
from .graph import (
    DNN,
    PROPAGATED,
    Prediction,
    build_graph,
    initial_vector,
    load_graph,
    propagate,
    threshold_predictions,
    write_graph,
    write_predictions,
)
from .ingest import DateRange, load_articles, load_prices, parse_date
from .lexicon import (
    build_category_lexicon,
    build_keyword_lexicon,
    load_category_lexicon,
    load_category_seeds,
    load_keyword_lexicon,
    write_category_lexicon,
    write_keyword_lexicon,
)
from .manifest import text_sha256, up_to_date, work_dir_lock, write_manifest
from .mlp import TrainConfig, load_model, predict_batch, save_model, train
from .sampling import (
    AliasMatcher,
    build_samples,
    extract_sentences,
    load_aliases,
    load_samples,
    split_by_date,
    write_samples,
)
from .synth import SynthConfig, generate_synthetic_fixture
from .tokens import tokenize

logger = logging.getLogger(__name__)

# Which stage produces each work-dir artifact, for dependency errors.
_PRODUCERS = {
    "samples_train.jsonl": "ingest",
    "samples_valid.jsonl": "ingest",
    "samples_test.jsonl": "ingest",
    "corpus.txt": "ingest",
    "embeddings.txt": "embed",
    "keywords.csv": "lexicon",
    "categories.csv": "lexicon",
    "features_train.bin": "featurize",
    "features_valid.bin": "featurize",
    "features_test.bin": "featurize",
    "skipped.csv": "featurize",
    "model.bin": "train",
    "graph.csv": "graph",
    "predictions.csv": "predict",
}

# Config keys each stage's manifest hash covers; edits to other keys do
# not invalidate the stage's cached artifacts.
_STAGE_KEYS: dict[str, tuple[tuple[str, str], ...]] = {
    "synth": tuple(("synth", key) for key in DEFAULTS["synth"]),
    "ingest": (("dates", "train_end"), ("dates", "valid_end")),
    "embed": tuple(("embedding", key) for key in DEFAULTS["embedding"])
    + (("pipeline", "seed"),),
    "lexicon": (("lexicon", "keywords"), ("lexicon", "category_words")),
    "featurize": (("dates", "train_start"), ("dates", "train_end")),
    "train": tuple(("training", key) for key in DEFAULTS["training"])
    + (("pipeline", "seed"),),
    "graph": (
        ("graph", "threshold"),
        ("graph", "min_overlap"),
        ("graph", "window_start"),
        ("graph", "window_end"),
    ),
    "predict": (
        ("graph", "iterations"),
        ("graph", "clamp_observed"),
        ("sweep", "predict_tau"),
    ),
    "evaluate": tuple(("training", key) for key in DEFAULTS["training"])
    + (
        ("pipeline", "seed"),
        ("sweep", "taus"),
        ("graph", "iterations"),
        ("graph", "clamp_observed"),
    ),
}


def _artifact(config: PipelineConfig, name: str) -> Path:
    return config.work_dir / name


def _require_artifact(config: PipelineConfig, name: str) -> Path:
    path = _artifact(config, name)
    if not path.is_file():
        raise MissingArtifactError(path, _PRODUCERS[name])
    return path


def _require_input(path: Path, key: str) -> Path:
    if not path.is_file():
        raise ValidationError(f"input file {path} not found (paths.{key})")
    return path


def _stage_hash(config: PipelineConfig, stage: str) -> str:
    return text_sha256(config.config_text(_STAGE_KEYS[stage]))


def _skip(config, stage, inputs, outputs, force: bool) -> bool:
    if force:
        return False
    if up_to_date(
        config.work_dir, stage, inputs, outputs, _stage_hash(config, stage), config.seed
    ):
        logger.info("%s: artifacts up to date, skipping", stage)
        return True
    return False


def _finish(config, stage, inputs, outputs) -> int:
    write_manifest(
        config.work_dir, stage, inputs, outputs, _stage_hash(config, stage), config.seed
    )
    return 0


def _matcher(config: PipelineConfig) -> AliasMatcher:
    return AliasMatcher(load_aliases(config.aliases))


def _price_table(config: PipelineConfig):
    return load_prices(config.prices, DateRange(config.train_start, config.train_end))


def _skipgram_config(config: PipelineConfig) -> SkipGramConfig:
    return SkipGramConfig(
        dimension=config.embedding_dimension,
        window=config.embedding_window,
        negatives=config.embedding_negatives,
        epochs=config.embedding_epochs,
        learning_rate=config.embedding_learning_rate,
        min_count=config.embedding_min_count,
        seed=config.seed,
    )


def _train_config(config: PipelineConfig) -> TrainConfig:
    return TrainConfig(
        hidden=config.hidden,
        learning_rate=config.learning_rate,
        decay=config.decay,
        decay_every=config.decay_every,
        batch_size=config.batch_size,
        epochs=config.epochs,
        l2=config.l2,
        seed=config.seed,
        patience=config.patience,
    )


def _synth_config(config: PipelineConfig) -> SynthConfig:
    values = {key: value for section, key, value in config.raw if section == "synth"}
    try:
        return SynthConfig(
            tickers=int(values["tickers"]),
            group_count=int(values["group_count"]),
            group_size=int(values["group_size"]),
            actives_per_group=int(values["actives_per_group"]),
            start=parse_date(values["start"]),
            end=parse_date(values["end"]),
            news_start=parse_date(values["news_start"]),
            samples_per_day=float(values["samples_per_day"]),
            noise=float(values["noise"]),
            driver_weight=float(values["driver_weight"]),
            mean_reversion=float(values["mean_reversion"]),
            volatility=float(values["volatility"]),
            seed=int(values["seed"]),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"synth section: {exc}") from exc


def cmd_synth(config: PipelineConfig, force: bool) -> int:
    synth_config = _synth_config(config)
    inputs: dict[str, Path] = {}
    outputs = {
        "articles": config.articles,
        "prices": config.prices,
        "aliases": config.aliases,
    }
    if _skip(config, "synth", inputs, outputs, force):
        return 0
    summary = generate_synthetic_fixture(synth_config, config.articles.parent)
    for src, dst in (
        (summary.articles_path, config.articles),
        (summary.prices_path, config.prices),
        (summary.aliases_path, config.aliases),
    ):
        if src != dst:
            dst.parent.mkdir(parents=True, exist_ok=True)
            src.replace(dst)
    logger.info(
        "synth: %d tickers over %d trading days, %d articles, about %d samples",
        summary.tickers,
        summary.trading_days,
        summary.articles,
        summary.expected_samples,
    )
    return _finish(config, "synth", inputs, outputs)


def cmd_ingest(config: PipelineConfig, force: bool) -> int:
    inputs = {
        "articles": _require_input(config.articles, "articles"),
        "prices": _require_input(config.prices, "prices"),
        "aliases": _require_input(config.aliases, "aliases"),
    }
    outputs = {
        name: _artifact(config, name)
        for name in (
            "samples_train.jsonl",
            "samples_valid.jsonl",
            "samples_test.jsonl",
            "corpus.txt",
        )
    }
    if _skip(config, "ingest", inputs, outputs, force):
        return 0
    matcher = _matcher(config)
    prices = _price_table(config)
    sentences = extract_sentences(load_articles(config.articles), matcher)
    samples = build_samples(sentences, prices)
    split = split_by_date(samples, config.train_end, config.valid_end)
    write_samples(split.train, outputs["samples_train.jsonl"])
    write_samples(split.validation, outputs["samples_valid.jsonl"])
    write_samples(split.test, outputs["samples_test.jsonl"])
    with outputs["corpus.txt"].open("w", encoding="utf-8", newline="\n") as fh:
        for sentence in sentences:
            if sentence.article_date <= config.train_end:
                fh.write(sentence.text.replace("\n", " ") + "\n")
    logger.info(
        "ingest: %d mention sentences; %d/%d/%d train/valid/test samples",
        len(sentences),
        len(split.train),
        len(split.validation),
        len(split.test),
    )
    return _finish(config, "ingest", inputs, outputs)


def cmd_embed(config: PipelineConfig, force: bool) -> int:
    corpus_path = _require_artifact(config, "corpus.txt")
    inputs = {"corpus.txt": corpus_path}
    outputs = {"embeddings.txt": _artifact(config, "embeddings.txt")}
    if _skip(config, "embed", inputs, outputs, force):
        return 0
    with corpus_path.open("r", encoding="utf-8") as fh:
        sentences = [tokens for tokens in (tokenize(line) for line in fh) if tokens]
    table = train_skipgram(sentences, _skipgram_config(config))
    save_embeddings(table, outputs["embeddings.txt"])
    logger.info(
        "embed: %d sentences -> %d words x %d dims",
        len(sentences),
        len(table),
        table.dimension,
    )
    return _finish(config, "embed", inputs, outputs)


def cmd_lexicon(config: PipelineConfig, force: bool) -> int:
    samples_path = _require_artifact(config, "samples_train.jsonl")
    embeddings_path = _require_artifact(config, "embeddings.txt")
    inputs = {
        "samples_train.jsonl": samples_path,
        "embeddings.txt": embeddings_path,
        "aliases": _require_input(config.aliases, "aliases"),
    }
    if config.category_seeds is not None:
        inputs["category_seeds"] = _require_input(config.category_seeds, "category_seeds")
    outputs = {
        "keywords.csv": _artifact(config, "keywords.csv"),
        "categories.csv": _artifact(config, "categories.csv"),
    }
    if _skip(config, "lexicon", inputs, outputs, force):
        return 0
    table = load_embeddings(embeddings_path)
    train_samples = load_samples(samples_path, _matcher(config))
    keywords = build_keyword_lexicon(table, train_samples, k=config.keywords)
    category_seeds = load_category_seeds(config.category_seeds)
    categories = build_category_lexicon(table, category_seeds, m=config.category_words)
    write_keyword_lexicon(keywords, outputs["keywords.csv"])
    write_category_lexicon(categories, outputs["categories.csv"])
    logger.info(
        "lexicon: %d keywords, %d categories x up to %d words",
        len(keywords),
        len(categories.categories),
        config.category_words,
    )
    return _finish(config, "lexicon", inputs, outputs)


def cmd_featurize(config: PipelineConfig, force: bool) -> int:
    inputs = {
        name: _require_artifact(config, name)
        for name in (
            "samples_train.jsonl",
            "samples_valid.jsonl",
            "samples_test.jsonl",
            "keywords.csv",
            "categories.csv",
        )
    }
    inputs["prices"] = _require_input(config.prices, "prices")
    inputs["aliases"] = _require_input(config.aliases, "aliases")
    outputs = {
        name: _artifact(config, name)
        for name in (
            "features_train.bin",
            "features_valid.bin",
            "features_test.bin",
            "skipped.csv",
        )
    }
    if _skip(config, "featurize", inputs, outputs, force):
        return 0
    keywords = load_keyword_lexicon(inputs["keywords.csv"])
    categories = load_category_lexicon(inputs["categories.csv"])
    layout = FeatureLayout(
        blocks=BLOCK_ORDER, k=len(keywords), n_categories=len(categories.categories)
    )
    prices = _price_table(config)
    matcher = _matcher(config)
    all_skipped: list[tuple[str, str, Date, str]] = []
    for split_name in ("train", "valid", "test"):
        samples = load_samples(inputs[f"samples_{split_name}.jsonl"], matcher)
        matrix, skipped = featurize_samples(samples, prices, keywords, categories, layout)
        write_feature_matrix(matrix, outputs[f"features_{split_name}.bin"])
        all_skipped.extend((split_name, t, d, reason) for t, d, reason in skipped)
        logger.info(
            "featurize: %s split %d rows x %d dims, %d skipped",
            split_name,
            len(matrix),
            layout.dimension,
            len(skipped),
        )
    with outputs["skipped.csv"].open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("split,ticker,date,reason\n")
        for split_name, ticker, d, reason in all_skipped:
            fh.write(f"{split_name},{ticker},{d.isoformat()},{reason}\n")
    return _finish(config, "featurize", inputs, outputs)


def cmd_train(config: PipelineConfig, force: bool) -> int:
    inputs = {
        "features_train.bin": _require_artifact(config, "features_train.bin"),
        "features_valid.bin": _require_artifact(config, "features_valid.bin"),
    }
    outputs = {"model.bin": _artifact(config, "model.bin")}
    if _skip(config, "train", inputs, outputs, force):
        return 0
    train_matrix = load_feature_matrix(inputs["features_train.bin"])
    valid_matrix = load_feature_matrix(inputs["features_valid.bin"])
    model = train(train_matrix, valid_matrix, _train_config(config))
    save_model(model, outputs["model.bin"])
    meta = model.metadata
    errors = meta.get("validation_errors", [])
    best = meta.get("best_epoch", -1)
    logger.info(
        "train: %d epochs, best epoch %d, validation error %.4f",
        meta.get("epochs_run", 0),
        best,
        errors[best] if 0 <= best < len(errors) else float("nan"),
    )
    return _finish(config, "train", inputs, outputs)


def cmd_graph(config: PipelineConfig, force: bool) -> int:
    inputs = {"prices": _require_input(config.prices, "prices")}
    outputs = {"graph.csv": _artifact(config, "graph.csv")}
    if _skip(config, "graph", inputs, outputs, force):
        return 0
    prices = _price_table(config)
    g = build_graph(
        prices,
        prices.tickers(),
        window=config.graph_window,
        threshold=config.graph_threshold,
        min_overlap=config.graph_min_overlap,
    )
    write_graph(g, outputs["graph.csv"])
    logger.info("graph: %d nodes, %d edges", len(g), sum(1 for _ in g.edges()))
    return _finish(config, "graph", inputs, outputs)


def cmd_predict(config: PipelineConfig, force: bool) -> int:
    inputs = {
        "model.bin": _require_artifact(config, "model.bin"),
        "features_test.bin": _require_artifact(config, "features_test.bin"),
        "graph.csv": _require_artifact(config, "graph.csv"),
    }
    outputs = {"predictions.csv": _artifact(config, "predictions.csv")}
    if _skip(config, "predict", inputs, outputs, force):
        return 0
    model = load_model(inputs["model.bin"])
    test_matrix = load_feature_matrix(inputs["features_test.bin"])
    g = load_graph(inputs["graph.csv"])
    labels, confidences = predict_batch(model, test_matrix.x)
    by_date: dict[Date, list[int]] = {}
    for i, d in enumerate(test_matrix.dates):
        by_date.setdefault(d, []).append(i)
    predictions = []
    for d in sorted(by_date):
        day_conf: dict[str, float] = {}
        for i in by_date[d]:
            ticker = test_matrix.tickers[i]
            predictions.append(
                Prediction(
                    date=d,
                    ticker=ticker,
                    source=DNN,
                    label=labels[i],
                    confidence=float(confidences[i]),
                )
            )
            if ticker in g.index:
                day_conf[ticker] = float(confidences[i])
        if not day_conf:
            continue
        x = initial_vector(g, day_conf)
        x_prime = propagate(g, x, config.iterations, config.clamp_observed)
        for ticker, (label, value) in threshold_predictions(
            g, x_prime, config.predict_tau
        ).items():
            predictions.append(
                Prediction(
                    date=d,
                    ticker=ticker,
                    source=PROPAGATED,
                    label=label,
                    confidence=float(value),
                )
            )
    write_predictions(predictions, outputs["predictions.csv"])
    logger.info(
        "predict: %d dnn and %d propagated predictions over %d dates",
        sum(1 for p in predictions if p.source == DNN),
        sum(1 for p in predictions if p.source == PROPAGATED),
        len(by_date),
    )
    return _finish(config, "predict", inputs, outputs)


def cmd_evaluate(config: PipelineConfig, force: bool) -> int:
    inputs = {
        name: _require_artifact(config, name)
        for name in (
            "features_train.bin",
            "features_valid.bin",
            "features_test.bin",
            "model.bin",
            "graph.csv",
        )
    }
    inputs["prices"] = _require_input(config.prices, "prices")
    outputs = {
        name: _artifact(config, name)
        for name in ("ablation.csv", "ablation.txt", "sweep.csv", "sweep.txt")
    }
    if _skip(config, "evaluate", inputs, outputs, force):
        return 0
    train_matrix = load_feature_matrix(inputs["features_train.bin"])
    valid_matrix = load_feature_matrix(inputs["features_valid.bin"])
    test_matrix = load_feature_matrix(inputs["features_test.bin"])
    ablation = run_ablation(
        train_matrix,
        valid_matrix,
        test_matrix,
        DEFAULT_COMBINATIONS,
        _train_config(config),
    )
    write_ablation_report(ablation, outputs["ablation.csv"])
    ablation_text = render_ablation(ablation)
    outputs["ablation.txt"].write_text(ablation_text, encoding="utf-8")
    print(ablation_text, end="")

    model = load_model(inputs["model.bin"])
    g = load_graph(inputs["graph.csv"])
    prices = _price_table(config)
    sweep = run_propagation_sweep(
        test_matrix,
        model,
        g,
        prices,
        config.taus,
        iterations=config.iterations,
        clamp_observed=config.clamp_observed,
    )
    write_sweep_report(sweep, outputs["sweep.csv"])
    sweep_text = render_sweep(sweep)
    outputs["sweep.txt"].write_text(sweep_text, encoding="utf-8")
    print(sweep_text, end="")
    return _finish(config, "evaluate", inputs, outputs)


_COMMANDS = (
    ("synth", cmd_synth, "generate a synthetic articles/prices/aliases fixture"),
    ("ingest", cmd_ingest, "split articles into labeled samples and the embedding corpus"),
    ("embed", cmd_embed, "train word embeddings on the training corpus"),
    ("lexicon", cmd_lexicon, "build the keyword and category lexicons"),
    ("featurize", cmd_featurize, "build feature matrices for all splits"),
    ("train", cmd_train, "train the movement classifier"),
    ("graph", cmd_graph, "build the price correlation graph"),
    ("predict", cmd_predict, "emit test-set predictions, direct and propagated"),
    ("evaluate", cmd_evaluate, "run the feature ablation and the propagation sweep"),
)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="newsmotion",
        description="news-driven next-day stock movement prediction pipeline",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="<stage>")
    for name, func, help_text in _COMMANDS:
        p = sub.add_parser(name, help=help_text)
        p.add_argument(
            "--config", required=True, metavar="PATH", help="pipeline config file"
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value; repeatable, wins over the file",
        )
        p.add_argument(
            "--force",
            action="store_true",
            help="rerun even when the stage's artifacts are up to date",
        )
        p.add_argument("--verbose", action="store_true", help="debug logging")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, args.overrides or ())
        with work_dir_lock(config.work_dir):
            return args.func(config, args.force)
    except (ConfigError, ValidationError, ParseError, MissingArtifactError) as exc:
        logger.error("%s", exc)
        return 1
    except PipelineError as exc:
        logger.error("%s", exc)
        return 2
    except OSError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
