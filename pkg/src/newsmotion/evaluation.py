"""Test-set evaluation: feature-ablation error rates and the propagation sweep.

The ablation trains one classifier per feature-block combination (shared
seed and hyperparameters) and scores each on the same test rows. The
sweep seeds the correlation graph with per-date classifier confidences,
propagates, and measures accuracy and coverage of the emitted unseen-stock
predictions as the confidence threshold rises.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Sequence

from .errors import PipelineError, ValidationError
from .features import BLOCK_ORDER, FeatureMatrix, slice_blocks
from .graph import CorrelationGraph, initial_vector, propagate, threshold_predictions
from .ingest import PriceTable
from .mlp import MlpModel, TrainConfig, direction_of, predict_batch, train
from .sampling import movement_label

logger = logging.getLogger(__name__)

# The default ablation set: price alone, then each way of adding news blocks.
DEFAULT_COMBINATIONS: tuple[tuple[str, ...], ...] = (
    ("price",),
    ("price", "bok"),
    ("price", "bok", "ps"),
    ("price", "bok", "ct"),
    ("price", "ps"),
    ("price", "ct"),
    ("price", "ps", "ct"),
    ("price", "bok", "ps", "ct"),
)

OK = "ok"
FAILED = "failed"
NOT_AVAILABLE = "n/a"


def error_rate(predictions: Sequence[str], truths: Sequence[str]) -> float:
    """Fraction of predictions that disagree with the truths."""
    if len(predictions) != len(truths):
        raise ValidationError(
            f"{len(predictions)} predictions against {len(truths)} truths"
        )
    if not predictions:
        raise ValidationError("error rate over an empty prediction list is undefined")
    wrong = sum(1 for p, t in zip(predictions, truths) if p != t)
    return wrong / len(predictions)


def accuracy(predictions: Sequence[str], truths: Sequence[str]) -> float:
    """Complement of error_rate; the two sum to exactly 1.0."""
    return 1.0 - error_rate(predictions, truths)


@dataclass(frozen=True)
class AblationRow:
    """Test error of one feature-block combination."""

    name: str
    blocks: tuple[str, ...]
    error: float | None  # None when the combination failed to train
    samples: int
    status: str  # OK or FAILED
    note: str = ""

    def __post_init__(self):
        if self.error is not None and not 0.0 <= self.error <= 1.0:
            raise ValidationError(f"error rate {self.error} outside [0, 1]")


@dataclass(frozen=True)
class AblationReport:
    """One row per requested combination, in request order."""

    rows: tuple[AblationRow, ...]
    metadata: dict


@dataclass(frozen=True)
class SweepRow:
    """Accuracy and coverage of propagated predictions at one threshold."""

    tau: float
    accuracy: float | None  # None when no emitted prediction had a defined movement
    predicted_per_day: float
    observed_per_day: float

    def __post_init__(self):
        if self.accuracy is not None and not 0.0 <= self.accuracy <= 1.0:
            raise ValidationError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass(frozen=True)
class SweepReport:
    """One row per requested tau, in request order."""

    rows: tuple[SweepRow, ...]
    metadata: dict


def _normalize_combination(blocks: Sequence[str]) -> tuple[str, ...]:
    wanted = set(blocks)
    if not wanted:
        raise ValidationError("a feature combination cannot be empty")
    unknown = wanted - set(BLOCK_ORDER)
    if unknown:
        raise ValidationError(f"unknown blocks {sorted(unknown)}")
    return tuple(b for b in BLOCK_ORDER if b in wanted)


def combination_name(blocks: Sequence[str]) -> str:
    return "+".join(_normalize_combination(blocks))


def run_ablation(
    train_matrix: FeatureMatrix,
    valid_matrix: FeatureMatrix,
    test_matrix: FeatureMatrix,
    combinations: Sequence[Sequence[str]] = DEFAULT_COMBINATIONS,
    config: TrainConfig | None = None,
) -> AblationReport:
    """Train one model per block combination and score each on the test rows.

    Every model shares the same seed and hyperparameters, so rows differ
    only in their feature columns. A combination that fails to train is
    marked failed and the remaining combinations still run.
    """
    config = config or TrainConfig()
    if not (train_matrix.layout == valid_matrix.layout == test_matrix.layout):
        raise ValidationError("ablation matrices must share one feature layout")
    if len(test_matrix) == 0:
        raise ValidationError("test split is empty")
    if not combinations:
        raise ValidationError("at least one combination is required")
    truths = [direction_of(label) for label in test_matrix.labels]
    rows: list[AblationRow] = []
    for requested in combinations:
        blocks = _normalize_combination(requested)
        name = "+".join(blocks)
        try:
            model = train(
                slice_blocks(train_matrix, blocks),
                slice_blocks(valid_matrix, blocks),
                config,
            )
            predicted, _ = predict_batch(model, slice_blocks(test_matrix, blocks).x)
            err = error_rate(predicted, truths)
        except PipelineError as exc:
            logger.warning("combination %s failed: %s", name, exc)
            rows.append(
                AblationRow(name, blocks, None, len(test_matrix), FAILED, str(exc))
            )
            continue
        logger.info("combination %s: test error %.4f", name, err)
        rows.append(AblationRow(name, blocks, err, len(test_matrix), OK))
    return AblationReport(
        rows=tuple(rows),
        metadata={"seed": config.seed, "test_samples": len(test_matrix)},
    )


def run_propagation_sweep(
    test_matrix: FeatureMatrix,
    model: MlpModel,
    graph: CorrelationGraph,
    prices: PriceTable,
    taus: Sequence[float],
    iterations: int = 1,
    clamp_observed: bool = False,
) -> SweepReport:
    """Propagate per-date classifier confidences and sweep the emission threshold.

    For each test date, the observed stocks' signed confidences seed the
    graph vector with zeros elsewhere; after propagation, each tau emits
    the unseen stocks whose confidence clears it. Accuracy compares the
    emitted labels against the next-day price movement where the price
    table defines one; emissions without a defined movement count toward
    coverage but not accuracy. Dates whose observed stocks all fall
    outside the graph are skipped and counted in the report metadata.
    """
    if model.layout is not None and model.layout != test_matrix.layout:
        raise ValidationError("model and test matrix feature layouts differ")
    if len(test_matrix) == 0:
        raise ValidationError("test split is empty")
    taus = [float(t) for t in taus]
    if not taus:
        raise ValidationError("at least one tau is required")
    for tau in taus:
        if tau < 0:
            raise ValidationError(f"tau must be non-negative, got {tau}")

    by_date: dict[Date, list[int]] = {}
    for i, d in enumerate(test_matrix.dates):
        by_date.setdefault(d, []).append(i)
    _, confidences = predict_batch(model, test_matrix.x)

    days_used = 0
    days_skipped = 0
    out_of_graph = 0
    observed_total = 0
    emitted = dict.fromkeys(taus, 0)
    scored = dict.fromkeys(taus, 0)
    correct = dict.fromkeys(taus, 0)
    for d in sorted(by_date):
        day_conf: dict[str, float] = {}
        for i in by_date[d]:
            ticker = test_matrix.tickers[i]
            if ticker in graph.index:
                day_conf[ticker] = float(confidences[i])
            else:
                out_of_graph += 1
        if not day_conf:
            days_skipped += 1
            continue
        days_used += 1
        observed_total += len(day_conf)
        x = initial_vector(graph, day_conf)
        x_prime = propagate(graph, x, iterations=iterations, clamp_observed=clamp_observed)
        movements: dict[str, str | None] = {}
        for tau in taus:
            for ticker, (label, _) in threshold_predictions(graph, x_prime, tau).items():
                emitted[tau] += 1
                if ticker not in movements:
                    series = prices.get(ticker)
                    movements[ticker] = (
                        movement_label(series, d) if series is not None else None
                    )
                movement = movements[ticker]
                if movement is None:
                    continue
                scored[tau] += 1
                if direction_of(movement) == label:
                    correct[tau] += 1
    if days_used == 0:
        raise ValidationError("no test date had an observed stock in the graph")

    rows = tuple(
        SweepRow(
            tau=tau,
            accuracy=(correct[tau] / scored[tau]) if scored[tau] else None,
            predicted_per_day=emitted[tau] / days_used,
            observed_per_day=observed_total / days_used,
        )
        for tau in taus
    )
    return SweepReport(
        rows=rows,
        metadata={
            "days_used": days_used,
            "days_skipped": days_skipped,
            "out_of_graph_samples": out_of_graph,
            "iterations": iterations,
            "clamp_observed": clamp_observed,
        },
    )


def _render_table(headers: tuple[str, ...], rows: list[tuple[str, ...]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    for row in rows:
        lines.append(
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
        )
    return "\n".join(lines) + "\n"


def write_ablation_report(report: AblationReport, path: str | Path) -> None:
    """CSV with one row per combination; failed rows carry an n/a error rate."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("combination,error_rate,samples,status\n")
        for row in report.rows:
            err = NOT_AVAILABLE if row.error is None else repr(row.error)
            fh.write(f"{row.name},{err},{row.samples},{row.status}\n")


def render_ablation(report: AblationReport) -> str:
    """Aligned-text rendering of the ablation table."""
    body = []
    for row in report.rows:
        err = NOT_AVAILABLE if row.error is None else f"{row.error:.4f}"
        status = f"{row.status}: {row.note}" if row.note else row.status
        body.append((row.name, err, str(row.samples), status))
    table = _render_table(("combination", "error rate", "samples", "status"), body)
    return table + f"test samples: {report.metadata.get('test_samples', 0)}\n"


def write_sweep_report(report: SweepReport, path: str | Path) -> None:
    """Plot-ready CSV: tau, accuracy, predicted_per_day, observed_per_day."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("tau,accuracy,predicted_per_day,observed_per_day\n")
        for row in report.rows:
            acc = NOT_AVAILABLE if row.accuracy is None else repr(row.accuracy)
            fh.write(
                f"{row.tau!r},{acc},{row.predicted_per_day!r},{row.observed_per_day!r}\n"
            )


def render_sweep(report: SweepReport) -> str:
    """Aligned-text rendering of the sweep table plus day counts."""
    body = []
    for row in report.rows:
        acc = NOT_AVAILABLE if row.accuracy is None else f"{row.accuracy:.4f}"
        body.append(
            (
                f"{row.tau:.2f}",
                acc,
                f"{row.predicted_per_day:.2f}",
                f"{row.observed_per_day:.2f}",
            )
        )
    table = _render_table(("tau", "accuracy", "predicted/day", "observed/day"), body)
    meta = report.metadata
    return table + (
        f"days used: {meta.get('days_used', 0)}, "
        f"skipped (no observed stocks): {meta.get('days_skipped', 0)}\n"
    )
