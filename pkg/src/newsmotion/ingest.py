"""Loading and validation of news article and daily closing-price files.

Articles arrive as line-delimited JSON objects, prices as a CSV of
(date, ticker, close) rows. Both loaders validate as they go and report
the offending line number on failure. All returned tables are immutable
after construction.
"""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass, field
from datetime import date as Date
from datetime import timedelta
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import ParseError, ValidationError

ARTICLE_FIELDS = ("id", "date", "title", "body", "source")


def parse_date(text: str) -> Date:
    try:
        return Date.fromisoformat(text)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"invalid date {text!r}: {exc}") from exc


@dataclass(frozen=True)
class DateRange:
    """Inclusive calendar-date interval."""

    start: Date
    end: Date

    def __post_init__(self):
        if self.start > self.end:
            raise ValidationError(f"empty date range {self.start}..{self.end}")

    def __contains__(self, d: Date) -> bool:
        return self.start <= d <= self.end

    def __str__(self) -> str:
        return f"{self.start.isoformat()}:{self.end.isoformat()}"

    @classmethod
    def parse(cls, text: str) -> "DateRange":
        left, sep, right = text.partition(":")
        if not sep:
            raise ValidationError(f"date range needs 'start:end', got {text!r}")
        return cls(parse_date(left), parse_date(right))

    def days(self) -> Iterator[Date]:
        d = self.start
        while d <= self.end:
            yield d
            d += timedelta(days=1)


@dataclass(frozen=True)
class Article:
    id: str
    date: Date
    title: str
    body: str
    source: str

    def __post_init__(self):
        if not self.title:
            raise ValidationError(f"article {self.id!r}: title must be non-empty")


def load_articles(path: str | Path) -> Iterator[Article]:
    """Stream articles from a line-delimited JSON file, in file order.

    Blank lines are skipped. Raises ParseError (naming the line) on bad
    JSON or missing keys, ValidationError on bad field values.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise ParseError(f"{path}:{lineno}: expected an object")
            missing = [k for k in ARTICLE_FIELDS if k not in record]
            if missing:
                raise ParseError(
                    f"{path}:{lineno}: missing field(s) {', '.join(missing)}"
                )
            try:
                yield Article(
                    id=str(record["id"]),
                    date=parse_date(record["date"]),
                    title=str(record["title"]),
                    body=str(record["body"]),
                    source=str(record["source"]),
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc


def write_articles(articles: Iterable[Article], path: str | Path) -> None:
    """Serialize articles to the line-delimited JSON format load_articles reads."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for a in articles:
            record = {
                "id": a.id,
                "date": a.date.isoformat(),
                "title": a.title,
                "body": a.body,
                "source": a.source,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes for one ticker, strictly ascending by date."""

    ticker: str
    dates: tuple[Date, ...]
    closes: np.ndarray  # float64, aligned with dates

    def __post_init__(self):
        if len(self.dates) != len(self.closes):
            raise ValidationError(f"{self.ticker}: dates/closes length mismatch")
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur <= prev:
                raise ValidationError(
                    f"{self.ticker}: dates not strictly ascending at {cur}"
                )
        if len(self.closes) and not np.all(self.closes > 0):
            raise ValidationError(f"{self.ticker}: closes must be positive")
        self.closes.setflags(write=False)

    def __len__(self) -> int:
        return len(self.dates)

    def last_index_on_or_before(self, d: Date) -> int | None:
        i = bisect.bisect_right(self.dates, d) - 1
        return i if i >= 0 else None

    def first_index_after(self, d: Date) -> int | None:
        i = bisect.bisect_right(self.dates, d)
        return i if i < len(self.dates) else None


@dataclass(frozen=True)
class PriceTable:
    """All price series plus per-ticker training-window normalization stats.

    ``stats`` maps ticker -> (mean, population std) over closes whose date
    falls inside ``training_window``. Tickers with fewer than two training
    closes, or zero spread, are listed in ``unnormalizable`` instead and
    excluded from feature extraction (they stay available for graph
    building).
    """

    series: dict[str, PriceSeries]
    stats: dict[str, tuple[float, float]]
    training_window: DateRange
    unnormalizable: frozenset[str] = field(default_factory=frozenset)

    def tickers(self) -> list[str]:
        return sorted(self.series)

    def get(self, ticker: str) -> PriceSeries | None:
        return self.series.get(ticker)


def _training_stats(
    series: PriceSeries, window: DateRange
) -> tuple[float, float] | None:
    in_window = [
        c for d, c in zip(series.dates, series.closes.tolist()) if d in window
    ]
    if len(in_window) < 2:
        return None
    arr = np.asarray(in_window, dtype=np.float64)
    mean = float(arr.mean())
    std = float(arr.std())  # population form: ddof=0
    if std == 0.0:
        return None
    return mean, std


def load_prices(path: str | Path, training_window: DateRange) -> PriceTable:
    """Load the (date, ticker, close) CSV into per-ticker sorted series.

    Raises ValidationError on non-positive closes or duplicate
    (date, ticker) rows; ParseError on structural problems.
    """
    path = Path(path)
    rows: dict[str, list[tuple[Date, float]]] = {}
    seen: set[tuple[Date, str]] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "ticker", "close"]:
            raise ParseError(f"{path}: expected header 'date,ticker,close'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            raw_date, ticker, raw_close = row
            try:
                d = parse_date(raw_date)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            ticker = ticker.strip()
            if not ticker:
                raise ValidationError(f"{path}:{lineno}: empty ticker")
            try:
                close = float(raw_close)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad close {raw_close!r}") from exc
            if close <= 0:
                raise ValidationError(
                    f"{path}:{lineno}: close must be > 0, got {close}"
                )
            if (d, ticker) in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate ({d}, {ticker})")
            seen.add((d, ticker))
            rows.setdefault(ticker, []).append((d, close))

    series: dict[str, PriceSeries] = {}
    stats: dict[str, tuple[float, float]] = {}
    unnormalizable: set[str] = set()
    for ticker in sorted(rows):
        obs = sorted(rows[ticker])
        s = PriceSeries(
            ticker=ticker,
            dates=tuple(d for d, _ in obs),
            closes=np.asarray([c for _, c in obs], dtype=np.float64),
        )
        series[ticker] = s
        st = _training_stats(s, training_window)
        if st is None:
            unnormalizable.add(ticker)
        else:
            stats[ticker] = st
    return PriceTable(
        series=series,
        stats=stats,
        training_window=training_window,
        unnormalizable=frozenset(unnormalizable),
    )


def write_prices(table: PriceTable, path: str | Path) -> None:
    """Serialize a price table back to the CSV format load_prices reads."""
    path = Path(path)
    rows = []
    for ticker in table.tickers():
        s = table.series[ticker]
        for d, c in zip(s.dates, s.closes.tolist()):
            rows.append((d, ticker, c))
    rows.sort(key=lambda r: (r[0], r[1]))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,ticker,close\n")
        for d, ticker, c in rows:
            fh.write(f"{d.isoformat()},{ticker},{c!r}\n")


def align_series(
    a: PriceSeries, b: PriceSeries, window: DateRange | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Closes of both series restricted to shared dates (inside window), date order."""
    b_by_date = dict(zip(b.dates, b.closes.tolist()))
    xs: list[float] = []
    ys: list[float] = []
    for d, c in zip(a.dates, a.closes.tolist()):
        if window is not None and d not in window:
            continue
        other = b_by_date.get(d)
        if other is not None:
            xs.append(c)
            ys.append(other)
    return np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
