"""Stock correlation graph: build from price histories, propagate predictions.

Edges carry Pearson coefficients of aligned daily closes and survive
only when |rho| strictly exceeds the prune threshold and the two series
share enough trading dates. Propagation multiplies the signed-confidence
vector by the adjacency matrix to reach stocks absent from the news.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .ingest import DateRange, PriceTable, align_series, parse_date
from .mlp import DOWN, UP

DEFAULT_THRESHOLD = 0.8
DEFAULT_MIN_OVERLAP = 252  # about one trading year of common dates

DNN = "dnn"
PROPAGATED = "propagated"


def pearson(u: np.ndarray, v: np.ndarray) -> float:
    """Pearson product-moment correlation of two equal-length series."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise ValidationError(f"need equal-length vectors, got {u.shape} and {v.shape}")
    if len(u) < 2:
        raise ValidationError("correlation needs at least 2 points")
    du = u - u.mean()
    dv = v - v.mean()
    su = float(np.sum(du * du))
    sv = float(np.sum(dv * dv))
    if su == 0.0 or sv == 0.0:
        raise ValidationError("correlation undefined for a constant series")
    return float(np.sum(du * dv) / np.sqrt(su * sv))


@dataclass
class CorrelationGraph:
    """Symmetric pruned correlation graph over an ordered ticker universe."""

    nodes: list[str]
    neighbors: list[list[tuple[int, float]]]  # per node, sorted by neighbor index
    threshold: float
    min_overlap: int
    window: DateRange | None = None

    def __post_init__(self):
        if len(self.neighbors) != len(self.nodes):
            raise ValidationError("one neighbor list per node required")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValidationError("duplicate tickers in node list")
        self.index = {t: i for i, t in enumerate(self.nodes)}
        for i, nbrs in enumerate(self.neighbors):
            for j, w in nbrs:
                if not 0 <= j < len(self.nodes) or j == i:
                    raise ValidationError(f"bad neighbor index {j} for node {i}")
                if not abs(w) <= 1.0:
                    raise ValidationError(f"edge weight {w} outside [-1, 1]")
        # weight lookups for the symmetry check
        weights = {(i, j): w for i, nbrs in enumerate(self.neighbors) for j, w in nbrs}
        for (i, j), w in weights.items():
            if weights.get((j, i)) != w:
                raise ValidationError(f"asymmetric edge between {i} and {j}")
        self._idx_arrays = [
            np.asarray([j for j, _ in nbrs], dtype=np.int64) for nbrs in self.neighbors
        ]
        self._wgt_arrays = [
            np.asarray([w for _, w in nbrs], dtype=np.float64)
            for nbrs in self.neighbors
        ]

    def __len__(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return sum(len(nbrs) for nbrs in self.neighbors) // 2

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Each undirected edge once, as (i, j, weight) with i < j."""
        for i, nbrs in enumerate(self.neighbors):
            for j, w in nbrs:
                if i < j:
                    yield i, j, w

    def degree(self, ticker: str) -> int:
        return len(self.neighbors[self.index[ticker]])


def build_graph(
    prices: PriceTable,
    universe: Sequence[str],
    window: DateRange | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> CorrelationGraph:
    """Correlate every ticker pair over the window and keep |rho| > threshold.

    Pairs with fewer than min_overlap common trading dates, or a constant
    aligned series, simply get no edge.
    """
    if threshold < 0:
        raise ValidationError("threshold must be non-negative")
    if min_overlap < 2:
        raise ValidationError("min_overlap must be at least 2")
    missing = sorted(t for t in universe if prices.get(t) is None)
    if missing:
        raise ValidationError(f"universe tickers without price series: {missing}")
    nodes = sorted(set(universe))
    neighbors: list[list[tuple[int, float]]] = [[] for _ in nodes]
    for i in range(len(nodes)):
        si = prices.get(nodes[i])
        for j in range(i + 1, len(nodes)):
            u, v = align_series(si, prices.get(nodes[j]), window)
            if len(u) < min_overlap:
                continue
            du = u - u.mean()
            dv = v - v.mean()
            su = float(np.sum(du * du))
            sv = float(np.sum(dv * dv))
            if su == 0.0 or sv == 0.0:
                continue
            rho = float(np.sum(du * dv) / np.sqrt(su * sv))
            if abs(rho) > threshold:
                neighbors[i].append((j, rho))
                neighbors[j].append((i, rho))
    for nbrs in neighbors:
        nbrs.sort()
    return CorrelationGraph(
        nodes=nodes,
        neighbors=neighbors,
        threshold=threshold,
        min_overlap=min_overlap,
        window=window,
    )


@dataclass
class PredictionVector:
    """Signed confidences over graph nodes with an observed-entry mask."""

    values: np.ndarray
    observed: np.ndarray  # bool mask of entries set from classifier output

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.values.shape != self.observed.shape or self.values.ndim != 1:
            raise ValidationError("values and observed mask must be equal 1-D shapes")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("confidences must be finite")
        if np.any(np.abs(self.values) > 1.0):
            raise ValidationError("confidences must lie in [-1, 1]")


def initial_vector(
    graph: CorrelationGraph, confidences: dict[str, float]
) -> PredictionVector:
    """Vector seeded with classifier confidences; unseen stocks are exactly 0."""
    values = np.zeros(len(graph))
    observed = np.zeros(len(graph), dtype=bool)
    for ticker, confidence in confidences.items():
        i = graph.index.get(ticker)
        if i is None:
            raise ValidationError(f"ticker {ticker!r} not in graph")
        values[i] = confidence
        observed[i] = True
    return PredictionVector(values=values, observed=observed)


def propagate(
    graph: CorrelationGraph,
    x: PredictionVector,
    iterations: int = 1,
    clamp_observed: bool = False,
) -> PredictionVector:
    """Repeated x' = Ax over the pruned weights.

    With clamp_observed, observed entries are reset to their input values
    after each multiplication. Entries are clipped to [-1, 1] only after
    the final iteration; zero iterations returns x unchanged.
    """
    if iterations < 0:
        raise ValidationError("iterations must be non-negative")
    if len(x.values) != len(graph):
        raise ValidationError(
            f"vector length {len(x.values)} != graph size {len(graph)}"
        )
    if iterations == 0:
        return PredictionVector(values=x.values.copy(), observed=x.observed.copy())
    values = x.values
    for _ in range(iterations):
        new = np.zeros(len(graph))
        for i in range(len(graph)):
            idx = graph._idx_arrays[i]
            if len(idx):
                new[i] = graph._wgt_arrays[i] @ values[idx]
        if clamp_observed:
            new[x.observed] = x.values[x.observed]
        values = new
    return PredictionVector(values=np.clip(values, -1.0, 1.0), observed=x.observed.copy())


def threshold_predictions(
    graph: CorrelationGraph, x_prime: PredictionVector, tau: float
) -> dict[str, tuple[str, float]]:
    """Unseen stocks whose propagated confidence clears tau, with labels.

    Zero entries never qualify (no signal reached them), so tau = 0 emits
    exactly the unseen stocks touched by propagation.
    """
    if tau < 0:
        raise ValidationError("tau must be non-negative")
    if len(x_prime.values) != len(graph):
        raise ValidationError("vector does not match graph")
    out: dict[str, tuple[str, float]] = {}
    for i, ticker in enumerate(graph.nodes):
        if x_prime.observed[i]:
            continue
        v = float(x_prime.values[i])
        if v == 0.0 or abs(v) < tau:
            continue
        out[ticker] = (UP if v > 0 else DOWN, v)
    return out


def write_graph(graph: CorrelationGraph, path: str | Path) -> None:
    """CSV of edges (i < j lexicographically) under '# key=value' header lines."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# threshold={graph.threshold!r}\n")
        fh.write(f"# min_overlap={graph.min_overlap}\n")
        fh.write(f"# window={graph.window if graph.window is not None else 'none'}\n")
        fh.write(f"# nodes={','.join(graph.nodes)}\n")
        fh.write("ticker_i,ticker_j,weight\n")
        for i, j, w in graph.edges():
            fh.write(f"{graph.nodes[i]},{graph.nodes[j]},{w!r}\n")


def load_graph(path: str | Path) -> CorrelationGraph:
    path = Path(path)
    meta: dict[str, str] = {}
    edges: list[tuple[str, str, float]] = []
    with path.open("r", encoding="utf-8") as fh:
        lineno = 0
        for line in fh:
            lineno += 1
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, sep, value = line[1:].strip().partition("=")
                if not sep:
                    raise ParseError(f"{path}:{lineno}: bad metadata line {line!r}")
                meta[key.strip()] = value.strip()
                continue
            if line == "ticker_i,ticker_j,weight":
                continue
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 fields")
            try:
                edges.append((parts[0], parts[1], float(parts[2])))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: bad weight: {exc}") from exc
    for key in ("threshold", "min_overlap", "nodes"):
        if key not in meta:
            raise ParseError(f"{path}: missing '# {key}=' header")
    nodes = meta["nodes"].split(",") if meta["nodes"] else []
    index = {t: i for i, t in enumerate(nodes)}
    neighbors: list[list[tuple[int, float]]] = [[] for _ in nodes]
    for a, b, w in edges:
        if a not in index or b not in index:
            raise ParseError(f"{path}: edge {a},{b} references unknown node")
        neighbors[index[a]].append((index[b], w))
        neighbors[index[b]].append((index[a], w))
    for nbrs in neighbors:
        nbrs.sort()
    window = None if meta.get("window", "none") == "none" else DateRange.parse(meta["window"])
    return CorrelationGraph(
        nodes=nodes,
        neighbors=neighbors,
        threshold=float(meta["threshold"]),
        min_overlap=int(meta["min_overlap"]),
        window=window,
    )


@dataclass(frozen=True)
class Prediction:
    """One emitted prediction row: direct from the classifier or propagated."""

    date: Date
    ticker: str
    source: str  # DNN or PROPAGATED
    label: str  # UP or DOWN
    confidence: float

    def __post_init__(self):
        if self.source not in (DNN, PROPAGATED):
            raise ValidationError(f"bad prediction source {self.source!r}")
        if self.label not in (UP, DOWN):
            raise ValidationError(f"bad prediction label {self.label!r}")


def write_predictions(predictions: Sequence[Prediction], path: str | Path) -> None:
    rows = sorted(predictions, key=lambda p: (p.date, p.ticker, p.source))
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,ticker,source,label,confidence\n")
        for p in rows:
            fh.write(
                f"{p.date.isoformat()},{p.ticker},{p.source},{p.label},{p.confidence!r}\n"
            )


def load_predictions(path: str | Path) -> list[Prediction]:
    path = Path(path)
    out = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != "date,ticker,source,label,confidence":
            raise ParseError(f"{path}:1: unexpected header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ParseError(f"{path}:{lineno}: expected 5 fields")
            try:
                out.append(
                    Prediction(
                        date=parse_date(parts[0]),
                        ticker=parts[1],
                        source=parts[2],
                        label=parts[3],
                        confidence=float(parts[4]),
                    )
                )
            except (ValidationError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return out
