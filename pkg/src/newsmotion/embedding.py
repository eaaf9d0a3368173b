"""Skip-gram word embeddings with negative sampling, plus similarity queries.

Training is single-threaded and deterministic: a fixed seed drives
initialization and negative sampling, and updates are applied pair by
pair in corpus order, so the same corpus, config, and seed always yield
bit-identical vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SkipGramConfig:
    dimension: int = 100
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    min_count: int = 5
    seed: int = 1

    def __post_init__(self):
        for name in ("dimension", "window", "negatives", "epochs", "min_count"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")


@dataclass
class EmbeddingTable:
    """Vocabulary with one dense vector per word."""

    words: list[str]
    vectors: np.ndarray  # (V, d) float64
    frequencies: np.ndarray  # (V,) int64 training-corpus counts (1 when unknown)
    epoch_losses: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.words):
            raise ValidationError("vectors shape does not match vocabulary")
        if self.dimension <= 0:
            raise ValidationError("vector dimension must be positive")
        if len(set(self.words)) != len(self.words):
            raise ValidationError("duplicate words in vocabulary")
        self.index = {w: i for i, w in enumerate(self.words)}

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def __len__(self) -> int:
        return len(self.words)

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self.index[word]]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -35.0, 35.0)))


def train_skipgram(
    sentences: Sequence[Sequence[str]], config: SkipGramConfig
) -> EmbeddingTable:
    """Train embeddings on tokenized sentences.

    For each (center, context) pair inside the window the objective is
    log sigmoid(u.v) plus ``negatives`` terms log sigmoid(-u.v') with
    negatives drawn from the unigram^(3/4) distribution. The mean loss of
    each epoch is recorded on the returned table.
    """
    counts: dict[str, int] = {}
    for sentence in sentences:
        for token in sentence:
            counts[token] = counts.get(token, 0) + 1
    vocab = sorted(
        (w for w, c in counts.items() if c >= config.min_count),
        key=lambda w: (-counts[w], w),
    )
    if not vocab:
        raise ValidationError(
            f"no words meet min_count={config.min_count}; corpus too small"
        )
    index = {w: i for i, w in enumerate(vocab)}
    freqs = np.asarray([counts[w] for w in vocab], dtype=np.int64)

    # Pair lists are identical every epoch (fixed window); build them once.
    pair_centers: list[np.ndarray] = []
    pair_contexts: list[np.ndarray] = []
    total_pairs = 0
    for sentence in sentences:
        ids = [index[t] for t in sentence if t in index]
        if len(ids) < 2:
            continue
        centers, contexts = [], []
        for pos, center in enumerate(ids):
            lo = max(0, pos - config.window)
            hi = min(len(ids), pos + config.window + 1)
            for ctx_pos in range(lo, hi):
                if ctx_pos != pos:
                    centers.append(center)
                    contexts.append(ids[ctx_pos])
        if centers:
            pair_centers.append(np.asarray(centers, dtype=np.int64))
            pair_contexts.append(np.asarray(contexts, dtype=np.int64))
            total_pairs += len(centers)
    if total_pairs == 0:
        raise ValidationError("corpus yields no training pairs after filtering")

    rng = np.random.default_rng(config.seed)
    dim = config.dimension
    vecs = (rng.random((len(vocab), dim)) - 0.5) / dim
    ctx_vecs = np.zeros((len(vocab), dim))

    noise = freqs.astype(np.float64) ** 0.75
    noise_cdf = np.cumsum(noise)
    noise_cdf /= noise_cdf[-1]

    k = config.negatives
    lr0 = config.learning_rate
    lr_floor = lr0 * 1e-4
    schedule_len = total_pairs * config.epochs
    target = np.zeros(k + 1)
    target[0] = 1.0
    loss_sign = np.full(k + 1, 1.0)
    loss_sign[0] = -1.0
    rows = np.empty(k + 1, dtype=np.int64)

    epoch_losses = []
    done = 0
    for _ in range(config.epochs):
        loss_sum = 0.0
        for centers, contexts in zip(pair_centers, pair_contexts):
            negatives = np.searchsorted(
                noise_cdf, rng.random((len(centers), k)), side="right"
            )
            for t in range(len(centers)):
                lr = max(lr0 * (1.0 - done / schedule_len), lr_floor)
                rows[0] = contexts[t]
                rows[1:] = negatives[t]
                u = vecs[centers[t]]
                v = ctx_vecs[rows]
                scores = v @ u
                loss_sum += np.logaddexp(0.0, loss_sign * scores).sum()
                g = lr * (target - _sigmoid(scores))
                # np.add.at accumulates duplicate rows exactly
                np.add.at(ctx_vecs, rows, g[:, None] * u)
                u += g @ v
                done += 1
        epoch_losses.append(loss_sum / total_pairs)

    return EmbeddingTable(
        words=list(vocab),
        vectors=vecs,
        frequencies=freqs,
        epoch_losses=epoch_losses,
    )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity of two equal-dimension non-zero vectors."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("cosine undefined for zero vector")
    return float(np.dot(u, v) / (nu * nv))


def rank_by_seed_similarity(
    table: EmbeddingTable, seeds: Sequence[str]
) -> list[tuple[str, float]]:
    """Score every vocabulary word by its best cosine to any seed.

    Result is sorted by descending score with ties broken by word order;
    seeds themselves score exactly 1.0. Seeds missing from the vocabulary
    are skipped with a warning; if all are missing this is an error.
    Zero-norm vectors cannot be scored and are left out.
    """
    present = [s for s in seeds if s in table]
    for s in seeds:
        if s not in table:
            log.warning("seed word %r not in vocabulary; skipped", s)
    if not present:
        raise ValidationError(f"none of the seed words {list(seeds)!r} are in vocabulary")

    norms = np.linalg.norm(table.vectors, axis=1)
    scorable = norms > 0.0
    unit = np.zeros_like(table.vectors)
    unit[scorable] = table.vectors[scorable] / norms[scorable, None]
    seed_ids = [table.index[s] for s in present]
    scores = (unit @ unit[seed_ids].T).max(axis=1)
    for i in seed_ids:
        scores[i] = 1.0

    ranked = [
        (table.words[i], float(scores[i]))
        for i in range(len(table.words))
        if scorable[i]
    ]
    ranked.sort(key=lambda item: (-item[1], item[0]))
    return ranked


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    """Write the standard text format: 'V d' header, then 'word v1 .. vd' rows."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table.words)} {table.dimension}\n")
        for word, row in zip(table.words, table.vectors):
            fh.write(word + " " + " ".join(f"{x:.6f}" for x in row) + "\n")


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read the text vector format; frequencies are unknown and set to 1."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ParseError(f"{path}: expected header '<vocab_size> <dimension>'")
        try:
            vocab_size, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise ParseError(f"{path}: non-integer header: {exc}") from exc
        words: list[str] = []
        vectors = np.empty((vocab_size, dim))
        for i, line in enumerate(fh):
            parts = line.split()
            if not parts:
                continue
            if i >= vocab_size:
                raise ParseError(f"{path}: more rows than declared vocab {vocab_size}")
            word, comps = parts[0], parts[1:]
            if len(comps) != dim:
                raise ParseError(
                    f"{path}: word {word!r} has {len(comps)} components, expected {dim}"
                )
            words.append(word)
            vectors[i] = [float(c) for c in comps]
    if len(words) != vocab_size:
        raise ParseError(f"{path}: {len(words)} rows, header declared {vocab_size}")
    return EmbeddingTable(
        words=words, vectors=vectors, frequencies=np.ones(vocab_size, dtype=np.int64)
    )
