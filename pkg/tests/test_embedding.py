"""Skip-gram training, cosine queries, and the vector file format."""

from __future__ import annotations

import numpy as np
import pytest

from newsmotion.embedding import (
    EmbeddingTable,
    SkipGramConfig,
    cosine,
    load_embeddings,
    rank_by_seed_similarity,
    save_embeddings,
    train_skipgram,
)
from newsmotion.errors import ParseError, ValidationError

_SMALL = SkipGramConfig(
    dimension=12, window=2, negatives=4, epochs=3, min_count=1, seed=3
)


def _mini_corpus():
    rng = np.random.default_rng(17)
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta"]
    corpus = []
    for _ in range(80):
        size = int(rng.integers(3, 6))
        corpus.append(list(rng.choice(words, size=size)))
    return corpus


def substitution_corpus(n=10000, seed=29):
    """Sentences from two templates where 'rise' and 'rebound' are swapped freely."""
    rng = np.random.default_rng(seed)
    pair = ("rise", "rebound")
    templates = (
        "stocks {} sharply after the early report",
        "shares of the group could {} again tomorrow",
    )
    fillers = [
        f"{a} traders watched the {b} board quietly"
        for a in ("some", "many", "most", "other")
        for b in ("main", "local", "busy", "quiet")
    ]
    corpus = []
    for _ in range(n):
        roll = rng.random()
        if roll < 0.6:
            template = templates[int(rng.integers(2))]
            corpus.append(template.format(pair[int(rng.integers(2))]).split())
        else:
            corpus.append(fillers[int(rng.integers(len(fillers)))].split())
    return corpus


@pytest.fixture(scope="module")
def subst_table():
    return train_skipgram(substitution_corpus(), _SMALL)


class TestCosine:
    def test_self_similarity_is_one(self):
        u = np.array([0.3, -1.2, 2.0])
        assert cosine(u, u) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal_vectors_score_zero(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_hand_value(self):
        got = cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
        assert got == pytest.approx(1.0 / np.sqrt(2.0), abs=1e-12)

    def test_symmetry_and_scale_invariance(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            u = rng.normal(size=8)
            v = rng.normal(size=8)
            alpha = float(rng.uniform(0.1, 10.0))
            assert abs(cosine(u, v) - cosine(v, u)) < 1e-12
            assert abs(cosine(alpha * u, v) - cosine(u, v)) < 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0]))

    def test_zero_vector_rejected(self):
        with pytest.raises(ValidationError):
            cosine(np.array([0.0, 0.0]), np.array([1.0, 0.0]))


class TestTrainSkipgram:
    def test_same_seed_is_bit_identical(self):
        corpus = _mini_corpus()
        a = train_skipgram(corpus, _SMALL)
        b = train_skipgram(corpus, _SMALL)
        assert a.words == b.words
        assert np.array_equal(a.vectors, b.vectors)

    def test_different_seed_changes_vectors(self):
        corpus = _mini_corpus()
        a = train_skipgram(corpus, _SMALL)
        b = train_skipgram(corpus, SkipGramConfig(
            dimension=12, window=2, negatives=4, epochs=3, min_count=1, seed=4
        ))
        assert not np.array_equal(a.vectors, b.vectors)

    def test_min_count_filters_vocabulary(self):
        corpus = [["common", "common", "rare"], ["common", "common"]]
        table = train_skipgram(
            corpus,
            SkipGramConfig(dimension=4, window=2, epochs=1, min_count=2, seed=1),
        )
        assert "rare" not in table
        assert "common" in table

    def test_all_words_below_min_count_is_an_error(self):
        corpus = [["one", "two"], ["three", "four"]]
        with pytest.raises(ValidationError):
            train_skipgram(
                corpus,
                SkipGramConfig(dimension=4, window=2, epochs=1, min_count=5, seed=1),
            )

    def test_vocabulary_orders_by_frequency_then_word(self):
        corpus = [["b", "b", "a", "a", "c"]] * 3
        table = train_skipgram(
            corpus,
            SkipGramConfig(dimension=4, window=1, epochs=1, min_count=1, seed=1),
        )
        assert table.words == ["a", "b", "c"]

    def test_epoch_loss_is_monotone_non_increasing(self):
        corpus = [["up", "down", "flat", "open"]] * 150
        table = train_skipgram(
            corpus,
            SkipGramConfig(dimension=8, window=2, epochs=5, min_count=1, seed=2),
        )
        assert len(table.epoch_losses) == 5
        for earlier, later in zip(table.epoch_losses, table.epoch_losses[1:]):
            assert later <= earlier + 1e-6

    def test_substituted_words_converge(self, subst_table):
        assert cosine(subst_table.vector("rise"), subst_table.vector("rebound")) > 0.9


class TestRankBySeedSimilarity:
    def _table(self, words, vectors):
        vectors = np.asarray(vectors, dtype=np.float64)
        return EmbeddingTable(
            words=list(words),
            vectors=vectors,
            frequencies=np.ones(len(words), dtype=np.int64),
        )

    def test_vocabulary_of_seeds_only(self):
        table = self._table(["rise", "drop"], [[1.0, 0.0], [0.0, 1.0]])
        ranked = rank_by_seed_similarity(table, ["rise", "drop"])
        assert ranked == [("drop", 1.0), ("rise", 1.0)]

    def test_word_identical_to_seed_scores_one(self):
        table = self._table(
            ["rise", "clone", "other"],
            [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
        )
        ranked = rank_by_seed_similarity(table, ["rise"])
        assert ranked[0] == ("clone", 1.0)
        assert ("rise", 1.0) in ranked[:2]

    def test_scores_sort_descending_with_lexicographic_ties(self):
        table = self._table(
            ["b", "a", "far"],
            [[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]],
        )
        ranked = rank_by_seed_similarity(table, ["a"])
        assert [w for w, _ in ranked] == ["a", "b", "far"]

    def test_absent_seed_warns_and_is_skipped(self, caplog):
        table = self._table(["rise", "x"], [[1.0, 0.0], [0.5, 0.5]])
        with caplog.at_level("WARNING"):
            ranked = rank_by_seed_similarity(table, ["rise", "ghost"])
        assert any("ghost" in message for message in caplog.messages)
        assert ranked[0][0] == "rise"

    def test_all_seeds_absent_is_an_error(self):
        table = self._table(["x"], [[1.0, 0.0]])
        with pytest.raises(ValidationError):
            rank_by_seed_similarity(table, ["ghost", "phantom"])

    def test_substitution_corpus_ranks_shared_context_word_high(self, subst_table):
        table = subst_table
        seeds = [w for w in ("rise", "drop", "surge", "fall") if w in table]
        ranked = rank_by_seed_similarity(table, seeds)
        non_seeds = [w for w, _ in ranked if w not in seeds]
        assert "rebound" in non_seeds[:20]


class TestVectorFile:
    def test_round_trip_within_text_precision(self, tmp_path):
        rng = np.random.default_rng(13)
        table = EmbeddingTable(
            words=["alpha", "beta", "gamma"],
            vectors=rng.normal(size=(3, 5)),
            frequencies=np.array([7, 3, 2], dtype=np.int64),
        )
        path = tmp_path / "vectors.txt"
        save_embeddings(table, path)
        again = load_embeddings(path)
        assert again.words == table.words
        np.testing.assert_allclose(again.vectors, table.vectors, atol=1e-6)
        assert np.all(again.frequencies == 1)

    def test_header_declares_shape(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("2 3\nup 1.0 0.0 0.0\ndown 0.0 1.0 0.0\n", encoding="utf-8")
        table = load_embeddings(path)
        assert len(table) == 2
        assert table.dimension == 3

    def test_short_row_names_the_word(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("2 3\nup 1.0 0.0 0.0\ndown 0.0 1.0\n", encoding="utf-8")
        with pytest.raises(ParseError, match="down"):
            load_embeddings(path)

    def test_row_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "vectors.txt"
        path.write_text("3 2\nup 1.0 0.0\n", encoding="utf-8")
        with pytest.raises(ParseError):
            load_embeddings(path)
