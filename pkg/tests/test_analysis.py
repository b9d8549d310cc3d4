"""
Tests for distance matrices, pair scoring and the window ablation.
"""
import io
from concurrent.futures import Future
from concurrent.futures.process import BrokenProcessPool

import numpy as np
import pandas as pd
import pytest

from sts_siamese.analysis import (
    BASELINE_WINDOW,
    AblationSettings,
    DistanceMatrix,
    ScoredPair,
    _collect,
    ablate,
    context_matrix,
    cosine_distance,
    score_pairs,
    scored_frame,
    word_matrix,
)
from sts_siamese.embeddings import EmbeddingTable, OovPolicy
from sts_siamese.errors import NumericError, UsageError
from sts_siamese.evaluation import fit_calibration
from sts_siamese.model import SiameseModel
from sts_siamese.types import TrainConfig


class TestCosineDistance:

    def test_reference_values(self):
        assert cosine_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0
        assert cosine_distance(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == 2.0
        assert cosine_distance(np.array([3.0, 4.0]), np.array([3.0, 4.0])) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            u, v = rng.normal(size=5), rng.normal(size=5)
            d = cosine_distance(u, v)
            assert d == cosine_distance(v, u)
            assert 0.0 <= d <= 2.0

    def test_zero_norm(self):
        with pytest.raises(NumericError):
            cosine_distance(np.zeros(3), np.ones(3))


class TestWordMatrix:

    def test_labels_follow_token_order(self, table):
        matrix = word_matrix("A woman is cooking fish .", "Fish is being cooked .", table)
        assert matrix.row_labels == ["A", "woman", "is", "cooking", "fish", "."]
        assert matrix.col_labels == ["Fish", "is", "being", "cooked", "."]
        assert matrix.values.shape == (6, 5)

    def test_shared_tokens_are_zero(self, table):
        matrix = word_matrix("A woman is cooking fish .", "Fish is being cooked .", table)
        assert matrix.values[2, 1] == pytest.approx(0.0, abs=1e-12)   # is / is
        assert matrix.values[5, 4] == pytest.approx(0.0, abs=1e-12)   # . / .
        assert np.all((matrix.values >= 0.0) & (matrix.values <= 2.0))

    def test_sentence_against_itself(self, table):
        matrix = word_matrix("The girl is singing .", "The girl is singing .", table)
        np.testing.assert_allclose(np.diag(matrix.values), 0.0, atol=1e-12)

    def test_zero_vectors_are_marked(self):
        table = EmbeddingTable(["cat"], np.array([[1.0, 2.0]]), OovPolicy.zero())
        matrix = word_matrix("cat dog", "cat", table)
        assert np.isnan(matrix.values[1, 0])
        assert matrix.marked == 1
        assert "n/a" in matrix.render("text")
        assert "n/a" in matrix.render("csv")

    def test_render_and_nearest(self):
        matrix = DistanceMatrix(["a", "b"], ["x", "y", "z"], np.array([[0.5, 0.1, 0.9], [0.2, 0.3, 0.0]]))
        frame = pd.read_csv(io.StringIO(matrix.render("csv")), index_col=0)
        assert list(frame.columns) == ["x", "y", "z"]
        assert "0.10" in matrix.render("text")
        assert matrix.nearest_columns(2) == {"1-a": ["2-y", "1-x"], "2-b": ["3-z", "1-x"]}
        assert matrix.render_nearest(2).splitlines() == ["Nearest 2 in B:", "  1-a: 2-y, 1-x", "  2-b: 3-z, 1-x"]
        with pytest.raises(ValueError):
            matrix.render("html")


class TestContextMatrix:

    def test_identical_sentences_zero_diagonal(self, table):
        model = SiameseModel.initialize(k=table.dim, d=5, l=3, H=2, seed=0, init_stddev=0.5)
        matrix = context_matrix("A man is playing a guitar .", "A man is playing a guitar .", model, table)
        np.testing.assert_allclose(np.diag(matrix.values), 0.0, atol=1e-12)

    def test_context_sensitive(self, table):
        model = SiameseModel.initialize(k=table.dim, d=5, l=3, H=2, seed=0, init_stddev=0.5)
        matrix = context_matrix("A man is cooking .", "A woman is cooking .", model, table)
        # "is" appears in both but with different left neighbours
        assert matrix.values[2, 2] > 1e-6

    def test_needs_a_filter_bank(self, table):
        model = SiameseModel.initialize(k=table.dim, d=0, l=1, H=2, seed=0)
        with pytest.raises(UsageError):
            context_matrix("A man .", "A woman .", model, table)

    def test_window_must_match_checkpoint(self, table):
        model = SiameseModel.initialize(k=table.dim, d=5, l=3, H=2, seed=0)
        with pytest.raises(UsageError):
            context_matrix("A man .", "A woman .", model, table, window=5)


class TestScorePairs:

    def test_identical_pair_scores_at_top(self, table):
        model = SiameseModel.initialize(k=table.dim, d=3, l=3, H=2, seed=0)
        raw = np.linspace(0.2, 1.0, 20)
        calibration = fit_calibration(raw, 1.0 + 4.0 * raw, 0.5)
        scored = score_pairs(model, calibration, [("A woman is cooking fish .", "A woman is cooking fish .", None)], table)
        assert scored[0].raw == 1.0
        assert scored[0].score == pytest.approx(5.0)

    def test_without_calibration(self, table):
        model = SiameseModel.initialize(k=table.dim, d=3, l=3, H=2, seed=0)
        scored = score_pairs(model, None, [("The girl is singing .", "A girl sings a song .", 4.4)], table)
        assert scored[0].score == pytest.approx(1.0 + 4.0 * scored[0].raw)
        assert scored[0].gold == 4.4

    def test_empty(self, table):
        model = SiameseModel.initialize(k=table.dim, d=3, l=3, H=2, seed=0)
        frame = scored_frame(score_pairs(model, None, [], table))
        assert frame.empty
        assert list(frame.columns) == ["sentence_a", "sentence_b", "raw", "score", "gold"]

    def test_side_by_side_frame(self):
        scored = [ScoredPair("a", "b", 0.5, 3.0, 4.0), ScoredPair("c", "d", 0.25, 2.0, None)]
        baseline = [ScoredPair("a", "b", 0.75, 4.0, 4.0), ScoredPair("c", "d", 0.5, 3.0, None)]
        frame = scored_frame(scored, baseline)
        assert list(frame.columns) == ["sentence_a", "sentence_b", "raw", "score", "baseline_raw", "baseline_score", "gold"]
        assert frame["baseline_raw"].tolist() == [0.75, 0.5]
        with pytest.raises(ValueError):
            scored_frame(scored, baseline[:1])


class TestAblate:

    @staticmethod
    def _settings():
        return AblationSettings(filters=3, hidden=2, seed=5,
                                train_config=TrainConfig(epochs=2, batch_size=4, lr_scale=1.0), bandwidth=1.0)

    def test_one_complete_row_per_window(self, table, dataset):
        frame = ablate([3, 5, 7, 9], dataset, table, self._settings())
        assert frame["window"].tolist() == [3, 5, 7, 9]
        assert (frame["status"] == "ok").all()
        assert frame[["pearson", "spearman", "mse"]].notna().all().all()

    def test_reproducible(self, table, dataset):
        first = ablate([1, 3], dataset, table, self._settings())
        second = ablate([1, 3], dataset, table, self._settings())
        pd.testing.assert_frame_equal(first, second, check_exact=True)

    def test_baseline_row_has_no_filter_bank(self, table, dataset):
        frame = ablate([BASELINE_WINDOW, 1], dataset, table, self._settings())
        assert frame["window"].tolist() == [0, 1]
        assert (frame["status"] == "ok").all()
        # window 1 still appends a projection of each embedding
        assert frame["pearson"].iloc[0] != frame["pearson"].iloc[1]

    def test_parallel_matches_serial(self, table, dataset):
        serial = ablate([BASELINE_WINDOW, 3, 5], dataset, table, self._settings())
        parallel = ablate([BASELINE_WINDOW, 3, 5], dataset, table, self._settings(), workers=2)
        pd.testing.assert_frame_equal(serial, parallel, check_exact=True)

    def test_dead_worker_keeps_the_other_rows(self):
        done, died = Future(), Future()
        done.set_result({"window": 3, "pearson": 0.5, "spearman": 0.4, "mse": 1.0, "status": "ok"})
        died.set_exception(BrokenProcessPool("worker exited"))
        rows = _collect([3, 5], [done, died])
        assert [r["window"] for r in rows] == [3, 5]
        assert rows[0]["status"] == "ok"
        assert rows[1]["status"].startswith("failed: BrokenProcessPool")
        assert np.isnan(rows[1]["pearson"])

    def test_rejects_even_window(self, table, dataset):
        with pytest.raises(UsageError):
            ablate([3, 4], dataset, table, self._settings())
