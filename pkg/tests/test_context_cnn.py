"""
Tests for windowing and the local-context filter bank.
"""
import numpy as np
import pytest

from sts_siamese.context_cnn import (
    ContextFilterBank,
    LocalContextSequence,
    local_contexts,
    local_contexts_backward,
    window,
)
from sts_siamese.errors import ShapeMismatchError
from sts_siamese.kernel import grad_check


def _embedded(n, k, seed=0):
    return np.random.default_rng(seed).normal(size=(n, k))


class TestWindow:

    def test_center_and_padding(self):
        x = np.arange(1.0, 7.0).reshape(3, 2)  # rows (1,2), (3,4), (5,6)
        np.testing.assert_array_equal(window(x, 0, 3), [0, 0, 1, 2, 3, 4])
        np.testing.assert_array_equal(window(x, 1, 3), [1, 2, 3, 4, 5, 6])
        np.testing.assert_array_equal(window(x, 2, 5), [1, 2, 3, 4, 5, 6, 0, 0, 0, 0])

    def test_window_of_one_is_the_word(self):
        x = _embedded(4, 3)
        for i in range(4):
            np.testing.assert_array_equal(window(x, i, 1), x[i])

    def test_single_word_sentence(self):
        x = np.array([[2.0, -1.0]])
        np.testing.assert_array_equal(window(x, 0, 5), [0, 0, 0, 0, 2, -1, 0, 0, 0, 0])

    def test_rejects(self):
        x = _embedded(3, 2)
        with pytest.raises(ValueError):
            window(x, 0, 4)
        with pytest.raises(IndexError):
            window(x, 3, 3)


class TestLocalContexts:

    def test_matches_explicit_formula(self):
        bank = ContextFilterBank.initialize(window=3, in_dim=4, n_filters=5, stddev=0.5, seed=1)
        bank.b[:] = np.linspace(-0.2, 0.2, 5)
        x = _embedded(6, 4)

        contexts = local_contexts(x, bank)

        assert contexts.values.shape == (6, 5)
        for i in range(6):
            expected = np.tanh(bank.W @ window(x, i, 3) + bank.b)
            np.testing.assert_allclose(contexts.values[i], expected, rtol=1e-14, atol=1e-15)

    def test_values_in_open_interval(self):
        bank = ContextFilterBank.initialize(5, 3, 7, 0.3, 2)
        values = local_contexts(_embedded(9, 3, seed=5), bank).values
        assert np.all(np.abs(values) < 1.0)

    def test_same_window_same_context(self):
        bank = ContextFilterBank.initialize(3, 2, 4, 0.5, 3)
        a = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
        b = np.array([[9.0, 9.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
        # position 1 in a and position 2 in b see the same neighbours
        np.testing.assert_allclose(local_contexts(a, bank).values[1], local_contexts(b, bank).values[2])

    def test_neighbours_change_context(self):
        bank = ContextFilterBank.initialize(3, 2, 4, 0.5, 3)
        a = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
        b = np.array([[-1.0, 3.0], [0.0, 1.0], [2.0, 2.0]])
        assert not np.allclose(local_contexts(a, bank).values[1], local_contexts(b, bank).values[1])

    def test_shape_errors(self):
        bank = ContextFilterBank.initialize(3, 2, 4, 0.5, 3)
        with pytest.raises(ShapeMismatchError):
            local_contexts(_embedded(3, 5), bank)
        with pytest.raises(ShapeMismatchError):
            local_contexts(np.zeros((0, 2)), bank)
        with pytest.raises(ShapeMismatchError):
            ContextFilterBank(window=3, in_dim=2, n_filters=4, W=np.zeros((4, 5)), b=np.zeros(4))
        with pytest.raises(ValueError):
            ContextFilterBank.initialize(2, 2, 4, 0.5, 3)


class TestBackward:

    @pytest.mark.parametrize("l, n", [(1, 3), (3, 1), (3, 4), (5, 2), (5, 6)])
    def test_gradients_match_finite_differences(self, l, n):
        rng = np.random.default_rng(l * 10 + n)
        bank = ContextFilterBank.initialize(l, 3, 2, 0.5, seed=l + n)
        bank.b[:] = rng.normal(scale=0.1, size=2)
        upstream = rng.normal(size=(n, 2))
        params = {"W": bank.W, "b": bank.b, "x": rng.normal(size=(n, 3))}

        def loss_fn(p):
            contexts = local_contexts(p["x"], bank)
            grads = local_contexts_backward(contexts, bank, upstream)
            return float(np.sum(contexts.values * upstream)), {"W": grads.W, "b": grads.b, "x": grads.embedded}

        report = grad_check(loss_fn, params)
        assert report.passed, report.errors

    def test_needs_forward_cache(self):
        bank = ContextFilterBank.initialize(3, 2, 2, 0.5, 0)
        with pytest.raises(ValueError):
            local_contexts_backward(LocalContextSequence(values=np.zeros((2, 2))), bank, np.zeros((2, 2)))
