"""
Local contexts: one filter-bank response per word, computed over the window
of `l` embeddings centered on it.

    xl_i = x_{i-h} (+) ... (+) x_i (+) ... (+) x_{i+h},   h = l // 2
    lc_i = tanh(W . xl_i + b)

Positions outside the sentence are zero vectors, so a sentence of n words
always yields n local contexts.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from sts_siamese.errors import ShapeMismatchError
from sts_siamese.kernel import gaussian_init, tanh_vec


@dataclass
class ContextFilterBank:
    """d filters, each spanning l stacked k-dimensional embeddings."""
    window: int
    in_dim: int
    n_filters: int
    W: np.ndarray  # (n_filters, window * in_dim)
    b: np.ndarray  # (n_filters,)

    def __post_init__(self) -> None:
        if self.window < 1 or self.window % 2 == 0:
            raise ValueError(f"window must be odd and positive, got {self.window}")
        if self.in_dim < 1 or self.n_filters < 1:
            raise ValueError("in_dim and n_filters must be positive")
        if self.W.shape != (self.n_filters, self.window * self.in_dim):
            raise ShapeMismatchError(
                f"filter matrix has shape {self.W.shape}, expected {(self.n_filters, self.window * self.in_dim)}"
            )
        if self.b.shape != (self.n_filters,):
            raise ShapeMismatchError(f"filter bias has shape {self.b.shape}, expected ({self.n_filters},)")
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("filter bank contains non-finite values")

    @classmethod
    def initialize(cls, window: int, in_dim: int, n_filters: int, stddev: float, seed: int) -> 'ContextFilterBank':
        """Gaussian filters, zero bias."""
        return cls(
            window=window,
            in_dim=in_dim,
            n_filters=n_filters,
            W=gaussian_init((n_filters, window * in_dim), stddev, seed),
            b=np.zeros(n_filters),
        )


@dataclass
class LocalContextSequence:
    """lc_1..lc_n for one sentence, plus what the backward pass needs."""
    values: np.ndarray  # (n, n_filters), every entry in (-1, 1)
    windows: Optional[np.ndarray] = None  # (n, window * in_dim)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass
class ContextGradients:
    W: np.ndarray
    b: np.ndarray
    embedded: np.ndarray  # (n, in_dim)


def _pad(embedded: np.ndarray, window: int) -> np.ndarray:
    half = window // 2
    pad = np.zeros((half, embedded.shape[1]))
    return np.vstack([pad, embedded, pad])


def window(embedded: np.ndarray, i: int, l: int) -> np.ndarray:
    """
    Concatenated window of `l` embeddings centered on position i (0-based).

    Args:
        embedded: (n, k) sentence embeddings.
        i: Center position, 0 <= i < n.
        l: Odd window length.

    Returns:
        Vector of length l * k; out-of-range positions are zeros.
    """
    if l < 1 or l % 2 == 0:
        raise ValueError(f"window length must be odd and positive, got {l}")
    n = embedded.shape[0]
    if not 0 <= i < n:
        raise IndexError(f"position {i} outside sentence of length {n}")
    return _pad(embedded, l)[i:i + l].reshape(-1)


def _check_input(embedded: np.ndarray, bank: ContextFilterBank) -> None:
    if embedded.ndim != 2 or embedded.shape[1] != bank.in_dim:
        raise ShapeMismatchError(f"embeddings of shape {embedded.shape} do not match filter input width {bank.in_dim}")
    if embedded.shape[0] == 0:
        raise ShapeMismatchError("cannot compute local contexts of an empty sentence")


def local_contexts(embedded: np.ndarray, bank: ContextFilterBank) -> LocalContextSequence:
    """
    Apply the filter bank at every position of a sentence.

    Args:
        embedded: (n, k) word embeddings of one sentence.
        bank: Filter bank with in_dim == k.

    Returns:
        LocalContextSequence with n rows, carrying the windows for backward.
    """
    _check_input(embedded, bank)
    padded = _pad(embedded, bank.window)
    n, l = embedded.shape[0], bank.window
    windows = np.stack([padded[i:i + l].reshape(-1) for i in range(n)])
    values = tanh_vec(windows @ bank.W.T + bank.b)
    return LocalContextSequence(values=values, windows=windows)


def local_contexts_backward(
    contexts: LocalContextSequence,
    bank: ContextFilterBank,
    upstream: np.ndarray,
) -> ContextGradients:
    """
    Gradients of a scalar loss with respect to W, b and the input embeddings.

    Args:
        contexts: Output of local_contexts for the same bank.
        bank: The filter bank used in the forward pass.
        upstream: (n, n_filters) gradient with respect to each lc_i.

    Raises:
        ValueError: If the forward cache is missing.
        ShapeMismatchError: If upstream does not match the contexts.
    """
    if contexts.windows is None:
        raise ValueError("local_contexts_backward needs the cached forward windows")
    if upstream.shape != contexts.values.shape:
        raise ShapeMismatchError(f"upstream gradient {upstream.shape} does not match contexts {contexts.values.shape}")

    n, l, k = len(contexts), bank.window, bank.in_dim
    d_pre = upstream * (1.0 - contexts.values ** 2)
    d_W = d_pre.T @ contexts.windows
    d_b = d_pre.sum(axis=0)

    d_windows = d_pre @ bank.W
    d_padded = np.zeros((n + 2 * (l // 2), k))
    for i in range(n):
        d_padded[i:i + l] += d_windows[i].reshape(l, k)
    half = l // 2
    return ContextGradients(W=d_W, b=d_b, embedded=d_padded[half:half + n])
