"""
Evaluation metrics and the local-regression calibration that maps raw
(0, 1] similarities onto the gold [1, 5] scale.
"""
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from sts_siamese.embeddings import EmbeddingTable
from sts_siamese.errors import DataFormatError, NumericError
from sts_siamese.model import SiameseModel, score_raw
from sts_siamese.types import GOLD_MAX, GOLD_MIN, EvaluationReport, PairPrediction, SentencePair


def _as_series(x: Sequence[float], y: Sequence[float], minimum: int) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError(f"series must be 1-D and of equal length, got {x.shape} and {y.shape}")
    if x.size < minimum:
        raise ValueError(f"need at least {minimum} points, got {x.size}")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Sample Pearson correlation.

    Raises:
        NumericError: If either series is constant.
    """
    x, y = _as_series(x, y, 2)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise NumericError("correlation undefined for a constant series")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(x: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share their mean rank."""
    return rankdata(np.asarray(x, dtype=np.float64), method="average")


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of the average-ranked series."""
    x, y = _as_series(x, y, 2)
    return pearson(average_ranks(x), average_ranks(y))


def mse(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Mean squared difference."""
    pred, gold = _as_series(pred, gold, 1)
    diff = pred - gold
    return float(np.mean(diff * diff))


@dataclass
class CalibrationModel:
    """
    Local linear regression (tricube-weighted) from raw score to gold score.

    A query is answered from its ceil(bandwidth * n) nearest sample points,
    widened to every point tied with the farthest of them; the result is
    clamped to [1, 5]. The sample is kept sorted by (raw, gold), so
    predictions do not depend on the order it was fitted in.
    """
    raw: np.ndarray
    gold: np.ndarray
    bandwidth: float = 0.25
    degree: int = 1

    def __post_init__(self) -> None:
        order = np.lexsort((self.gold, self.raw))
        self.raw = self.raw[order]
        self.gold = self.gold[order]

    @property
    def n_neighbors(self) -> int:
        return max(2, int(math.ceil(self.bandwidth * self.raw.size)))

    def predict_one(self, q: float) -> float:
        dist = np.abs(self.raw - q)
        kth = np.partition(dist, self.n_neighbors - 1)[self.n_neighbors - 1]
        nearest = dist <= kth
        x, y, d = self.raw[nearest], self.gold[nearest], dist[nearest]

        max_dist = float(d.max())
        if max_dist == 0.0:
            # every neighbour sits on the query
            return _clamp(float(y.mean()))
        w = (1.0 - (d / max_dist) ** 3) ** 3
        if not np.any(w > 0.0):
            # every neighbour at the same distance
            w = np.ones_like(d)

        sw = float(w.sum())
        x_bar = float(np.dot(w, x)) / sw
        y_bar = float(np.dot(w, y)) / sw
        sxx = float(np.dot(w, (x - x_bar) ** 2))
        if sxx <= 1e-14 * max(1.0, x_bar * x_bar) * sw:
            if np.all(x == x[0]):
                return _clamp(float(y.mean()))
            return _clamp(y_bar)
        slope = float(np.dot(w, (x - x_bar) * (y - y_bar))) / sxx
        return _clamp(y_bar + slope * (q - x_bar))

    def predict(self, raw: Sequence[float]) -> np.ndarray:
        return np.array([self.predict_one(float(q)) for q in np.atleast_1d(np.asarray(raw, dtype=np.float64))])


def _clamp(value: float) -> float:
    return min(GOLD_MAX, max(GOLD_MIN, value))


def fit_calibration(raw: Sequence[float], gold: Sequence[float], bandwidth: float = 0.25) -> CalibrationModel:
    """
    Store a calibration sample.

    Args:
        raw: Raw model scores in (0, 1].
        gold: Gold scores for the same pairs.
        bandwidth: Fraction of the sample used around each query.

    Raises:
        ValueError: Too few points, mismatched lengths, bandwidth outside (0, 1]
            or raw scores outside (0, 1].
    """
    if not 0.0 < bandwidth <= 1.0:
        raise ValueError(f"bandwidth must be in (0, 1], got {bandwidth}")
    raw_arr, gold_arr = _as_series(raw, gold, 1)
    needed = max(5, int(math.ceil(bandwidth * raw_arr.size)))
    if raw_arr.size < needed:
        raise ValueError(f"calibration needs at least {needed} points, got {raw_arr.size}")
    if np.any(raw_arr <= 0.0) or np.any(raw_arr > 1.0):
        raise ValueError("raw scores must lie in (0, 1]")
    return CalibrationModel(raw=raw_arr.copy(), gold=gold_arr.copy(), bandwidth=bandwidth)


def identity_calibration(raw: Sequence[float]) -> np.ndarray:
    """Affine map (0, 1] -> [1, 5] used when no fitted calibration is given."""
    return np.clip(GOLD_MIN + (GOLD_MAX - GOLD_MIN) * np.asarray(raw, dtype=np.float64), GOLD_MIN, GOLD_MAX)


def save_calibration(calibration: CalibrationModel, path: str) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, raw=calibration.raw, gold=calibration.gold, bandwidth=np.array(calibration.bandwidth))


def load_calibration(path: str) -> CalibrationModel:
    try:
        with np.load(path) as data:
            return fit_calibration(data["raw"], data["gold"], float(data["bandwidth"]))
    except (OSError, KeyError, ValueError) as e:
        raise DataFormatError(f"cannot read calibration: {e}", path)


def report_from_scores(
    ids: Sequence[str],
    raw: Sequence[float],
    gold: Sequence[float],
    calibration: Optional[CalibrationModel] = None,
) -> EvaluationReport:
    """
    Metrics for precomputed scores: correlations on raw scores, MSE on
    calibrated scores against gold. Results do not depend on input order.
    """
    order = sorted(range(len(ids)), key=lambda i: ids[i])
    ids = [ids[i] for i in order]
    raw_arr = np.asarray([raw[i] for i in order], dtype=np.float64)
    gold_arr = np.asarray([gold[i] for i in order], dtype=np.float64)
    calibrated = calibration.predict(raw_arr) if calibration is not None else identity_calibration(raw_arr)

    predictions: List[PairPrediction] = [
        PairPrediction(id=i, raw=float(r), calibrated=float(c), gold=float(g))
        for i, r, c, g in zip(ids, raw_arr, calibrated, gold_arr)
    ]
    return EvaluationReport(
        pearson=pearson(raw_arr, gold_arr),
        spearman=spearman(raw_arr, gold_arr),
        mse=mse(calibrated, gold_arr),
        n=len(ids),
        predictions=predictions,
    )


def raw_scores(model: SiameseModel, pairs: Sequence[SentencePair], table: EmbeddingTable) -> np.ndarray:
    return np.array([score_raw(model, p.tokens_a, p.tokens_b, table) for p in pairs], dtype=np.float64)


def evaluate(
    model: SiameseModel,
    split: Sequence[SentencePair],
    table: EmbeddingTable,
    calibration: Optional[CalibrationModel] = None,
) -> EvaluationReport:
    """
    Score a split and compute Pearson, Spearman and MSE.

    Args:
        model: Trained model.
        split: Pairs to evaluate.
        table: Embeddings.
        calibration: Fitted calibration; the affine 1 + 4 * raw map when None.
    """
    if not split:
        raise ValueError("cannot evaluate an empty split")
    raw = raw_scores(model, split, table)
    return report_from_scores([p.id for p in split], raw, [p.gold for p in split], calibration)
