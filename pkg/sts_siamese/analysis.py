"""
Diagnostics: word-level and local-context cosine-distance matrices, pair
scoring tables, and the window-length ablation harness.

An ablation window of 0 trains the model without a filter bank (d = 0),
the plain Siamese LSTM. Window 1 still appends a one-word projection of
each embedding, so it is not the same model.
"""
import math
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sts_siamese.context_cnn import local_contexts
from sts_siamese.corpus import tokenize
from sts_siamese.embeddings import EmbeddingTable
from sts_siamese.errors import NumericError, StsError, UsageError
from sts_siamese.evaluation import CalibrationModel, evaluate, fit_calibration, identity_calibration, raw_scores
from sts_siamese.model import SiameseModel, score_raw
from sts_siamese.training import train
from sts_siamese.types import DatasetSplit, TrainConfig


BASELINE_WINDOW = 0  # no filter bank
DEFAULT_WINDOWS = (BASELINE_WINDOW, 1, 3, 5, 7, 9)
MARKED = "n/a"  # cell whose cosine distance is undefined (zero-norm vector)


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """
    1 - (u . v) / (||u|| ||v||), clipped to [0, 2].

    Raises:
        NumericError: If either vector has zero norm.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"vectors of shapes {u.shape} and {v.shape}")
    norm_u = float(np.sqrt(np.dot(u, u)))
    norm_v = float(np.sqrt(np.dot(v, v)))
    if norm_u == 0.0 or norm_v == 0.0:
        raise NumericError("cosine distance undefined for a zero-norm vector")
    similarity = float(np.dot(u, v)) / (norm_u * norm_v)
    return min(2.0, max(0.0, 1.0 - similarity))


@dataclass
class DistanceMatrix:
    """Cosine distances between the positions of two sentences; NaN marks undefined cells."""
    row_labels: List[str]
    col_labels: List[str]
    values: np.ndarray

    @property
    def marked(self) -> int:
        return int(np.isnan(self.values).sum())

    def to_frame(self) -> pd.DataFrame:
        # labels can repeat inside a sentence, so keep positions
        return pd.DataFrame(
            self.values,
            index=pd.Index(self.row_labels, name="A"),
            columns=list(self.col_labels),
        )

    def render(self, fmt: str = "text", decimals: int = 2) -> str:
        """CSV (full precision) or an aligned text table rounded to `decimals`."""
        frame = self.to_frame()
        if fmt == "csv":
            return frame.to_csv(float_format="%.17g", na_rep=MARKED)
        if fmt == "text":
            return frame.to_string(float_format=lambda v: f"{v:.{decimals}f}", na_rep=MARKED)
        raise ValueError(f"unknown matrix format {fmt!r}")

    def nearest_columns(self, top: int = 4) -> Dict[str, List[str]]:
        """For every row token, the `top` column tokens at the smallest distance."""
        nearest: Dict[str, List[str]] = {}
        for i, label in enumerate(self.row_labels):
            row = self.values[i]
            order = [j for j in np.argsort(row, kind="stable") if not np.isnan(row[j])][:top]
            nearest[f"{i + 1}-{label}"] = [f"{j + 1}-{self.col_labels[j]}" for j in order]
        return nearest

    def render_nearest(self, top: int = 4) -> str:
        lines = [f"Nearest {top} in B:"]
        for row, cols in self.nearest_columns(top).items():
            lines.append(f"  {row}: {', '.join(cols) if cols else MARKED}")
        return "\n".join(lines)


def _distance_grid(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    values = np.empty((rows.shape[0], cols.shape[0]))
    for i, u in enumerate(rows):
        for j, v in enumerate(cols):
            try:
                values[i, j] = cosine_distance(u, v)
            except NumericError:
                values[i, j] = np.nan
    return values


def word_matrix(sentence_a: str, sentence_b: str, table: EmbeddingTable) -> DistanceMatrix:
    """Cosine distance between every word embedding of A and of B."""
    tokens_a, tokens_b = tokenize(sentence_a), tokenize(sentence_b)
    return DistanceMatrix(tokens_a, tokens_b, _distance_grid(table.embed(tokens_a), table.embed(tokens_b)))


def context_matrix(
    sentence_a: str,
    sentence_b: str,
    model: SiameseModel,
    table: EmbeddingTable,
    window: Optional[int] = None,
) -> DistanceMatrix:
    """
    Cosine distance between every local context of A and of B under the
    model's trained filter bank.

    Raises:
        UsageError: If `window` is given and differs from the model's,
            or the model has no filter bank.
    """
    if model.bank is None:
        raise UsageError("checkpoint has no filter bank (d = 0), so there are no local contexts")
    if window is not None and window != model.hyper.l:
        raise UsageError(f"checkpoint has window {model.hyper.l}, analysis asked for {window}")
    tokens_a, tokens_b = tokenize(sentence_a), tokenize(sentence_b)
    lc_a = local_contexts(table.embed(tokens_a), model.bank).values
    lc_b = local_contexts(table.embed(tokens_b), model.bank).values
    return DistanceMatrix(tokens_a, tokens_b, _distance_grid(lc_a, lc_b))


@dataclass
class ScoredPair:
    sentence_a: str
    sentence_b: str
    raw: float
    score: float
    gold: Optional[float] = None


def score_pairs(
    model: SiameseModel,
    calibration: Optional[CalibrationModel],
    pairs: Sequence[Tuple[str, str, Optional[float]]],
    table: EmbeddingTable,
) -> List[ScoredPair]:
    """
    Calibrated 1-5 score for each (sentence A, sentence B, gold) row.

    Without a calibration the affine 1 + 4 * raw map is used.
    """
    scored: List[ScoredPair] = []
    for sentence_a, sentence_b, gold in pairs:
        raw = score_raw(model, tokenize(sentence_a), tokenize(sentence_b), table)
        if calibration is not None:
            score = float(calibration.predict([raw])[0])
        else:
            score = float(identity_calibration([raw])[0])
        scored.append(ScoredPair(sentence_a, sentence_b, raw, score, gold))
    return scored


def scored_frame(scored: Sequence[ScoredPair], baseline: Optional[Sequence[ScoredPair]] = None) -> pd.DataFrame:
    """One row per pair; `baseline` adds a second model's scores for the same pairs."""
    frame = pd.DataFrame(
        [(s.sentence_a, s.sentence_b, s.raw, s.score, s.gold) for s in scored],
        columns=["sentence_a", "sentence_b", "raw", "score", "gold"],
    )
    if baseline is not None:
        if len(baseline) != len(scored):
            raise ValueError(f"baseline scored {len(baseline)} pairs, model scored {len(scored)}")
        frame.insert(4, "baseline_raw", [s.raw for s in baseline])
        frame.insert(5, "baseline_score", [s.score for s in baseline])
    return frame


@dataclass
class AblationSettings:
    """Everything except the window that one ablation run needs."""
    filters: int
    hidden: int
    seed: int
    train_config: TrainConfig
    bandwidth: float = 0.25
    init_stddev: float = 0.05
    forget_bias: float = 2.5


def _run_window(window: int, dataset: DatasetSplit, table: EmbeddingTable, settings: AblationSettings) -> dict:
    baseline = window == BASELINE_WINDOW
    model = SiameseModel.initialize(
        k=table.dim,
        d=0 if baseline else settings.filters,
        l=1 if baseline else window,
        H=settings.hidden,
        seed=settings.seed,
        embedding_id=table.identifier,
        init_stddev=settings.init_stddev,
        forget_bias=settings.forget_bias,
    )
    trained = train(model, dataset, table, settings.train_config).model

    calibration = None
    if dataset.validation and len(dataset.validation) >= 5:
        calibration = fit_calibration(
            raw_scores(trained, dataset.validation, table),
            [p.gold for p in dataset.validation],
            settings.bandwidth,
        )
    eval_split = dataset.test or dataset.validation or dataset.train
    report = evaluate(trained, eval_split, table, calibration)
    return {"window": window, "pearson": report.pearson, "spearman": report.spearman,
            "mse": report.mse, "status": "ok"}


def _safe_run(window: int, dataset: DatasetSplit, table: EmbeddingTable, settings: AblationSettings) -> dict:
    try:
        return _run_window(window, dataset, table, settings)
    except (StsError, ValueError, ArithmeticError) as e:
        return _failed_row(window, str(e))


def _failed_row(window: int, reason: str) -> dict:
    return {"window": window, "pearson": math.nan, "spearman": math.nan, "mse": math.nan, "status": f"failed: {reason}"}


def _collect(windows: Sequence[int], futures: Sequence[Future]) -> List[dict]:
    """One row per window; a worker that died becomes a failed row."""
    rows = []
    for w, future in zip(windows, futures):
        try:
            rows.append(future.result())
        except Exception as e:
            rows.append(_failed_row(w, f"{type(e).__name__}: {e}"))
    return rows


def ablate(
    windows: Sequence[int],
    dataset: DatasetSplit,
    table: EmbeddingTable,
    settings: AblationSettings,
    workers: int = 1,
    verbose: bool = False,
) -> pd.DataFrame:
    """
    Train and evaluate one model per window length with identical seeds and
    settings; only the window differs between rows.

    Args:
        windows: Odd window lengths, e.g. (1, 3, 5, 7, 9), and optionally 0
            for the plain Siamese LSTM without a filter bank.
        dataset: Train/validation/test split. Calibration is fitted on
            validation, metrics are reported on test.
        table: Embeddings.
        settings: Shared model and training settings.
        workers: Run windows in this many processes.

    Returns:
        DataFrame with columns window, pearson, spearman, mse, status. A
        failed run keeps its row with NaN metrics and a failure status.
    """
    for w in windows:
        if w != BASELINE_WINDOW and (w < 1 or w % 2 == 0):
            raise UsageError(f"window lengths must be odd and positive, or 0 for no filter bank, got {w}")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_safe_run, w, dataset, table, settings) for w in windows]
            rows = _collect(windows, futures)
    else:
        rows = []
        for w in windows:
            if verbose:
                print(f"🔬 Window {w}: training..." if w != BASELINE_WINDOW else "🔬 No filter bank: training...")
            rows.append(_safe_run(w, dataset, table, settings))
            if verbose:
                row = rows[-1]
                print(f"   {row['status']} | r={row['pearson']:.4f} rho={row['spearman']:.4f} mse={row['mse']:.4f}")

    return pd.DataFrame(rows, columns=["window", "pearson", "spearman", "mse", "status"])
