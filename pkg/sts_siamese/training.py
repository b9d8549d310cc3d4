"""
Mini-batch Adadelta training of the Siamese model with MSE loss and
best-validation model selection.
"""
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from sts_siamese.embeddings import EmbeddingOverlay, EmbeddingTable
from sts_siamese.errors import NumericError
from sts_siamese.evaluation import pearson
from sts_siamese.kernel import Adadelta, clip_global_norm
from sts_siamese.model import PairLoss, SiameseModel, pair_loss, score_raw
from sts_siamese.types import DatasetSplit, EpochRecord, SentencePair, TrainConfig


Lookup = Union[EmbeddingTable, EmbeddingOverlay]


@dataclass
class TrainingResult:
    """Best model, the per-epoch log, and the embeddings it was trained with."""
    model: SiameseModel
    log: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    table: Optional[EmbeddingTable] = None  # tuned copy when embeddings were trained


def _batch_results(
    model: SiameseModel,
    batch: Sequence[SentencePair],
    table: Lookup,
    config: TrainConfig,
    pool: Optional[ThreadPoolExecutor],
) -> List[Tuple[SentencePair, PairLoss]]:
    def run(pair: SentencePair) -> Tuple[SentencePair, PairLoss]:
        return pair, pair_loss(model, pair, table, with_embedding_grads=config.train_embeddings)

    if pool is None:
        return [run(pair) for pair in batch]
    if config.deterministic:
        return list(pool.map(run, batch))
    futures = [pool.submit(run, pair) for pair in batch]
    return [future.result() for future in as_completed(futures)]


def _reduce(results: Sequence[Tuple[SentencePair, PairLoss]], model: SiameseModel):
    """Average gradients over a batch, summing in the order given."""
    for pair, result in results:
        if not np.isfinite(result.loss):
            raise NumericError(f"non-finite loss on pair {pair.id}")

    grads = {name: np.zeros_like(array) for name, array in model.parameters().items()}
    embedding_grads: Dict[str, np.ndarray] = {}
    for _, result in results:
        for name, g in result.grads.items():
            grads[name] += g
        for key, g in (result.embedding_grads or {}).items():
            if key in embedding_grads:
                embedding_grads[key] = embedding_grads[key] + g
            else:
                embedding_grads[key] = g.copy()

    scale = 1.0 / len(results)
    for g in grads.values():
        g *= scale
    for g in embedding_grads.values():
        g *= scale
    return grads, embedding_grads


def _validate(model: SiameseModel, pairs: Sequence[SentencePair], table: Lookup):
    if not pairs:
        return float("nan"), float("nan")
    scores = np.array([score_raw(model, p.tokens_a, p.tokens_b, table) for p in pairs])
    targets = np.array([p.target for p in pairs])
    val_mse = float(np.mean((scores - targets) ** 2))
    try:
        val_pearson = pearson(scores, [p.gold for p in pairs]) if len(pairs) >= 2 else float("nan")
    except NumericError:
        val_pearson = float("nan")
    return val_mse, val_pearson


def train(
    model: SiameseModel,
    dataset: DatasetSplit,
    table: EmbeddingTable,
    config: TrainConfig,
    verbose: bool = False,
) -> TrainingResult:
    """
    Train a copy of `model` on dataset.train.

    The returned model is the epoch with the lowest validation MSE (lowest
    train MSE when the validation split is empty). Runs are deterministic
    for a fixed shuffle seed.

    Args:
        model: Initial model; left unchanged.
        dataset: Train and validation pairs.
        table: Embeddings; never modified. With config.train_embeddings the
            tuned rows come back as result.table.
        config: Optimizer and schedule.
        verbose: Print one line per epoch.

    Raises:
        ValueError: If the train split is empty.
        NumericError: If a pair produces a non-finite loss.
    """
    train_pairs = list(dataset.train)
    if not train_pairs:
        raise ValueError("cannot train on an empty train split")

    working = model.copy()
    params = working.parameters()
    optimizer = Adadelta(config.rho, config.epsilon, config.lr_scale)
    overlay = EmbeddingOverlay(table) if config.train_embeddings else None
    embedding_optimizer = Adadelta(config.rho, config.epsilon, config.lr_scale) if overlay else None
    lookup: Lookup = overlay if overlay is not None else table

    rng = np.random.default_rng(config.shuffle_seed)
    has_validation = bool(dataset.validation)
    result = TrainingResult(model=working.copy())
    best_selection = float("inf")
    best_overrides: Dict[str, np.ndarray] = {}
    stale = 0

    if verbose:
        print(f"🚀 Training on {len(train_pairs)} pairs, validating on {len(dataset.validation)}")
        print(f"   window={working.hyper.l} filters={working.hyper.d} hidden={working.hyper.H} "
              f"batch={config.batch_size} lr_scale={config.lr_scale}")

    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(train_pairs))
            total_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                batch = [train_pairs[i] for i in order[start:start + config.batch_size]]
                results = _batch_results(working, batch, lookup, config, pool)
                grads, embedding_grads = _reduce(results, working)
                if config.clip_norm is not None:
                    clip_global_norm(grads, config.clip_norm)
                optimizer.step(params, grads)
                if overlay is not None and embedding_grads:
                    rows = {key: overlay.row(key) for key in embedding_grads}
                    embedding_optimizer.step(rows, embedding_grads)
                total_loss += sum(r.loss for _, r in results)

            train_mse = total_loss / len(train_pairs)
            val_mse, val_pearson = _validate(working, dataset.validation, lookup)
            result.log.append(EpochRecord(epoch=epoch, train_mse=train_mse, val_mse=val_mse, val_pearson=val_pearson))

            selection = val_mse if has_validation else train_mse
            improved = selection < best_selection
            if improved:
                best_selection = selection
                result.model = working.copy()
                result.best_epoch = epoch
                if overlay is not None:
                    best_overrides = overlay.snapshot()
                stale = 0
            else:
                stale += 1

            if verbose:
                marker = " ⭐ best" if improved else ""
                print(f"📊 Epoch {epoch}/{config.epochs} | train MSE {train_mse:.5f} | "
                      f"val MSE {val_mse:.5f} | val r {val_pearson:.4f}{marker}")

            if has_validation and config.patience is not None and stale >= config.patience:
                if verbose:
                    print(f"   ⏹️  No validation improvement for {stale} epochs, stopping")
                break
            if config.stop_below_train_mse is not None and train_mse < config.stop_below_train_mse:
                if verbose:
                    print(f"   ✅ Train MSE below {config.stop_below_train_mse}, stopping")
                break
    finally:
        if pool is not None:
            pool.shutdown()

    if overlay is not None:
        result.table = overlay.materialize(best_overrides)
    if verbose:
        print(f"✅ Best epoch {result.best_epoch} ({'val' if has_validation else 'train'} MSE {best_selection:.5f})")
    return result


def write_epoch_log(log: Sequence[EpochRecord], path: str) -> None:
    """CSV with columns epoch,train_mse,val_mse,val_pearson."""
    frame = pd.DataFrame([asdict(r) for r in log], columns=["epoch", "train_mse", "val_mse", "val_pearson"])
    frame.to_csv(path, index=False, float_format="%.17g")
