"""
Type definitions and dataclasses shared across the package.
"""
from dataclasses import dataclass, field
from typing import List, Optional

from sts_siamese.errors import DataFormatError


GOLD_MIN = 1.0
GOLD_MAX = 5.0


@dataclass(frozen=True)
class SentencePair:
    """Two tokenized sentences and their gold relatedness score."""
    id: str
    tokens_a: List[str]
    tokens_b: List[str]
    gold: float  # 1.0 to 5.0

    def __post_init__(self) -> None:
        if not GOLD_MIN <= self.gold <= GOLD_MAX:
            raise DataFormatError(f"pair {self.id}: gold score {self.gold} outside [1, 5]")
        if not self.tokens_a or not self.tokens_b:
            raise DataFormatError(f"pair {self.id}: empty sentence")

    @property
    def target(self) -> float:
        """Gold score mapped onto the similarity head's [0, 1] range."""
        return (self.gold - GOLD_MIN) / (GOLD_MAX - GOLD_MIN)


@dataclass
class DatasetSplit:
    """Train/validation/test partition plus the records no split received."""
    train: List[SentencePair]
    validation: List[SentencePair]
    test: List[SentencePair]
    unused: List[SentencePair] = field(default_factory=list)
    strategy: str = "firstn"

    def __post_init__(self) -> None:
        seen = set()
        for part in (self.train, self.validation, self.test, self.unused):
            for pair in part:
                if pair.id in seen:
                    raise DataFormatError(f"pair id {pair.id} assigned to more than one split")
                seen.add(pair.id)

    def sizes(self) -> tuple:
        return len(self.train), len(self.validation), len(self.test)


@dataclass
class TrainConfig:
    """Optimizer and schedule settings for one training run."""
    epochs: int = 25
    batch_size: int = 32
    lr_scale: float = 0.01
    rho: float = 0.95
    epsilon: float = 1e-6
    shuffle_seed: int = 1234
    clip_norm: Optional[float] = None  # global-norm clip, off when None
    patience: Optional[int] = 5  # epochs without validation improvement
    stop_below_train_mse: Optional[float] = None
    train_embeddings: bool = False
    workers: int = 1
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive when set")
        if self.lr_scale < 0:
            raise ValueError("lr_scale must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass
class EpochRecord:
    """One row of the training log."""
    epoch: int
    train_mse: float
    val_mse: float
    val_pearson: float


@dataclass
class PairPrediction:
    """Raw and calibrated score for one evaluated pair."""
    id: str
    raw: float
    calibrated: float
    gold: float


@dataclass
class EvaluationReport:
    """Correlation and error metrics over one split."""
    pearson: float
    spearman: float
    mse: float
    n: int
    predictions: List[PairPrediction] = field(default_factory=list)
