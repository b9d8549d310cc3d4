"""
Siamese CNN+LSTM pair model.

Both sentences go through the same filter bank and the same LSTM: each
word becomes we_i (+) lc_i, the LSTM's last hidden state is the sentence
embedding, and the pair score is exp(-||se_A - se_B||_1), in (0, 1].

With d = 0 there is no filter bank and the LSTM reads we_i alone: the
plain Siamese LSTM.
"""
import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from sts_siamese.context_cnn import (
    ContextFilterBank,
    LocalContextSequence,
    local_contexts,
    local_contexts_backward,
)
from sts_siamese.embeddings import EmbeddingTable
from sts_siamese.errors import CheckpointError, ShapeMismatchError
from sts_siamese.lstm import LstmParameters, LstmTrace, encode_backward, encode_forward
from sts_siamese.types import SentencePair


CHECKPOINT_MAGIC = b"CSIM"
CHECKPOINT_VERSION = 1

# Payload order of the checkpoint.
PARAMETER_ORDER = (
    "W", "b",
    "W_i", "U_i", "b_i",
    "W_f", "U_f", "b_f",
    "W_o", "U_o", "b_o",
    "W_c", "U_c", "b_c",
)


@dataclass(frozen=True)
class ModelHyperparameters:
    """Shape and seed of a model; k is the embedding width, d the filter count."""
    k: int
    d: int
    l: int
    H: int
    seed: int

    @property
    def m(self) -> int:
        return self.k + self.d


@dataclass
class SiameseModel:
    """One filter bank (none when d = 0) and one LSTM, used by both branches."""
    bank: Optional[ContextFilterBank]
    lstm: LstmParameters
    hyper: ModelHyperparameters
    embedding_id: str = "memory"

    def __post_init__(self) -> None:
        hp = self.hyper
        if self.bank is None:
            if hp.d != 0:
                raise ShapeMismatchError(f"d={hp.d} filters recorded but the model has no filter bank")
        elif self.bank.in_dim != hp.k or self.bank.n_filters != hp.d or self.bank.window != hp.l:
            raise ShapeMismatchError("filter bank does not match the recorded hyperparameters")
        if self.lstm.input_dim != hp.m or self.lstm.hidden_dim != hp.H:
            raise ShapeMismatchError(f"LSTM input width {self.lstm.input_dim} != k + d = {hp.m}")

    @classmethod
    def initialize(
        cls,
        k: int,
        d: int,
        l: int,
        H: int,
        seed: int,
        embedding_id: str = "memory",
        init_stddev: float = 0.05,
        forget_bias: float = 2.5,
    ) -> 'SiameseModel':
        if d < 0:
            raise ValueError(f"filter count must be non-negative, got {d}")
        if d == 0:
            # the window is meaningless without a filter bank
            bank, l = None, 1
        else:
            bank = ContextFilterBank.initialize(l, k, d, init_stddev, seed)
        lstm = LstmParameters.initialize(k + d, H, init_stddev, seed + 1, forget_bias)
        return cls(bank=bank, lstm=lstm, hyper=ModelHyperparameters(k, d, l, H, seed), embedding_id=embedding_id)

    @property
    def has_local_context(self) -> bool:
        return self.bank is not None

    def parameters(self) -> Dict[str, np.ndarray]:
        """Live references to every trainable array, in checkpoint order."""
        params = {"W": self.bank.W, "b": self.bank.b} if self.bank is not None else {}
        params.update(self.lstm.arrays())
        return params

    def copy(self) -> 'SiameseModel':
        arrays = {name: array.copy() for name, array in self.parameters().items()}
        return SiameseModel.from_arrays(self.hyper, arrays, self.embedding_id)

    @classmethod
    def from_arrays(cls, hyper: ModelHyperparameters, arrays: Dict[str, np.ndarray],
                    embedding_id: str = "memory") -> 'SiameseModel':
        bank = None
        if hyper.d > 0:
            bank = ContextFilterBank(window=hyper.l, in_dim=hyper.k, n_filters=hyper.d, W=arrays["W"], b=arrays["b"])
        lstm = LstmParameters(**{name: arrays[name] for name in PARAMETER_ORDER[2:]})
        return cls(bank=bank, lstm=lstm, hyper=hyper, embedding_id=embedding_id)


@dataclass
class BranchTrace:
    """Forward activations of one sentence."""
    tokens: List[str]
    embedded: np.ndarray
    contexts: Optional[LocalContextSequence]  # None without a filter bank
    lstm: LstmTrace

    @property
    def sentence_embedding(self) -> np.ndarray:
        return self.lstm.h_n


def encode_sentence(model: SiameseModel, tokens: List[str], table: EmbeddingTable) -> BranchTrace:
    """Embed, add local contexts, and run the LSTM over one sentence."""
    if not tokens:
        raise ShapeMismatchError("cannot encode an empty sentence")
    if table.dim != model.hyper.k:
        raise ShapeMismatchError(f"embedding width {table.dim} does not match model k={model.hyper.k}")
    embedded = table.embed(tokens)
    if model.bank is None:
        return BranchTrace(tokens=list(tokens), embedded=embedded, contexts=None,
                           lstm=encode_forward(model.lstm, embedded))
    contexts = local_contexts(embedded, model.bank)
    fused = np.hstack([embedded, contexts.values])
    return BranchTrace(tokens=list(tokens), embedded=embedded, contexts=contexts, lstm=encode_forward(model.lstm, fused))


def manhattan_similarity(se_a: np.ndarray, se_b: np.ndarray) -> float:
    """exp(-sum |se_a - se_b|)."""
    return float(np.exp(-np.sum(np.abs(se_a - se_b))))


def score_raw(model: SiameseModel, tokens_a: List[str], tokens_b: List[str], table: EmbeddingTable) -> float:
    """
    Similarity of two token sequences in (0, 1].

    Identical sequences score exactly 1.0 and score(a, b) == score(b, a).
    """
    se_a = encode_sentence(model, tokens_a, table).sentence_embedding
    se_b = encode_sentence(model, tokens_b, table).sentence_embedding
    return manhattan_similarity(se_a, se_b)


@dataclass
class PairLoss:
    """Squared error of one pair and its gradients."""
    loss: float
    score: float
    grads: Dict[str, np.ndarray]
    # token -> gradient of its embedding row; filled only when requested
    embedding_grads: Optional[Dict[str, np.ndarray]] = None


def _branch_backward(
    model: SiameseModel,
    trace: BranchTrace,
    d_se: np.ndarray,
    grads: Dict[str, np.ndarray],
) -> np.ndarray:
    """Accumulate one branch's parameter gradients into `grads`; return d(embedded)."""
    lstm_grads, d_fused = encode_backward(model.lstm, trace.lstm, d_se)
    for name, g in lstm_grads.items():
        grads[name] += g
    k = model.hyper.k
    if model.bank is None:
        return d_fused[:, :k]
    ctx = local_contexts_backward(trace.contexts, model.bank, d_fused[:, k:])
    grads["W"] += ctx.W
    grads["b"] += ctx.b
    return d_fused[:, :k] + ctx.embedded


def pair_loss(
    model: SiameseModel,
    pair: SentencePair,
    table: EmbeddingTable,
    with_embedding_grads: bool = False,
) -> PairLoss:
    """
    Squared error (score_raw - (gold - 1) / 4)^2 and its gradients.

    Gradients of both branches are summed into the shared parameters. The
    L1 subgradient at exact ties is 0.

    Args:
        model: Model to differentiate.
        pair: Sentence pair with gold score.
        table: Embeddings (not modified).
        with_embedding_grads: Also return per-token embedding gradients.
    """
    trace_a = encode_sentence(model, pair.tokens_a, table)
    trace_b = encode_sentence(model, pair.tokens_b, table)
    diff = trace_a.sentence_embedding - trace_b.sentence_embedding
    score = float(np.exp(-np.sum(np.abs(diff))))
    error = score - pair.target
    loss = error * error

    # dL/d(se_A) = 2 e * (-score) * sign(diff); d(se_B) is its negation
    d_se_a = -2.0 * error * score * np.sign(diff)
    grads = {name: np.zeros_like(array) for name, array in model.parameters().items()}
    d_emb_a = _branch_backward(model, trace_a, d_se_a, grads)
    d_emb_b = _branch_backward(model, trace_b, -d_se_a, grads)

    embedding_grads = None
    if with_embedding_grads:
        embedding_grads = {}
        for tokens, d_emb in ((trace_a.tokens, d_emb_a), (trace_b.tokens, d_emb_b)):
            for token, g in zip(tokens, d_emb):
                key = table.resolve(token) or token
                if key in embedding_grads:
                    embedding_grads[key] = embedding_grads[key] + g
                else:
                    embedding_grads[key] = g.copy()

    return PairLoss(loss=loss, score=score, grads=grads, embedding_grads=embedding_grads)


def _header_text(model: SiameseModel) -> str:
    hp = model.hyper
    fields = [("k", hp.k), ("d", hp.d), ("l", hp.l), ("H", hp.H), ("seed", hp.seed), ("embedding", model.embedding_id)]
    return "".join(f"{key}={value}\n" for key, value in fields)


def _expected_shapes(hyper: ModelHyperparameters) -> Dict[str, Tuple[int, ...]]:
    shapes: Dict[str, Tuple[int, ...]] = {}
    if hyper.d > 0:
        shapes["W"] = (hyper.d, hyper.l * hyper.k)
        shapes["b"] = (hyper.d,)
    for gate in ("i", "f", "o", "c"):
        shapes[f"W_{gate}"] = (hyper.H, hyper.m)
        shapes[f"U_{gate}"] = (hyper.H, hyper.H)
        shapes[f"b_{gate}"] = (hyper.H,)
    return shapes


def save_checkpoint(model: SiameseModel, path: str) -> None:
    """
    Write a model checkpoint.

    Layout: b"CSIM", u32 LE version, u32 LE header length, UTF-8 header of
    `key=value` lines (k, d, l, H, seed, embedding), then every parameter as
    float64 LE in PARAMETER_ORDER. W and b are absent when d = 0.
    """
    if "\n" in model.embedding_id or "=" in model.embedding_id:
        raise CheckpointError(f"embedding identifier {model.embedding_id!r} cannot be stored")
    header = _header_text(model).encode("utf-8")
    params = model.parameters()
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for name in PARAMETER_ORDER:
            if name not in params:
                continue
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    os.replace(tmp_path, path)


def _parse_header(text: str, path: str) -> Tuple[ModelHyperparameters, str]:
    values: Dict[str, str] = {}
    for line in text.splitlines():
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"malformed header line {line!r}", path)
        values[key] = value
    try:
        hyper = ModelHyperparameters(
            k=int(values["k"]), d=int(values["d"]), l=int(values["l"]), H=int(values["H"]), seed=int(values["seed"])
        )
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"incomplete header: {e}", path)
    if min(hyper.k, hyper.l, hyper.H) < 1 or hyper.d < 0:
        raise CheckpointError("header declares a non-positive dimension", path)
    return hyper, values.get("embedding", "")


def read_checkpoint_header(path: str) -> Tuple[ModelHyperparameters, str]:
    """Hyperparameters and embedding identifier of a checkpoint, without the payload."""
    with open(path, "rb") as fh:
        prefix = fh.read(12)
        if len(prefix) < 12:
            raise CheckpointError("truncated checkpoint header", path)
        _check_prefix(prefix, path)
        (length,) = struct.unpack("<I", prefix[8:12])
        raw = fh.read(length)
    if len(raw) != length:
        raise CheckpointError("truncated checkpoint header", path)
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError("checkpoint header is not UTF-8", path)
    return _parse_header(text, path)


def _check_prefix(prefix: bytes, path: str) -> None:
    if prefix[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"bad magic {prefix[:4]!r}, expected {CHECKPOINT_MAGIC!r}", path)
    (version,) = struct.unpack("<I", prefix[4:8])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}", path)


def load_checkpoint(path: str) -> SiameseModel:
    """
    Read a checkpoint written by save_checkpoint.

    Raises:
        CheckpointError: Bad magic, unsupported version, truncated data, or a
            payload whose length disagrees with the header dimensions.
    """
    if not os.path.exists(path):
        raise CheckpointError("checkpoint not found", path)
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 12:
        raise CheckpointError("truncated checkpoint header", path)
    _check_prefix(data[:12], path)
    (length,) = struct.unpack("<I", data[8:12])
    header_end = 12 + length
    if header_end > len(data):
        raise CheckpointError("truncated checkpoint header", path)
    try:
        header = data[12:header_end].decode("utf-8")
    except UnicodeDecodeError:
        raise CheckpointError("checkpoint header is not UTF-8", path)
    hyper, embedding_id = _parse_header(header, path)

    shapes = _expected_shapes(hyper)
    expected = 8 * sum(int(np.prod(s)) for s in shapes.values())
    payload = data[header_end:]
    if len(payload) != expected:
        raise CheckpointError(
            f"payload has {len(payload)} bytes but the header dimensions need {expected}", path
        )

    arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for name in PARAMETER_ORDER:
        if name not in shapes:
            continue
        shape = shapes[name]
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).astype(np.float64).reshape(shape)
        offset += 8 * count
    try:
        return SiameseModel.from_arrays(hyper, arrays, embedding_id or "memory")
    except ValueError as e:
        raise CheckpointError(str(e), path)
