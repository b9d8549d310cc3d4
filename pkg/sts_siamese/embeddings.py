"""
Pre-trained word embeddings in the two word2vec interchange formats.

Text format: a header line `<vocab_count> <dim>` then one line per word,
the token followed by `dim` decimal floats, space-separated, UTF-8.

Binary format: the same ASCII header line, then per entry the token bytes
terminated by a single space and `dim` little-endian float32 values; entries
may be separated by a newline.

Vectors are held as float64; float32 only exists at the binary file
boundary.
"""
import hashlib
import os
import threading
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from sts_siamese.errors import DataFormatError


SNIFF_BYTES = 1 << 16

OOV_ZERO = "zero"
OOV_HASHED = "hashed"
OOV_STDDEV = 0.1  # variance 0.01


@dataclass(frozen=True)
class OovPolicy:
    """How vectors are produced for tokens missing from the table."""
    kind: str = OOV_HASHED
    seed: int = 7

    def __post_init__(self) -> None:
        if self.kind not in (OOV_ZERO, OOV_HASHED):
            raise ValueError(f"unknown OOV policy {self.kind!r}")

    @classmethod
    def zero(cls) -> 'OovPolicy':
        return cls(kind=OOV_ZERO)

    @classmethod
    def hashed(cls, seed: int = 7) -> 'OovPolicy':
        return cls(kind=OOV_HASHED, seed=seed)


def _stable_token_seed(token: str, seed: int) -> int:
    digest = hashlib.blake2b(f"{seed}\x00{token}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class EmbeddingTable:
    """
    Immutable map from token to a `dim`-dimensional float64 vector.

    Lookups try the exact token first, then its lowercase form, then fall
    back to the OOV policy. Safe for concurrent reads.
    """

    def __init__(
        self,
        tokens: List[str],
        vectors: np.ndarray,
        oov_policy: Optional[OovPolicy] = None,
        identifier: str = "memory",
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(tokens):
            raise DataFormatError(
                f"embedding matrix shape {vectors.shape} does not match {len(tokens)} tokens"
            )
        if vectors.shape[1] < 1:
            raise DataFormatError("embedding dimension must be positive")
        if not np.all(np.isfinite(vectors)):
            raise DataFormatError("embedding table contains non-finite values")

        index: Dict[str, int] = {}
        for row, token in enumerate(tokens):
            if token in index:
                raise DataFormatError(f"duplicate token {token!r}")
            index[token] = row

        self.dim: int = int(vectors.shape[1])
        self.oov_policy: OovPolicy = oov_policy or OovPolicy()
        self.identifier = identifier
        self._tokens = list(tokens)
        self._index = index
        self._vectors = vectors.copy()
        self._vectors.setflags(write=False)
        self._oov_cache: Dict[str, np.ndarray] = {}
        self._oov_lock = threading.Lock()

    @classmethod
    def from_vectors(
        cls,
        entries: Mapping[str, Iterable[float]],
        oov_policy: Optional[OovPolicy] = None,
        identifier: str = "memory",
    ) -> 'EmbeddingTable':
        """Build a table from a token -> vector mapping."""
        tokens = list(entries)
        if not tokens:
            raise DataFormatError("cannot build an empty embedding table")
        vectors = np.array([np.asarray(list(entries[t]), dtype=np.float64) for t in tokens])
        return cls(tokens, vectors, oov_policy=oov_policy, identifier=identifier)

    def __getstate__(self) -> dict:
        # the lock cannot cross a process boundary
        state = self.__dict__.copy()
        del state["_oov_lock"]
        return state

    def __setstate__(self, state: dict) -> None:
        self.__dict__.update(state)
        self._oov_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    @property
    def tokens(self) -> List[str]:
        return list(self._tokens)

    @property
    def vectors(self) -> np.ndarray:
        """Read-only (vocab, dim) matrix in token order."""
        return self._vectors

    def resolve(self, token: str) -> Optional[str]:
        """Return the stored key a token maps to, or None if it is out of vocabulary."""
        if token in self._index:
            return token
        lowered = token.lower()
        if lowered in self._index:
            return lowered
        return None

    def lookup(self, token: str) -> np.ndarray:
        """
        Vector for a token; never fails.

        Args:
            token: Surface form as produced by the tokenizer.

        Returns:
            Read-only float64 vector of length `dim`.
        """
        key = self.resolve(token)
        if key is not None:
            return self._vectors[self._index[key]]
        return self._oov_vector(token)

    def _oov_vector(self, token: str) -> np.ndarray:
        with self._oov_lock:
            cached = self._oov_cache.get(token)
        if cached is not None:
            return cached

        if self.oov_policy.kind == OOV_ZERO:
            vector = np.zeros(self.dim)
        else:
            rng = np.random.default_rng(_stable_token_seed(token, self.oov_policy.seed))
            vector = rng.normal(0.0, OOV_STDDEV, size=self.dim)
        vector.setflags(write=False)

        with self._oov_lock:
            self._oov_cache.setdefault(token, vector)
            return self._oov_cache[token]

    def embed(self, tokens: List[str]) -> np.ndarray:
        """Stack the vectors of a token sequence into an (n, dim) matrix."""
        return np.array([self.lookup(t) for t in tokens], dtype=np.float64).reshape(len(tokens), self.dim)

    def with_updates(self, updates: Mapping[str, np.ndarray], identifier: Optional[str] = None) -> 'EmbeddingTable':
        """
        New table with some rows replaced or added; this table is unchanged.

        Args:
            updates: token -> replacement vector. Unknown tokens are appended.
            identifier: Identifier of the new table (defaults to this one's).

        Returns:
            EmbeddingTable sharing this table's OOV policy.
        """
        vectors = self._vectors.copy()
        tokens = list(self._tokens)
        extra_tokens: List[str] = []
        extra_rows: List[np.ndarray] = []
        for token, vector in updates.items():
            vector = np.asarray(vector, dtype=np.float64)
            if vector.shape != (self.dim,):
                raise DataFormatError(f"update for {token!r} has shape {vector.shape}, expected ({self.dim},)")
            row = self._index.get(token)
            if row is None:
                extra_tokens.append(token)
                extra_rows.append(vector)
            else:
                vectors[row] = vector
        if extra_rows:
            vectors = np.vstack([vectors, np.array(extra_rows)])
            tokens.extend(extra_tokens)
        return EmbeddingTable(tokens, vectors, self.oov_policy, identifier or self.identifier)

    def checksum(self) -> str:
        """SHA-256 over tokens and float64 payload, in table order."""
        digest = hashlib.sha256()
        digest.update(str(self.dim).encode("ascii"))
        for token in self._tokens:
            digest.update(token.encode("utf-8"))
            digest.update(b"\x00")
        digest.update(self._vectors.astype("<f8").tobytes())
        return digest.hexdigest()


def _parse_header(line: bytes, path: str) -> Tuple[int, int]:
    try:
        parts = line.decode("ascii").split()
        count, dim = int(parts[0]), int(parts[1])
        if len(parts) != 2:
            raise ValueError
    except (UnicodeDecodeError, ValueError, IndexError):
        raise DataFormatError(f"malformed header {line[:80]!r}, expected '<vocab_count> <dim>'", path, 1)
    if count < 1 or dim < 1:
        raise DataFormatError(f"header declares {count} entries of width {dim}", path, 1)
    return count, dim


def load_text(path: str, oov_policy: Optional[OovPolicy] = None) -> EmbeddingTable:
    """
    Load embeddings from the word2vec text format.

    Raises:
        DataFormatError: Malformed header, wrong component count, non-finite
            value, duplicate token or an entry count that disagrees with the
            header. Messages carry the 1-based line number.
    """
    with open(path, "rb") as fh:
        count, dim = _parse_header(fh.readline(), path)
        tokens: List[str] = []
        rows: List[List[float]] = []
        seen: Dict[str, int] = {}
        for line_no, raw in enumerate(fh, start=2):
            try:
                text = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError:
                raise DataFormatError("row is not valid UTF-8", path, line_no)
            if not text.strip():
                continue
            parts = text.split(" ")
            token, fields = parts[0], [p for p in parts[1:] if p]
            if len(fields) != dim:
                raise DataFormatError(f"row has {len(fields)} of {dim} components", path, line_no)
            try:
                values = [float(f) for f in fields]
            except ValueError:
                raise DataFormatError(f"row for {token!r} has a non-numeric component", path, line_no)
            if not all(np.isfinite(values)):
                raise DataFormatError(f"row for {token!r} has a non-finite component", path, line_no)
            if token in seen:
                raise DataFormatError(f"duplicate token {token!r} (first seen on line {seen[token]})", path, line_no)
            seen[token] = line_no
            tokens.append(token)
            rows.append(values)

    if len(tokens) != count:
        raise DataFormatError(f"header declares {count} entries but file contains {len(tokens)}", path)
    return EmbeddingTable(tokens, np.array(rows, dtype=np.float64), oov_policy, os.path.basename(path))


def save_text(table: EmbeddingTable, path: str) -> None:
    """Write the text format; repr() keeps every float64 exactly."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for token, row in zip(table.tokens, table.vectors):
            _check_writable_token(token)
            fh.write(token + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_binary(path: str, oov_policy: Optional[OovPolicy] = None) -> EmbeddingTable:
    """
    Load embeddings from the word2vec binary format.

    Raises:
        DataFormatError: Malformed header, truncated entry, non-finite value,
            duplicate token, or bytes left over after the declared entries.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    header_end = data.find(b"\n")
    if header_end < 0:
        raise DataFormatError("missing header line", path, 1)
    count, dim = _parse_header(data[:header_end], path)
    width = 4 * dim
    pos = header_end + 1

    tokens: List[str] = []
    vectors = np.empty((count, dim), dtype=np.float64)
    seen = set()
    for entry in range(count):
        while pos < len(data) and data[pos:pos + 1] == b"\n":
            pos += 1
        space = data.find(b" ", pos)
        if space < 0 or space == pos:
            raise DataFormatError(f"truncated file: entry {entry + 1} of {count} has no token", path)
        try:
            token = data[pos:space].decode("utf-8")
        except UnicodeDecodeError:
            raise DataFormatError(f"entry {entry + 1} token is not valid UTF-8", path)
        start = space + 1
        if start + width > len(data):
            raise DataFormatError(f"truncated file: entry {entry + 1} of {count} ({token!r}) is incomplete", path)
        row = np.frombuffer(data, dtype="<f4", count=dim, offset=start).astype(np.float64)
        if not np.all(np.isfinite(row)):
            raise DataFormatError(f"entry {token!r} has a non-finite component", path)
        if token in seen:
            raise DataFormatError(f"duplicate token {token!r}", path)
        seen.add(token)
        tokens.append(token)
        vectors[entry] = row
        pos = start + width

    if data[pos:].strip(b"\n"):
        raise DataFormatError(f"header declares {count} entries but more data follows", path)
    return EmbeddingTable(tokens, vectors, oov_policy, os.path.basename(path))


def save_binary(table: EmbeddingTable, path: str) -> None:
    """Write the binary format with float32 payload."""
    with open(path, "wb") as fh:
        fh.write(f"{len(table)} {table.dim}\n".encode("ascii"))
        for token, row in zip(table.tokens, table.vectors):
            _check_writable_token(token)
            fh.write(token.encode("utf-8") + b" ")
            fh.write(row.astype("<f4").tobytes())
            fh.write(b"\n")


def _check_writable_token(token: str) -> None:
    if not token or any(ch.isspace() for ch in token):
        raise DataFormatError(f"token {token!r} cannot be written: empty or contains whitespace")


def sniff_format(path: str) -> str:
    """
    Guess 'text' or 'binary' from the first entry after the header.

    The first entry is text when it decodes as UTF-8 and splits into a
    token followed by exactly `dim` decimal numbers.
    """
    with open(path, "rb") as fh:
        _, dim = _parse_header(fh.readline(), path)
        sample = fh.read(SNIFF_BYTES)
    first = sample.split(b"\n", 1)[0]
    try:
        fields = first.decode("utf-8").split()
        if len(fields) == dim + 1:
            [float(f) for f in fields[1:]]
            return "text"
    except (UnicodeDecodeError, ValueError):
        pass
    return "binary"


def load_embeddings(path: str, fmt: str = "auto", oov_policy: Optional[OovPolicy] = None) -> EmbeddingTable:
    """
    Load an embedding file in either format.

    Args:
        path: Embedding file.
        fmt: 'text', 'binary' or 'auto' (sniffed).
        oov_policy: Policy for unknown tokens.
    """
    if not os.path.exists(path):
        raise DataFormatError("embedding file not found", path)
    if fmt == "auto":
        fmt = sniff_format(path)
    if fmt == "text":
        return load_text(path, oov_policy)
    if fmt == "binary":
        return load_binary(path, oov_policy)
    raise ValueError(f"unknown embedding format {fmt!r}")


class EmbeddingOverlay:
    """
    Mutable per-token overrides on top of an immutable table.

    Used while fine-tuning embeddings: the trainer edits `overrides` in place
    and the base table is never touched. `materialize()` folds the overrides
    into a new EmbeddingTable.
    """

    def __init__(self, base: EmbeddingTable):
        self.base = base
        self.dim = base.dim
        self.identifier = base.identifier
        self.oov_policy = base.oov_policy
        self.overrides: Dict[str, np.ndarray] = {}

    def resolve(self, token: str) -> Optional[str]:
        if token in self.overrides:
            return token
        return self.base.resolve(token)

    def lookup(self, token: str) -> np.ndarray:
        key = self.resolve(token) or token
        override = self.overrides.get(key)
        if override is not None:
            return override
        return self.base.lookup(token)

    def embed(self, tokens: List[str]) -> np.ndarray:
        return np.array([self.lookup(t) for t in tokens], dtype=np.float64).reshape(len(tokens), self.dim)

    def row(self, key: str) -> np.ndarray:
        """Writable override row for `key`, created from the base vector on first use."""
        if key not in self.overrides:
            self.overrides[key] = np.array(self.base.lookup(key), dtype=np.float64)
        return self.overrides[key]

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {key: vector.copy() for key, vector in self.overrides.items()}

    def materialize(self, overrides: Optional[Mapping[str, np.ndarray]] = None) -> EmbeddingTable:
        chosen = self.overrides if overrides is None else overrides
        return self.base.with_updates(chosen, identifier=f"{self.base.identifier}+tuned")
