"""
SICK-style sentence pair ingestion, tokenization and train/validation/test
partitioning.
"""
import csv
import os
import re
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sts_siamese.errors import DataFormatError
from sts_siamese.types import GOLD_MAX, GOLD_MIN, DatasetSplit, SentencePair


UNASSIGNED = "unassigned"

SPLIT_FILE = "file"
SPLIT_FIRSTN = "firstn"
DEFAULT_FIRSTN = (4927, 2000, 3000)

# Accepted header spellings, matched case-insensitively.
COLUMN_ALIASES: Dict[str, Tuple[str, ...]] = {
    "id": ("pair_id", "id", "pairid"),
    "a": ("sentence_a", "sentence1", "sentence_1"),
    "b": ("sentence_b", "sentence2", "sentence_2"),
    "score": ("relatedness_score", "score", "gold", "relatedness"),
    "split": ("semeval_set", "split", "set"),
}

# SICK's official set names mapped onto our split names.
SPLIT_TAGS = {
    "train": "train",
    "trial": "validation",
    "validation": "validation",
    "dev": "validation",
    "test": "test",
}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(sentence: str) -> List[str]:
    """
    Split a sentence into word and punctuation tokens.

    Runs of word characters form one token; every other non-space
    character is a token of its own. No stemming, no lowercasing.

    Raises:
        DataFormatError: If the sentence is empty or only whitespace.
    """
    if not sentence or not sentence.strip():
        raise DataFormatError("cannot tokenize an empty sentence")
    return _TOKEN_RE.findall(sentence)


def _resolve_columns(columns: Sequence[str], path: str) -> Dict[str, Optional[str]]:
    lowered = {c.strip().lower(): c for c in columns}
    resolved: Dict[str, Optional[str]] = {}
    for role, aliases in COLUMN_ALIASES.items():
        resolved[role] = next((lowered[a] for a in aliases if a in lowered), None)
    missing = [role for role in ("id", "a", "b", "score") if resolved[role] is None]
    if missing:
        raise DataFormatError(f"missing required column(s) for {', '.join(missing)}; header is {list(columns)}", path, 1)
    return resolved


def load_sick(path: str) -> List[Tuple[SentencePair, str]]:
    """
    Load a SICK-style TSV file.

    Args:
        path: Tab-separated file with a header row. Needs pair id, sentence A,
            sentence B and relatedness score columns; an official split
            column is used when present.

    Returns:
        One (SentencePair, split tag) per data row, in file order. The tag is
        'train', 'validation', 'test', or 'unassigned'.

    Raises:
        DataFormatError: Missing column, unparseable score or score outside [1, 5].
    """
    if not os.path.exists(path):
        raise DataFormatError("data file not found", path)
    try:
        # header=None so a row wider than the header is a parse error, not an implicit index
        raw = pd.read_csv(path, sep="\t", header=None, dtype=str, quoting=csv.QUOTE_NONE,
                          keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DataFormatError("file is empty, expected a header row", path, 1)
    except pd.errors.ParserError as e:
        raise DataFormatError(f"malformed TSV: {e}", path)
    except UnicodeDecodeError as e:
        raise DataFormatError(f"not valid UTF-8: {e}", path)
    header = [str(c) for c in raw.iloc[0]]
    frame = raw.iloc[1:].set_axis(header, axis=1)
    columns = _resolve_columns(header, path)

    records: List[Tuple[SentencePair, str]] = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        line_no = offset + 2
        values = dict(zip(frame.columns, row))
        if any(not isinstance(v, str) for v in row):
            raise DataFormatError(f"expected {len(header)} tab-separated fields", path, line_no)
        raw_score = values[columns["score"]].strip()
        try:
            gold = float(raw_score)
        except ValueError:
            raise DataFormatError(f"unparseable relatedness score {raw_score!r}", path, line_no)
        if not (GOLD_MIN <= gold <= GOLD_MAX):
            raise DataFormatError(f"relatedness score {gold} outside [1, 5]", path, line_no)

        try:
            pair = SentencePair(
                id=values[columns["id"]].strip(),
                tokens_a=tokenize(values[columns["a"]]),
                tokens_b=tokenize(values[columns["b"]]),
                gold=gold,
            )
        except DataFormatError as e:
            raise DataFormatError(str(e), path, line_no)

        tag = UNASSIGNED
        if columns["split"] is not None:
            tag = SPLIT_TAGS.get(values[columns["split"]].strip().lower(), UNASSIGNED)
        records.append((pair, tag))

    return records


def has_split_column(records: List[Tuple[SentencePair, str]]) -> bool:
    return any(tag != UNASSIGNED for _, tag in records)


def partition(
    records: List[Tuple[SentencePair, str]],
    strategy: str = SPLIT_FILE,
    counts: Tuple[int, int, int] = DEFAULT_FIRSTN,
) -> DatasetSplit:
    """
    Partition loaded records into train/validation/test.

    Args:
        records: Output of load_sick.
        strategy: 'file' uses the records' own split tags; 'firstn' slices
            the first counts[0], counts[1], counts[2] records in file order.
        counts: Sizes for 'firstn'.

    Returns:
        DatasetSplit; records not placed in a split land in `unused`.

    Raises:
        DataFormatError: 'file' requested without split tags, or 'firstn'
            counts exceed the number of records.
    """
    pairs = [pair for pair, _ in records]
    if strategy == SPLIT_FIRSTN:
        n_train, n_val, n_test = counts
        if min(counts) < 0 or n_train + n_val + n_test > len(pairs):
            raise DataFormatError(f"cannot take {counts} from {len(pairs)} records")
        a, b, c = n_train, n_train + n_val, n_train + n_val + n_test
        return DatasetSplit(
            train=pairs[:a], validation=pairs[a:b], test=pairs[b:c], unused=pairs[c:], strategy=SPLIT_FIRSTN
        )

    if strategy == SPLIT_FILE:
        if not has_split_column(records):
            raise DataFormatError("file split requested but the data has no split column")
        buckets: Dict[str, List[SentencePair]] = {"train": [], "validation": [], "test": [], UNASSIGNED: []}
        for pair, tag in records:
            buckets[tag].append(pair)
        return DatasetSplit(
            train=buckets["train"],
            validation=buckets["validation"],
            test=buckets["test"],
            unused=buckets[UNASSIGNED],
            strategy=SPLIT_FILE,
        )

    raise ValueError(f"unknown split strategy {strategy!r}")


def gold_histogram(pairs: Sequence[SentencePair]) -> Tuple[int, int, int, int]:
    """Counts of gold scores in [1,2), [2,3), [3,4) and [4,5]."""
    counts, _ = np.histogram([p.gold for p in pairs], bins=[1.0, 2.0, 3.0, 4.0, 5.0])
    return tuple(int(c) for c in counts)


def load_pairs(path: str) -> List[Tuple[str, str, Optional[float]]]:
    """
    Load a pairs file for scoring: two tab-separated sentence columns and an
    optional gold score column, no header.

    Returns:
        (sentence A, sentence B, gold or None) per non-blank line.
    """
    if not os.path.exists(path):
        raise DataFormatError("pairs file not found", path)
    rows: List[Tuple[str, str, Optional[float]]] = []
    with open(path, "rb") as fh:
        for line_no, raw in enumerate(fh, start=1):
            try:
                line = raw.decode("utf-8").rstrip("\r\n")
            except UnicodeDecodeError:
                raise DataFormatError("line is not valid UTF-8", path, line_no)
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise DataFormatError(f"expected 2 or 3 tab-separated columns, got {len(fields)}", path, line_no)
            gold: Optional[float] = None
            if len(fields) == 3 and fields[2].strip():
                try:
                    gold = float(fields[2])
                except ValueError:
                    raise DataFormatError(f"unparseable gold score {fields[2]!r}", path, line_no)
            rows.append((fields[0], fields[1], gold))
    return rows
