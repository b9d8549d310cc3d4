"""
Shared toy data for the test suite.
"""
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from sts_siamese.corpus import tokenize
from sts_siamese.embeddings import EmbeddingTable, OovPolicy
from sts_siamese.types import DatasetSplit, SentencePair


TOY_SENTENCES = [
    ("A man is playing a guitar .", "A man is playing an instrument .", 4.6),
    ("A woman is cooking fish .", "Fish is being cooked by a woman .", 4.9),
    ("A dog is running in the park .", "A cat is sleeping on the sofa .", 1.4),
    ("Two kids are playing soccer .", "Children are playing football .", 4.2),
    ("A man is slicing an onion .", "A woman is riding a horse .", 1.1),
    ("The girl is singing .", "A girl sings a song .", 4.4),
    ("A plane is taking off .", "A man is eating pasta .", 1.0),
    ("Someone is peeling a potato .", "A person is peeling a potato .", 4.8),
    ("A boy is jumping into the pool .", "A boy is swimming .", 3.5),
    ("The woman is dancing .", "The man is reading a book .", 1.6),
    ("A man is cutting bread .", "A man is slicing bread .", 4.7),
    ("A cat is playing with a toy .", "A dog is playing with a ball .", 3.0),
    ("People are walking on the beach .", "A group is walking by the sea .", 4.0),
    ("A woman is writing .", "A woman is typing on a laptop .", 3.2),
    ("The baby is crying .", "A horse is jumping a fence .", 1.2),
    ("A chef is chopping vegetables .", "Vegetables are being chopped by a chef .", 4.9),
]


def toy_vocabulary() -> List[str]:
    words = []
    for a, b, _ in TOY_SENTENCES:
        for token in tokenize(a) + tokenize(b):
            if token not in words:
                words.append(token)
    return words


def random_table(words: Sequence[str], dim: int, seed: int = 0, stddev: float = 1.0,
                 oov_policy: Optional[OovPolicy] = None) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    return EmbeddingTable(list(words), rng.normal(0.0, stddev, size=(len(words), dim)),
                          oov_policy=oov_policy, identifier=f"random-{dim}-{seed}")


def toy_pairs(prefix: str = "p") -> List[SentencePair]:
    return [
        SentencePair(id=f"{prefix}{i:02d}", tokens_a=tokenize(a), tokens_b=tokenize(b), gold=gold)
        for i, (a, b, gold) in enumerate(TOY_SENTENCES)
    ]


def toy_dataset() -> DatasetSplit:
    pairs = toy_pairs()
    return DatasetSplit(train=pairs[:10], validation=pairs[10:13], test=pairs[13:], strategy="firstn")


def write_sick(path, rows: Sequence[Tuple[str, str, str, float, Optional[str]]]) -> str:
    """rows: (pair_id, sentence_A, sentence_B, score, split or None)."""
    with_split = any(r[4] is not None for r in rows)
    header = ["pair_ID", "sentence_A", "sentence_B", "relatedness_score"]
    if with_split:
        header.append("SemEval_set")
    lines = ["\t".join(header)]
    for pair_id, a, b, score, split in rows:
        fields = [pair_id, a, b, repr(float(score))]
        if with_split:
            fields.append(split or "")
        lines.append("\t".join(fields))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return str(path)


@pytest.fixture
def vocabulary() -> List[str]:
    return toy_vocabulary()


@pytest.fixture
def table(vocabulary) -> EmbeddingTable:
    return random_table(vocabulary, dim=6, seed=3)


@pytest.fixture
def dataset() -> DatasetSplit:
    return toy_dataset()


@pytest.fixture
def sick_file(tmp_path) -> str:
    splits = ["TRAIN"] * 10 + ["TRIAL"] * 3 + ["TEST"] * 3
    rows = [(str(i + 1), a, b, gold, splits[i]) for i, (a, b, gold) in enumerate(TOY_SENTENCES)]
    return write_sick(tmp_path / "toy_sick.tsv", rows)
