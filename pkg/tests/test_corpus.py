"""
Tests for SICK ingestion, tokenization and dataset partitioning.
"""
import os

import pytest

from sts_siamese.corpus import (
    DEFAULT_FIRSTN,
    gold_histogram,
    load_pairs,
    load_sick,
    partition,
    tokenize,
)
from sts_siamese.errors import DataFormatError
from sts_siamese.types import DatasetSplit, SentencePair

from conftest import TOY_SENTENCES, toy_pairs, write_sick


class TestTokenize:

    def test_words_and_punctuation(self):
        assert tokenize("A man, a plan.") == ["A", "man", ",", "a", "plan", "."]

    def test_keeps_case_and_digits(self):
        assert tokenize("Two  kids\tplay 3 games") == ["Two", "kids", "play", "3", "games"]

    def test_contractions_split(self):
        assert tokenize("isn't") == ["isn", "'", "t"]

    @pytest.mark.parametrize("sentence", [
        "A man, a plan.",
        "Two kids aren't playing 3-on-3 soccer!",
        "Fish is being cooked ( by a woman ) ...",
    ])
    def test_idempotent(self, sentence):
        tokens = tokenize(sentence)
        assert tokenize(" ".join(tokens)) == tokens

    @pytest.mark.parametrize("blank", ["", "   ", "\t"])
    def test_blank(self, blank):
        with pytest.raises(DataFormatError):
            tokenize(blank)


class TestLoadSick:

    def test_loads_in_file_order(self, sick_file):
        records = load_sick(sick_file)
        assert len(records) == len(TOY_SENTENCES)
        pair, tag = records[0]
        assert pair.id == "1"
        assert pair.tokens_a == tokenize(TOY_SENTENCES[0][0])
        assert pair.gold == TOY_SENTENCES[0][2]
        assert tag == "train"
        assert [tag for _, tag in records[10:13]] == ["validation"] * 3

    def test_score_out_of_range(self, tmp_path):
        path = write_sick(tmp_path / "bad.tsv", [("1", "A cat .", "A dog .", 3.0, None),
                                                 ("2", "A cat .", "A dog .", 5.5, None)])
        with pytest.raises(DataFormatError) as err:
            load_sick(path)
        assert err.value.line == 3

    def test_unparseable_score(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n1\tA cat .\tA dog .\thigh\n")
        with pytest.raises(DataFormatError) as err:
            load_sick(str(path))
        assert err.value.line == 2

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("pair_ID\tsentence_A\trelatedness_score\n1\tA cat .\t3\n")
        with pytest.raises(DataFormatError):
            load_sick(str(path))

    def test_row_wider_than_header(self, tmp_path):
        path = tmp_path / "wide.tsv"
        path.write_text("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n"
                        "1\tA cat .\tA dog .\t3.0\textra\tmore\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_sick(str(path))

    def test_row_narrower_than_header(self, tmp_path):
        path = tmp_path / "narrow.tsv"
        path.write_text("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n"
                        "1\tA cat .\tA dog .\t3.0\n2\tA cat .\n", encoding="utf-8")
        with pytest.raises(DataFormatError):
            load_sick(str(path))

    def test_not_utf8(self, tmp_path):
        path = tmp_path / "latin1.tsv"
        path.write_bytes(b"pair_ID\tsentence_A\tsentence_B\trelatedness_score\n"
                         b"1\tA caf\xe9 .\tA dog .\t3.0\n")
        with pytest.raises(DataFormatError):
            load_sick(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.tsv"
        path.write_text("")
        with pytest.raises(DataFormatError) as err:
            load_sick(str(path))
        assert err.value.line == 1

    def test_header_only(self, tmp_path):
        path = tmp_path / "header.tsv"
        path.write_text("pair_ID\tsentence_A\tsentence_B\trelatedness_score\n")
        assert load_sick(str(path)) == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_sick(str(tmp_path / "nothing.tsv"))


class TestPartition:

    def test_file_split(self, sick_file):
        split = partition(load_sick(sick_file), "file")
        assert split.sizes() == (10, 3, 3)
        assert split.strategy == "file"

    def test_firstn_split(self, sick_file):
        split = partition(load_sick(sick_file), "firstn", counts=(8, 4, 2))
        assert split.sizes() == (8, 4, 2)
        assert [p.id for p in split.unused] == ["15", "16"]
        assert split.train[0].id == "1" and split.validation[0].id == "9"

    def test_firstn_too_many(self, sick_file):
        with pytest.raises(DataFormatError):
            partition(load_sick(sick_file), "firstn")

    def test_file_split_needs_column(self, tmp_path):
        path = write_sick(tmp_path / "nosplit.tsv", [("1", "A cat .", "A dog .", 3.0, None)])
        with pytest.raises(DataFormatError):
            partition(load_sick(path), "file")

    def test_splits_are_disjoint(self):
        pairs = toy_pairs()
        with pytest.raises(DataFormatError):
            DatasetSplit(train=pairs[:3], validation=pairs[2:4], test=[])


def test_gold_histogram_bins():
    pairs = [
        SentencePair(str(i), ["a"], ["b"], gold)
        for i, gold in enumerate([1.0, 1.99, 2.0, 3.5, 3.99, 4.0, 5.0])
    ]
    assert gold_histogram(pairs) == (2, 1, 2, 2)


def test_load_pairs(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_text("A woman is cooking fish.\tFish is being cooked by a woman.\t4.5\n\n"
                    "The girl sings.\tA girl is singing.\n", encoding="utf-8")
    assert load_pairs(str(path)) == [
        ("A woman is cooking fish.", "Fish is being cooked by a woman.", 4.5),
        ("The girl sings.", "A girl is singing.", None),
    ]


def test_load_pairs_empty(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("")
    assert load_pairs(str(path)) == []


def test_load_pairs_not_utf8(tmp_path):
    path = tmp_path / "pairs.tsv"
    path.write_bytes(b"The girl sings.\tA girl is singing.\n\xff\xfe\tx\n")
    with pytest.raises(DataFormatError) as err:
        load_pairs(str(path))
    assert err.value.line == 2


@pytest.mark.skipif(not os.getenv("STS_SICK_PATH"), reason="STS_SICK_PATH not set")
class TestFullSick:

    @pytest.fixture(scope="class")
    def records(self):
        return load_sick(os.environ["STS_SICK_PATH"])

    def test_pair_count(self, records):
        assert len(records) == 9927

    def test_firstn_sizes(self, records):
        assert partition(records, "firstn").sizes() == DEFAULT_FIRSTN

    def test_gold_histogram(self, records):
        assert gold_histogram([pair for pair, _ in records]) == (923, 1373, 3872, 3672)
