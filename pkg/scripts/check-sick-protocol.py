#!/usr/bin/env python3
"""
Diagnostic script to check a SICK-style data file and an embedding table
before training: record counts, both split strategies, the gold-score
histogram and vocabulary coverage.
"""

import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from sts_siamese.config import load_config
from sts_siamese.corpus import DEFAULT_FIRSTN, SPLIT_FILE, SPLIT_FIRSTN, gold_histogram, has_split_column, load_sick, partition
from sts_siamese.embeddings import OovPolicy, load_embeddings


def main():
    print("🔍 SICK Protocol Diagnostic\n")
    print("=" * 70)

    # 1. Configuration
    print("\n1️⃣ CONFIGURATION CHECK")
    print("-" * 70)
    try:
        config = load_config()
        print("✅ Config loaded")
        print(f"   - STS_DATA: {config.DATA_PATH or '❌ Not set'}")
        print(f"   - STS_EMBEDDINGS: {config.EMBEDDINGS_PATH or '⚠️  Not set'}")
        print(f"   - STS_SPLIT: {config.SPLIT_STRATEGY}")
        if not config.DATA_PATH:
            print("   ❌ CRITICAL: STS_DATA not set - nothing to check!")
            return 1
    except Exception as e:
        print(f"❌ Config error: {e}")
        return 1

    # 2. Records
    print("\n2️⃣ DATA FILE")
    print("-" * 70)
    try:
        records = load_sick(config.DATA_PATH)
        print(f"✅ {len(records):,} pairs in {config.DATA_PATH}")
    except Exception as e:
        print(f"❌ Could not load data: {e}")
        return 2
    if not records:
        print("❌ No data rows after the header")
        return 2

    pairs = [pair for pair, _ in records]
    lengths = [len(p.tokens_a) for p in pairs] + [len(p.tokens_b) for p in pairs]
    print(f"   - Sentence length: min {min(lengths)}, max {max(lengths)}, mean {sum(lengths) / len(lengths):.1f} tokens")

    # 3. Splits
    print("\n3️⃣ SPLITS")
    print("-" * 70)
    if has_split_column(records):
        split = partition(records, SPLIT_FILE)
        train_n, val_n, test_n = split.sizes()
        print(f"✅ file split: train={train_n:,} validation={val_n:,} test={test_n:,} unused={len(split.unused):,}")
    else:
        print("⚠️  No split column, only the firstn strategy is available")
    try:
        split = partition(records, SPLIT_FIRSTN, DEFAULT_FIRSTN)
        train_n, val_n, test_n = split.sizes()
        print(f"✅ firstn split: train={train_n:,} validation={val_n:,} test={test_n:,} unused={len(split.unused):,}")
    except Exception as e:
        print(f"⚠️  firstn split {DEFAULT_FIRSTN} not possible: {e}")

    # 4. Gold scores
    print("\n4️⃣ GOLD SCORE HISTOGRAM")
    print("-" * 70)
    histogram = gold_histogram(pairs)
    for label, count in zip(("[1,2)", "[2,3)", "[3,4)", "[4,5]"), histogram):
        print(f"   {label}: {count:>6,}")
    print(f"   total: {sum(histogram):>6,}")

    # 5. Embedding coverage
    print("\n5️⃣ EMBEDDING COVERAGE")
    print("-" * 70)
    if not config.EMBEDDINGS_PATH:
        print("⚠️  STS_EMBEDDINGS not set, skipping")
        return 0
    try:
        table = load_embeddings(config.EMBEDDINGS_PATH, config.EMBEDDINGS_FORMAT,
                                OovPolicy(kind=config.OOV_POLICY, seed=config.OOV_SEED))
        print(f"✅ {len(table):,} vectors of width {table.dim}")
    except Exception as e:
        print(f"❌ Could not load embeddings: {e}")
        return 2

    vocabulary = {t for p in pairs for t in p.tokens_a + p.tokens_b}
    missing = sorted(t for t in vocabulary if table.resolve(t) is None)
    covered = len(vocabulary) - len(missing)
    print(f"   - Vocabulary: {len(vocabulary):,} types, {covered:,} covered ({100.0 * covered / len(vocabulary):.1f}%)")
    if missing:
        print(f"   - Out of vocabulary ({config.OOV_POLICY} policy), first few: {', '.join(missing[:10])}")

    print("\n" + "=" * 70)
    print("✅ Diagnostic complete")
    return 0


if __name__ == "__main__":
    sys.exit(main())
