#!/usr/bin/env python3
"""Learn a byte-pair-encoding merge table from a text corpus.

Produces the merge table consumed by mprbench.captions.bpe (optionally
gzipped) and, when asked, a vocab.json/merges.txt pair in the layout the
common tokenizer libraries expect, with identical token ids.

Usage:
    python tools/build_bpe_vocab.py --corpus tools/seed_corpus.txt \
        --merges-out src/mprbench/captions/data/bpe_merges.txt.gz \
        [--vocab-json-out vocab.json --merges-txt-out merges.txt] \
        [--max-merges 16384 --min-frequency 2]
"""

from __future__ import annotations

import argparse
import gzip
import heapq
import json
import sys
from collections import Counter, defaultdict
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from mprbench.captions.bpe import _WORD_PATTERN, END_TOKEN, START_TOKEN, bytes_to_unicode, clean_text


def word_frequencies(corpus: str) -> Counter:
    byte_encoder = bytes_to_unicode()
    counts: Counter = Counter()
    for token in _WORD_PATTERN.findall(clean_text(corpus)):
        mapped = "".join(byte_encoder[b] for b in token.encode("utf-8"))
        counts[mapped] += 1
    return counts


def learn_merges(word_freqs: Counter, max_merges: int, min_frequency: int) -> list[tuple[str, str]]:
    """Greedy pair merging; ties break toward the lexicographically smaller pair."""
    words: list[list[str]] = []
    freqs: list[int] = []
    for token, freq in word_freqs.items():
        words.append(list(token[:-1]) + [token[-1] + "</w>"])
        freqs.append(freq)

    pair_counts: dict[tuple[str, str], int] = defaultdict(int)
    pair_words: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, word in enumerate(words):
        for pair in zip(word, word[1:]):
            pair_counts[pair] += freqs[wi]
            pair_words[pair].add(wi)

    # lazy max-heap: stale entries are skipped when their count no longer matches
    heap: list[tuple[int, tuple[str, str]]] = [(-c, p) for p, c in pair_counts.items()]
    heapq.heapify(heap)

    merges: list[tuple[str, str]] = []
    while len(merges) < max_merges and heap:
        neg, best = heapq.heappop(heap)
        if pair_counts.get(best, 0) != -neg:
            continue
        if -neg < min_frequency:
            break
        merges.append(best)
        joined = best[0] + best[1]

        for wi in list(pair_words[best]):
            word, f = words[wi], freqs[wi]
            for pair in zip(word, word[1:]):
                pair_counts[pair] -= f
                pair_words[pair].discard(wi)
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                else:
                    heapq.heappush(heap, (-pair_counts[pair], pair))
            merged: list[str] = []
            i = 0
            while i < len(word):
                if i < len(word) - 1 and word[i] == best[0] and word[i + 1] == best[1]:
                    merged.append(joined)
                    i += 2
                else:
                    merged.append(word[i])
                    i += 1
            words[wi] = merged
            for pair in zip(merged, merged[1:]):
                pair_counts[pair] += f
                pair_words[pair].add(wi)
                heapq.heappush(heap, (-pair_counts[pair], pair))

    return merges


def full_vocab(merges: list[tuple[str, str]]) -> dict[str, int]:
    byte_symbols = list(bytes_to_unicode().values())
    tokens = byte_symbols + [s + "</w>" for s in byte_symbols]
    tokens += ["".join(pair) for pair in merges]
    tokens += [START_TOKEN, END_TOKEN]
    return {tok: i for i, tok in enumerate(tokens)}


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True, type=Path)
    parser.add_argument("--merges-out", required=True, type=Path, help=".txt or .txt.gz merge table")
    parser.add_argument("--vocab-json-out", type=Path, default=None)
    parser.add_argument("--merges-txt-out", type=Path, default=None)
    parser.add_argument("--max-merges", type=int, default=16384)
    parser.add_argument("--min-frequency", type=int, default=2)
    args = parser.parse_args()

    corpus = args.corpus.read_text(encoding="utf-8")
    freqs = word_frequencies(corpus)
    merges = learn_merges(freqs, args.max_merges, args.min_frequency)

    lines = ["#version: 0.2"] + [f"{a} {b}" for a, b in merges]
    payload = "\n".join(lines) + "\n"
    args.merges_out.parent.mkdir(parents=True, exist_ok=True)
    if args.merges_out.suffix == ".gz":
        # fixed mtime so rebuilding from the same corpus is byte-identical
        with gzip.GzipFile(args.merges_out, "wb", mtime=0) as fh:
            fh.write(payload.encode("utf-8"))
    else:
        args.merges_out.write_text(payload, encoding="utf-8")

    if args.merges_txt_out:
        args.merges_txt_out.parent.mkdir(parents=True, exist_ok=True)
        args.merges_txt_out.write_text(payload, encoding="utf-8")
    if args.vocab_json_out:
        args.vocab_json_out.parent.mkdir(parents=True, exist_ok=True)
        args.vocab_json_out.write_text(json.dumps(full_vocab(merges), ensure_ascii=False) + "\n", encoding="utf-8")

    print(f"{len(freqs)} distinct words, {len(merges)} merges, vocab size {len(full_vocab(merges))}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
