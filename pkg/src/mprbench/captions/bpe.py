"""Byte-pair-encoding token counting for the retrieval text encoder.

Dual-encoder text towers read a fixed context window (77 tokens including
the start/end markers), silently truncating anything longer, which is
exactly the failure mode the caption audit guards against. Counting uses
the encoder-style BPE pipeline: lowercase + whitespace cleanup, the
letters/digits/other word split, byte-to-unicode fallback (so any UTF-8
string tokenizes, no OOV), greedy merges by rank with ``</w>`` marking word
ends, and the two sequence markers added to every count.

The merge table loads from a plain or gzipped text file: an optional
``#version`` header line, then one space-separated symbol pair per line in
merge-priority order. The bundled table is learned from a product-catalog
corpus by tools/build_bpe_vocab.py.
"""

from __future__ import annotations

import gzip
import html
from functools import lru_cache
from importlib import resources
from pathlib import Path

import regex

START_TOKEN = "<|startoftext|>"
END_TOKEN = "<|endoftext|>"
MARKER_COUNT = 2
DEFAULT_BUDGET = 77

_WORD_PATTERN = regex.compile(
    r"""<\|startoftext\|>|<\|endoftext\|>|'s|'t|'re|'ve|'m|'ll|'d|[\p{L}]+|[\p{N}]|[^\s\p{L}\p{N}]+""",
    regex.IGNORECASE,
)
_WHITESPACE = regex.compile(r"\s+")


class VocabularyMissing(Exception):
    pass


@lru_cache(maxsize=1)
def bytes_to_unicode() -> dict[int, str]:
    """Reversible byte -> printable unicode map (the GPT-2/CLIP table)."""
    bs = list(range(ord("!"), ord("~") + 1)) + list(range(ord("\xa1"), ord("\xac") + 1)) + list(range(ord("\xae"), ord("\xff") + 1))
    cs = bs[:]
    n = 0
    for b in range(256):
        if b not in bs:
            bs.append(b)
            cs.append(256 + n)
            n += 1
    return dict(zip(bs, (chr(c) for c in cs)))


def _get_pairs(word: tuple[str, ...]) -> set[tuple[str, str]]:
    return set(zip(word[:-1], word[1:]))


def clean_text(text: str) -> str:
    """Unescape twice, collapse whitespace, lowercase."""
    text = html.unescape(html.unescape(text))
    return _WHITESPACE.sub(" ", text).strip().lower()


class BpeVocabulary:
    """Merge table plus the token-string -> id mapping derived from it."""

    def __init__(self, merges: list[tuple[str, str]]):
        byte_symbols = list(bytes_to_unicode().values())
        vocab = byte_symbols + [s + "</w>" for s in byte_symbols]
        vocab += ["".join(pair) for pair in merges]
        vocab += [START_TOKEN, END_TOKEN]
        self.encoder: dict[str, int] = {tok: i for i, tok in enumerate(vocab)}
        self.bpe_ranks: dict[tuple[str, str], int] = {pair: i for i, pair in enumerate(merges)}
        self._byte_encoder = bytes_to_unicode()
        self._cache: dict[str, str] = {START_TOKEN: START_TOKEN, END_TOKEN: END_TOKEN}

    def __len__(self) -> int:
        return len(self.encoder)

    @property
    def start_id(self) -> int:
        return self.encoder[START_TOKEN]

    @property
    def end_id(self) -> int:
        return self.encoder[END_TOKEN]

    @classmethod
    def from_file(cls, path: Path | str) -> "BpeVocabulary":
        path = Path(path)
        if not path.exists():
            raise VocabularyMissing(f"merge table not found: {path}")
        opener = gzip.open if path.suffix == ".gz" else open
        with opener(path, "rt", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if lines and lines[0].startswith("#version"):
            lines = lines[1:]
        merges = []
        for line in lines:
            if not line.strip():
                continue
            a, b = line.split()
            merges.append((a, b))
        return cls(merges)

    def _bpe(self, token: str) -> str:
        if token in self._cache:
            return self._cache[token]
        word = tuple(token[:-1]) + (token[-1] + "</w>",)
        pairs = _get_pairs(word)
        if not pairs:
            return token + "</w>"

        while True:
            best = min(pairs, key=lambda p: self.bpe_ranks.get(p, float("inf")))
            if best not in self.bpe_ranks:
                break
            first, second = best
            merged: list[str] = []
            i = 0
            while i < len(word):
                if word[i] == first and i < len(word) - 1 and word[i + 1] == second:
                    merged.append(first + second)
                    i += 2
                else:
                    merged.append(word[i])
                    i += 1
            word = tuple(merged)
            if len(word) == 1:
                break
            pairs = _get_pairs(word)

        out = " ".join(word)
        self._cache[token] = out
        return out

    def encode(self, text: str) -> list[int]:
        """Token ids for the text content, markers not included."""
        ids: list[int] = []
        for token in _WORD_PATTERN.findall(clean_text(text)):
            mapped = "".join(self._byte_encoder[b] for b in token.encode("utf-8"))
            ids.extend(self.encoder[sub] for sub in self._bpe(mapped).split(" "))
        return ids


@lru_cache(maxsize=1)
def default_vocabulary() -> BpeVocabulary:
    """The merge table bundled with the package."""
    ref = resources.files("mprbench").joinpath("captions/data/bpe_merges.txt.gz")
    with resources.as_file(ref) as path:
        return BpeVocabulary.from_file(path)


def count_tokens(text: str, vocabulary: BpeVocabulary | None = None) -> int:
    """Deterministic token count, start/end markers included."""
    if vocabulary is None:
        vocabulary = default_vocabulary()
    return len(vocabulary.encode(text)) + MARKER_COUNT
