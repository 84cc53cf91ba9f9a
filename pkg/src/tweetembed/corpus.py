"""Corpus ingestion: tweet normalization, padded 5-gram windows, counting.

Tokenization is deliberately minimal: split on whitespace, down-case, and
mask Twitter handles / HTTP links with placeholder tokens. Punctuation is
left attached, so "ronaldo" and "ronaldo!" remain distinct tokens.
"""

from __future__ import annotations

import collections
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

HANDLE_TOKEN = "T_HANDLE"
LINK_TOKEN = "LINK"

PAD_L1 = "<PAD_L1>"
PAD_L2 = "<PAD_L2>"
PAD_R1 = "<PAD_R1>"
PAD_R2 = "<PAD_R2>"
BOUNDARY_TOKENS = (PAD_L1, PAD_L2, PAD_R1, PAD_R2)
_BOUNDARY_SET = frozenset(BOUNDARY_TOKENS)

FiveGram = tuple[str, str, str, str, str]


def normalize_token(raw: str) -> str:
    """Normalize one whitespace-delimited token.

    Handle and link masking runs before down-casing, so the placeholder
    tokens keep their upper-case spelling; existing placeholders pass
    through unchanged, which makes tokenization idempotent.
    """
    if raw == HANDLE_TOKEN or raw == LINK_TOKEN:
        return raw
    if raw.startswith("@") and len(raw) > 1:
        return HANDLE_TOKEN
    lowered = raw.lower()
    if lowered.startswith(("http://", "https://")):
        return LINK_TOKEN
    return lowered


def tokenize_tweet(text: str) -> list[str]:
    """Split a raw tweet on whitespace and normalize each token.

    A whitespace-only tweet yields an empty list. No other linguistic
    pre-processing is applied.
    """
    return [normalize_token(raw) for raw in text.split()]


def extract_5grams(tokens: Sequence[str]) -> list[FiveGram]:
    """All 5-token windows over the padded token sequence.

    The sequence is framed as <PAD_L1> <PAD_L2> ... <PAD_R1> <PAD_R2>, so
    every real token is the center of exactly one window and windows never
    cross tweet boundaries. Returns len(tokens) windows (empty input gives
    an empty list).
    """
    if not tokens:
        return []
    padded = [PAD_L1, PAD_L2, *tokens, PAD_R1, PAD_R2]
    return [tuple(padded[i : i + 5]) for i in range(len(tokens))]


@dataclass
class NGramDatabase:
    """Distinct 5-grams with occurrence counts, plus corpus totals.

    Invariant: the counts sum to total_tokens, since each token of each
    tweet is the center of exactly one window occurrence.
    """

    records: dict[FiveGram, int]
    total_tweets: int
    total_tokens: int


def _count_shard(lines: Iterable[str]) -> tuple[collections.Counter, int, int]:
    counts: collections.Counter = collections.Counter()
    tweets = 0
    tokens = 0
    for line in lines:
        toks = tokenize_tweet(line)
        if not toks:
            continue
        tweets += 1
        tokens += len(toks)
        counts.update(extract_5grams(toks))
    return counts, tweets, tokens


def _shards(stream: Iterable[str], size: int) -> Iterator[list[str]]:
    batch: list[str] = []
    for line in stream:
        batch.append(line)
        if len(batch) >= size:
            yield batch
            batch = []
    if batch:
        yield batch


def count_ngrams(tweet_stream: Iterable[str], workers: int = 1,
                 shard_size: int = 20000) -> NGramDatabase:
    """Aggregate 5-gram occurrence counts over a stream of raw tweets.

    Whitespace-only tweets contribute nothing and are not counted in
    total_tweets. With workers > 1, contiguous shards are counted in
    parallel and the partial counts merged; the merge is commutative and
    associative, so the result is identical to a sequential count.
    """
    if workers <= 1:
        counts, tweets, tokens = _count_shard(tweet_stream)
    else:
        counts = collections.Counter()
        tweets = tokens = 0
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part, tw, tk in pool.map(_count_shard, _shards(tweet_stream, shard_size)):
                counts.update(part)
                tweets += tw
                tokens += tk
    return NGramDatabase(dict(counts), tweets, tokens)


@dataclass
class Dictionary:
    """Words sorted by corpus frequency; rank is the list position.

    Frequencies are non-increasing; ties are broken by ascending word
    order (UTF-8 byte order, which matches code-point order). Boundary
    tokens are excluded.
    """

    entries: list[tuple[str, int]]

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return [word for word, _ in self.entries]


def build_dictionary(db: NGramDatabase) -> Dictionary:
    """Word frequencies from window centers, sorted by the rank rule.

    Each corpus token is the center of exactly one window, so counting
    centers counts every occurrence exactly once.
    """
    counts: collections.Counter = collections.Counter()
    for gram, n in db.records.items():
        center = gram[2]
        if center in _BOUNDARY_SET:  # never legal as a center; guard anyway
            continue
        counts[center] += n
    entries = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Dictionary(entries)


def write_ngram_db(db: NGramDatabase, path: Path | str) -> None:
    """TSV: header with corpus totals, then one row per distinct 5-gram.

    Rows are `w1..w5<TAB>count`, sorted lexicographically by the tokens so
    output bytes do not depend on counting order.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#total_tweets={db.total_tweets}\t#total_tokens={db.total_tokens}\n")
        for gram in sorted(db.records):
            fh.write("\t".join(gram) + f"\t{db.records[gram]}\n")


def read_ngram_db(path: Path | str) -> NGramDatabase:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#total_tweets="):
            raise ValueError(f"{path}: missing 5-gram database header")
        tweets_part, tokens_part = header.split("\t")
        total_tweets = int(tweets_part.removeprefix("#total_tweets="))
        total_tokens = int(tokens_part.removeprefix("#total_tokens="))
        records: dict[FiveGram, int] = {}
        for lineno, line in enumerate(fh, start=2):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 columns, got {len(fields)}")
            records[tuple(fields[:5])] = int(fields[5])
    return NGramDatabase(records, total_tweets, total_tokens)


def write_dictionary(dictionary: Dictionary, path: Path | str) -> None:
    """TSV `word<TAB>frequency<TAB>rank`, rank ascending from 0."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rank, (word, freq) in enumerate(dictionary.entries):
            fh.write(f"{word}\t{freq}\t{rank}\n")


def read_dictionary(path: Path | str) -> Dictionary:
    path = Path(path)
    entries: list[tuple[str, int]] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            word, freq, rank = line.rstrip("\n").split("\t")
            if int(rank) != lineno:
                raise ValueError(f"{path}: rank column out of order at line {lineno + 1}")
            entries.append((word, int(freq)))
    return Dictionary(entries)
