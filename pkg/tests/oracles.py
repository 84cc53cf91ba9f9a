"""Independent brute-force reference implementations used as test oracles.

Deliberately written with different techniques than the library (character
scans, quadratic recounts, full rescans) so that agreement is meaningful.
"""

from __future__ import annotations

import math

PADS = ("<PAD_L1>", "<PAD_L2>", "<PAD_R1>", "<PAD_R2>")


def oracle_tokenize(text: str) -> list[str]:
    words: list[str] = []
    current: list[str] = []
    for ch in text + " ":
        if ch.isspace():
            if current:
                words.append("".join(current))
                current = []
        else:
            current.append(ch)
    out: list[str] = []
    for token in words:
        if token in ("T_HANDLE", "LINK"):
            out.append(token)
        elif token[0] == "@" and len(token) >= 2:
            out.append("T_HANDLE")
        elif token.lower()[:7] == "http://" or token.lower()[:8] == "https://":
            out.append("LINK")
        else:
            out.append(token.lower())
    return out


def oracle_windows(tokens: list[str]) -> list[tuple[str, ...]]:
    padded = [PADS[0], PADS[1]] + list(tokens) + [PADS[2], PADS[3]]
    return [tuple(padded[i - 2 : i + 3]) for i in range(2, len(padded) - 2)]


def oracle_count(tweets: list[str]):
    """Quadratic recount: enumerate all windows, then re-scan per distinct one."""
    windows: list[tuple[str, ...]] = []
    total_tweets = 0
    total_tokens = 0
    for tweet in tweets:
        tokens = oracle_tokenize(tweet)
        if not tokens:
            continue
        total_tweets += 1
        total_tokens += len(tokens)
        windows.extend(oracle_windows(tokens))
    records = {}
    for gram in set(windows):
        records[gram] = sum(1 for other in windows if other == gram)
    return records, total_tweets, total_tokens


def oracle_dictionary(records: dict) -> list[tuple[str, int]]:
    freqs: dict[str, int] = {}
    for gram, count in records.items():
        center = gram[2]
        if center in PADS:
            continue
        freqs[center] = freqs.get(center, 0) + count
    items = list(freqs.items())
    items.sort(key=lambda kv: kv[0])
    items.sort(key=lambda kv: kv[1], reverse=True)  # stable: keeps word order in ties
    return items


def oracle_filter(records: dict, vocab_words: list[str],
                  include_boundary: bool = False) -> set[tuple[str, ...]]:
    """Token-level scan; returns the set of qualifying 5-gram token tuples."""
    vocab = set(vocab_words)
    context_ok = vocab | (set(PADS) if include_boundary else set())
    out = set()
    for gram in records:
        w1, w2, w3, w4, w5 = gram
        if w3 in vocab and all(t in context_ok for t in (w1, w2, w4, w5)):
            out.add(gram)
    return out


def oracle_cosine(u, v) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    return dot / (nu * nv)


def oracle_nearest(words: list[str], vectors, query: str, k: int) -> list[tuple[str, float]]:
    qv = vectors[words.index(query)]
    scored = []
    for w, v in zip(words, vectors):
        if w == query:
            continue
        if all(x == 0.0 for x in v):
            continue
        scored.append((w, oracle_cosine(qv, v)))
    scored.sort(key=lambda item: item[0])
    scored.sort(key=lambda item: item[1], reverse=True)
    return [(w, s) for w, s in scored[:k]]


def oracle_topological(words, vectors, word_classes) -> tuple[int, int]:
    """(evaluated, passed) by direct definition, all cosines via oracle_cosine."""
    usable = [w for w in words if any(x != 0.0 for x in vectors[words.index(w)])
              and w in word_classes]
    evaluated = passed = 0
    for w in usable:
        same, diff = [], []
        for other in usable:
            if other == w:
                continue
            cos = oracle_cosine(vectors[words.index(w)], vectors[words.index(other)])
            if word_classes[w] & word_classes[other]:
                same.append(cos)
            else:
                diff.append(cos)
        if not same or not diff:
            continue
        evaluated += 1
        if min(same) > max(diff):
            passed += 1
    return evaluated, passed
