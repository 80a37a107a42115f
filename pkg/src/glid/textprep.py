"""Text cleaning, chunking, and hashed character n-gram features.

The cleaning rules are documented bit-exactly in docs/cleaning.md; the
feature pipeline is: clean -> chunk into ~50-char samples -> one token per
non-whitespace character -> all n-grams up to length 6 -> FNV-1a 64-bit
hash into a fixed number of buckets.
"""

from __future__ import annotations

import re
import unicodedata

import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_FNV_MASK = 0xFFFFFFFFFFFFFFFF

DEFAULT_NUM_BUCKETS = 4_000_000
DEFAULT_MAX_NGRAM = 6
MIN_SAMPLE_LEN = 50

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_EMAIL_RE = re.compile(r"[^\s@]+@[^\s@]+\.[^\s@]+")


def clean_text(raw: str, lowercase: bool = True) -> str:
    """Strip URLs, emails, digits, punctuation and symbols from ``raw``.

    Keeps letters and combining marks of every script, collapses whitespace
    runs to a single space, and lowercases by default.  Idempotent.  The
    result may be shorter than the 50-character sample minimum; chunking is
    a separate step.
    """
    text = _URL_RE.sub(" ", raw)
    text = _EMAIL_RE.sub(" ", text)
    kept = []
    for ch in text:
        if ch.isspace():
            kept.append(" ")
            continue
        cat = unicodedata.category(ch)
        if cat[0] in ("L", "M"):
            kept.append(ch)
        # digits, punctuation, symbols, controls are dropped
    text = "".join(kept)
    if lowercase:
        text = text.lower()
    return " ".join(text.split())


def chunk_samples(cleaned: str, target_len: int = MIN_SAMPLE_LEN,
                  keep_short: bool = False) -> list[str]:
    """Greedily pack whitespace-delimited tokens into chunks.

    A chunk is emitted as soon as its length (separators included) reaches
    ``target_len``; tokens are never split.  The trailing short chunk is
    dropped unless ``keep_short`` is set.
    """
    chunks: list[str] = []
    buf: list[str] = []
    buf_len = 0
    for tok in cleaned.split():
        buf_len += len(tok) if not buf else len(tok) + 1
        buf.append(tok)
        if buf_len >= target_len:
            chunks.append(" ".join(buf))
            buf, buf_len = [], 0
    if keep_short and buf:
        chunks.append(" ".join(buf))
    return chunks


def char_tokenize(sample: str, boundary_token: str | None = None) -> list[str]:
    """Split a cleaned sample into one token per non-whitespace character.

    By default whitespace is dropped entirely so that n-grams cross word
    boundaries.  Passing ``boundary_token`` inserts that sentinel between
    words instead (an alternative kept behind this flag; models use the
    default).
    """
    if boundary_token is None:
        return [ch for ch in sample if not ch.isspace()]
    tokens: list[str] = []
    for i, word in enumerate(sample.split()):
        if i:
            tokens.append(boundary_token)
        tokens.extend(word)
    return tokens


def extract_ngrams(tokens: list[str], max_n: int = DEFAULT_MAX_NGRAM) -> list[str]:
    """All contiguous n-grams for n in 1..max_n, concatenated as strings."""
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    grams: list[str] = []
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            grams.append("".join(tokens[i:i + n]))
    return grams


def fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash of a byte string."""
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & _FNV_MASK
    return h


def hash_feature(ngram: str, num_buckets: int = DEFAULT_NUM_BUCKETS) -> int:
    """Deterministic bucket id for one n-gram: FNV-1a 64 of its UTF-8 bytes."""
    if num_buckets <= 0:
        raise ValueError(f"num_buckets must be > 0, got {num_buckets}")
    return fnv1a_64(ngram.encode("utf-8")) % num_buckets


def feature_ids(sample: str, max_n: int = DEFAULT_MAX_NGRAM,
                num_buckets: int = DEFAULT_NUM_BUCKETS) -> list[int]:
    """Reference (scalar) feature extraction: tokenize, n-grams, hash.

    Returns the bucket-id multiset of the sample as a list.  Equivalent to
    ``batch_feature_ids`` up to ordering; that vectorized path is what the
    models use.
    """
    return [hash_feature(g, num_buckets)
            for g in extract_ngrams(char_tokenize(sample), max_n)]


_NP_PRIME = np.uint64(FNV_PRIME)
_NP_OFFSET = np.uint64(FNV_OFFSET)


def batch_feature_ids(texts: list[str], max_n: int = DEFAULT_MAX_NGRAM,
                      num_buckets: int = DEFAULT_NUM_BUCKETS
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized feature extraction for a batch of cleaned samples.

    Returns ``(ids, offsets)`` where ``ids[offsets[i]:offsets[i+1]]`` holds
    the bucket ids of ``texts[i]`` (order within a sample is unspecified;
    features are a bag).  Hashes are identical to :func:`hash_feature`:
    the n-gram hash extends the (n-1)-gram hash by the appended character's
    UTF-8 bytes, so all n-gram lengths come out of one pass over the batch.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    if num_buckets <= 0:
        raise ValueError(f"num_buckets must be > 0, got {num_buckets}")
    stripped = ["".join(t.split()) for t in texts]
    n_texts = len(stripped)
    char_lens = np.array([len(s) for s in stripped], dtype=np.int64)
    n_chars = int(char_lens.sum())
    if n_chars == 0:
        return (np.empty(0, dtype=np.int64),
                np.zeros(n_texts + 1, dtype=np.int64))

    joined = "".join(stripped)
    cps = np.frombuffer(joined.encode("utf-32-le"), dtype=np.uint32)
    byte_len = (1 + (cps >= 0x80).astype(np.int64) + (cps >= 0x800)
                + (cps >= 0x10000))
    char_off = np.empty(n_chars + 1, dtype=np.int64)
    char_off[0] = 0
    np.cumsum(byte_len, out=char_off[1:])
    # pad so a masked-out byte column can be read past the last character
    utf8 = np.frombuffer(joined.encode("utf-8") + b"\0\0\0", dtype=np.uint8)
    utf8 = utf8.astype(np.uint64)
    text_id = np.repeat(np.arange(n_texts, dtype=np.int64), char_lens)
    text_char_start = np.empty(n_texts, dtype=np.int64)
    text_char_start[0] = 0
    np.cumsum(char_lens[:-1], out=text_char_start[1:])

    # per-text output layout: all n-gram lengths of one text are contiguous
    per_text = np.zeros(n_texts, dtype=np.int64)
    for n in range(1, max_n + 1):
        per_text += np.maximum(char_lens - n + 1, 0)
    offsets = np.empty(n_texts + 1, dtype=np.int64)
    offsets[0] = 0
    np.cumsum(per_text, out=offsets[1:])
    ids = np.empty(int(offsets[-1]), dtype=np.int64)
    n_start = np.zeros(n_texts, dtype=np.int64)   # filled slots per text

    nb = np.uint64(num_buckets)
    h = np.full(n_chars, _NP_OFFSET, dtype=np.uint64)
    for n in range(1, max_n + 1):
        n_windows = n_chars - n + 1
        if n_windows <= 0:
            break
        h = h[:n_windows]
        # extend each window hash by the bytes of its new last character
        tail = slice(n - 1, n - 1 + n_windows)
        start_byte = char_off[tail]
        tail_len = byte_len[tail]
        for b in range(4):
            alive = tail_len > b
            if not alive.any():
                break
            h = np.where(alive, (h ^ utf8[start_byte + b]) * _NP_PRIME, h)
        # windows whose two ends fall in different texts are not n-grams
        valid = text_id[:n_windows] == text_id[tail]
        idx = np.flatnonzero(valid)
        owner = text_id[idx]
        dest = offsets[owner] + n_start[owner] + (idx - text_char_start[owner])
        ids[dest] = (h[idx] % nb).astype(np.int64)
        n_start += np.maximum(char_lens - n + 1, 0)
    return ids, offsets
