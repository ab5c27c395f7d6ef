"""Vocabulary and symmetric co-occurrence statistics.

Co-occurrence increments are accumulated as integers in units of
``1 / lcm(1..window)`` so that harmonic ``1/d`` weights add exactly. Any
sharding of the corpus therefore produces a bit-identical matrix.
"""

from __future__ import annotations

import math
import os
import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, reduce
from typing import Iterable, Sequence

import numpy as np

from ._jit import HAS_NUMBA, njit
from .errors import FormatError

COOC_MAGIC = b"HGCO"
COOC_VERSION = 1
_COOC_HEADER = struct.Struct("<4sIII")
_RECORD = np.dtype([("i", "<u4"), ("j", "<u4"), ("x", "<f8")])
MAX_UNIT_SCALE = 2**40


@dataclass(frozen=True)
class Vocab:
    words: tuple[str, ...]
    counts: np.ndarray
    index: dict[str, int] = field(repr=False, compare=False)

    @classmethod
    def from_counts(cls, pairs: Iterable[tuple[str, int]]) -> "Vocab":
        ordered = sorted(pairs, key=lambda wc: (-wc[1], wc[0]))
        words = tuple(w for w, _ in ordered)
        counts = np.array([c for _, c in ordered], dtype=np.int64)
        return cls(words, counts, {w: i for i, w in enumerate(words)})

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def get(self, word: str, default: int = -1) -> int:
        return self.index.get(word, default)


def iter_sentences(token_stream) -> Iterable[list[str]]:
    """Normalise a corpus source into token lists, one per line.

    ``token_stream`` may be a path, an iterable of text lines, or an iterable
    of token sequences. Windows never cross line boundaries.
    """
    if isinstance(token_stream, (str, os.PathLike)):
        with open(token_stream, encoding="utf-8") as fh:
            for line in fh:
                yield line.split()
        return
    for item in token_stream:
        if isinstance(item, str):
            yield item.split()
        else:
            yield list(item)


def build_vocab(token_stream, min_count: int = 1) -> Vocab:
    counter: Counter[str] = Counter()
    for tokens in iter_sentences(token_stream):
        counter.update(tokens)
    return Vocab.from_counts((w, c) for w, c in counter.items() if c >= min_count)


def save_vocab(vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for word, count in zip(vocab.words, vocab.counts):
            fh.write(f"{word}\t{int(count)}\n")


def load_vocab(path) -> Vocab:
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{lineno}: expected 'word<TAB>count'")
            try:
                pairs.append((parts[0], int(parts[1])))
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: bad count {parts[1]!r}") from exc
    return Vocab.from_counts(pairs)


@dataclass(frozen=True, eq=False)
class CoocMatrix:
    """Upper-triangular storage (i <= j) of a symmetric co-occurrence matrix."""

    vocab_size: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    row_sums: np.ndarray = field(compare=False)

    @classmethod
    def from_entries(cls, vocab_size, rows, cols, values) -> "CoocMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if not (rows.shape == cols.shape == values.shape):
            raise ValueError("rows, cols and values must have equal length")
        lo = np.minimum(rows, cols)
        hi = np.maximum(rows, cols)
        keys = lo * vocab_size + hi
        order = np.argsort(keys, kind="stable")
        if len(keys) and np.any(np.diff(keys[order]) == 0):
            raise ValueError("duplicate (i, j) entries")
        lo, hi, values = lo[order], hi[order], values[order]
        return cls(vocab_size, lo, hi, values, _row_sums(vocab_size, lo, hi, values))

    def __eq__(self, other):
        if not isinstance(other, CoocMatrix):
            return NotImplemented
        return (self.vocab_size == other.vocab_size and np.array_equal(self.rows, other.rows)
                and np.array_equal(self.cols, other.cols) and np.array_equal(self.values, other.values))

    __hash__ = None

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def keys(self) -> np.ndarray:
        return self.rows * self.vocab_size + self.cols

    def both_orientations(self):
        """Entries expanded to (i, j) and (j, i); diagonal entries appear once."""
        off = self.rows != self.cols
        i = np.concatenate([self.rows, self.cols[off]])
        j = np.concatenate([self.cols, self.rows[off]])
        x = np.concatenate([self.values, self.values[off]])
        return i, j, x

    def lookup(self, i, j) -> np.ndarray:
        """X_ij for index arrays ``i`` and ``j`` (0 where absent)."""
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        q = np.minimum(i, j) * self.vocab_size + np.maximum(i, j)
        keys = self.keys
        pos = np.searchsorted(keys, q)
        pos_c = np.minimum(pos, max(len(keys) - 1, 0))
        if len(keys) == 0:
            return np.zeros(q.shape)
        hit = keys[pos_c] == q
        return np.where(hit, self.values[pos_c], 0.0)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.vocab_size, self.vocab_size))
        dense[self.rows, self.cols] = self.values
        dense[self.cols, self.rows] = self.values
        return dense


def _row_sums(vocab_size, rows, cols, values):
    sums = np.bincount(rows, weights=values, minlength=vocab_size)
    off = rows != cols
    sums += np.bincount(cols[off], weights=values[off], minlength=vocab_size)
    return sums


def glove_weight(x, x_max: float = 100.0, alpha: float = 0.75):
    """min(1, (x / x_max) ** alpha)."""
    return np.minimum(1.0, (np.asarray(x, dtype=np.float64) / x_max) ** alpha)


def unit_scale(window: int, weighting: str) -> int:
    if window < 1:
        raise ValueError("window must be >= 1")
    if weighting == "flat":
        return 1
    if weighting != "harmonic":
        raise ValueError(f"unknown weighting {weighting!r}")
    scale = reduce(math.lcm, range(1, window + 1), 1)
    if scale > MAX_UNIT_SCALE:
        raise ValueError(f"window {window} too large for exact harmonic accumulation")
    return scale


@njit(cache=True, nogil=True)
def _emit_pairs_kernel(ids, line_ends, window, units, vocab_size, keys, weights):
    n = 0
    start = 0
    for line in range(line_ends.shape[0]):
        end = line_ends[line]
        for p in range(start, end):
            a = ids[p]
            if a < 0:
                continue
            stop = min(end, p + window + 1)
            for q in range(p + 1, stop):
                b = ids[q]
                if b < 0:
                    continue
                u = units[q - p]
                if a == b:
                    keys[n] = a * vocab_size + a
                    weights[n] = 2 * u
                elif a < b:
                    keys[n] = a * vocab_size + b
                    weights[n] = u
                else:
                    keys[n] = b * vocab_size + a
                    weights[n] = u
                n += 1
        start = end
    return n


def _emit_pairs_numpy(ids, line_ends, window, units, vocab_size):
    line_of = np.repeat(np.arange(len(line_ends)), np.diff(np.concatenate([[0], line_ends])))
    keys_parts = []
    weight_parts = []
    for d in range(1, window + 1):
        if d >= len(ids):
            break
        a = ids[:-d]
        b = ids[d:]
        ok = (a >= 0) & (b >= 0) & (line_of[:-d] == line_of[d:])
        a = a[ok].astype(np.int64)
        b = b[ok].astype(np.int64)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        keys_parts.append(lo * vocab_size + hi)
        weight_parts.append(np.where(a == b, 2 * units[d], units[d]))
    if not keys_parts:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    return np.concatenate(keys_parts), np.concatenate(weight_parts).astype(np.int64)


def _reduce_pairs(keys, weights):
    if len(keys) == 0:
        return keys, weights
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    weights = weights[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(keys)) + 1])
    return keys[starts], np.add.reduceat(weights, starts)


def _count_shard(sentences, vocab, window, units):
    ids = []
    ends = []
    total = 0
    for tokens in sentences:
        ids.extend(vocab.index.get(t, -1) for t in tokens)
        total += len(tokens)
        ends.append(total)
    ids = np.asarray(ids, dtype=np.int64)
    line_ends = np.asarray(ends, dtype=np.int64)
    V = len(vocab)
    if HAS_NUMBA:
        keys = np.empty(len(ids) * window, dtype=np.int64)
        weights = np.empty(len(ids) * window, dtype=np.int64)
        n = _emit_pairs_kernel(ids, line_ends, window, units, V, keys, weights)
        keys, weights = keys[:n], weights[:n]
    else:
        keys, weights = _emit_pairs_numpy(ids, line_ends, window, units, V)
    return _reduce_pairs(keys, weights)


def _shards(sentences, max_tokens):
    shard = []
    size = 0
    for tokens in sentences:
        shard.append(tokens)
        size += len(tokens)
        if size >= max_tokens:
            yield shard
            shard, size = [], 0
    if shard:
        yield shard


def count_cooccurrences(
    token_stream,
    vocab: Vocab,
    window: int = 10,
    weighting: str = "harmonic",
    threads: int = 1,
    shard_tokens: int = 1_000_000,
) -> CoocMatrix:
    """Symmetric windowed co-occurrence counts.

    A pair of in-vocabulary tokens at offset ``d <= window`` on the same line
    adds ``1/d`` (harmonic) or ``1`` (flat) to both X_ij and X_ji.
    Out-of-vocabulary tokens are skipped but still occupy positions.
    """
    scale = unit_scale(window, weighting)
    units = np.array([0] + [scale // d if weighting == "harmonic" else 1 for d in range(1, window + 1)], dtype=np.int64)
    shards = _shards(iter_sentences(token_stream), shard_tokens)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda s: _count_shard(s, vocab, window, units), shards))
    else:
        parts = [_count_shard(s, vocab, window, units) for s in shards]
    V = len(vocab)
    if parts:
        keys, weights = _reduce_pairs(
            np.concatenate([k for k, _ in parts]), np.concatenate([w for _, w in parts])
        )
    else:
        keys = weights = np.zeros(0, dtype=np.int64)
    values = weights.astype(np.float64) / scale
    rows = keys // max(V, 1)
    cols = keys % max(V, 1)
    return CoocMatrix(V, rows, cols, values, _row_sums(V, rows, cols, values))


def save_cooc(m: CoocMatrix, path) -> None:
    records = np.empty(m.nnz, dtype=_RECORD)
    records["i"] = m.rows
    records["j"] = m.cols
    records["x"] = m.values
    with open(path, "wb") as fh:
        fh.write(_COOC_HEADER.pack(COOC_MAGIC, COOC_VERSION, m.vocab_size, m.nnz))
        fh.write(records.tobytes())


def load_cooc(path) -> CoocMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    hsize = _COOC_HEADER.size
    if len(data) < hsize:
        raise FormatError(f"{path}: truncated header at offset 0")
    magic, version, V, n_records = _COOC_HEADER.unpack_from(data, 0)
    if magic != COOC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != COOC_VERSION:
        raise FormatError(f"{path}: unsupported version {version} at offset 4")
    body = len(data) - hsize
    full, rest = divmod(body, _RECORD.itemsize)
    if rest:
        raise FormatError(f"{path}: truncated record at offset {hsize + full * _RECORD.itemsize}")
    if full != n_records:
        raise FormatError(f"{path}: header announces {n_records} records, found {full} at offset 12")
    records = np.frombuffer(data, dtype=_RECORD, offset=hsize, count=full)
    rows = records["i"].astype(np.int64)
    cols = records["j"].astype(np.int64)
    values = records["x"].astype(np.float64)
    bad = np.flatnonzero((rows >= V) | (cols >= V) | (rows > cols) | ~(values > 0))
    if len(bad):
        k = int(bad[0])
        raise FormatError(
            f"{path}: invalid record (i={rows[k]}, j={cols[k]}, x={values[k]}) "
            f"for V={V} at offset {hsize + k * _RECORD.itemsize}"
        )
    keys = rows * V + cols
    if len(keys) > 1 and np.any(np.diff(keys) <= 0):
        k = int(np.flatnonzero(np.diff(keys) <= 0)[0]) + 1
        raise FormatError(f"{path}: records not strictly sorted at offset {hsize + k * _RECORD.itemsize}")
    return CoocMatrix(V, rows, cols, values, _row_sums(V, rows, cols, values))
