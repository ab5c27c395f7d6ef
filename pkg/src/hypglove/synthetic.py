"""Seeded synthetic corpora with known structure, for smoke tests and benchmarks.

``topic_corpus`` draws each line from one latent topic; words carry sparse
topic mixtures, and the cosine between two mixtures serves as graded
similarity gold. ``taxonomy_corpus`` writes lines over a fixed-branching
concept tree, each naming a leaf with all of its ancestors and a few sibling
leaves, so generic words co-occur broadly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

_ONSETS = ("b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z")
_VOWELS = ("a", "e", "i", "o", "u")


def word_names(n: int) -> list[str]:
    """``n`` distinct pronounceable tokens in a fixed order."""
    syllables = [o + v for o, v in itertools.product(_ONSETS, _VOWELS)]
    names = []
    length = 1
    while len(names) < n:
        for combo in itertools.product(syllables, repeat=length):
            names.append("".join(combo))
            if len(names) == n:
                break
        length += 1
    return names


@dataclass
class TopicCorpus:
    words: list[str]
    mixtures: np.ndarray  # (V, K) topic weights per word
    n_tokens: int


def _write_lines(path, token_ids, line_len, words):
    names = np.array(words, dtype=object)
    n_lines = len(token_ids) // line_len
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for chunk in range(0, n_lines, 10_000):
            block = token_ids[chunk * line_len:min(n_lines, chunk + 10_000) * line_len].reshape(-1, line_len)
            fh.write("".join(" ".join(row) + "\n" for row in names[block]))


def topic_corpus(path, target_bytes=10_000_000, vocab_size=2000, n_topics=40,
                 concentration=0.1, line_len=20, seed=0) -> TopicCorpus:
    """Write a single-topic-per-line corpus of roughly ``target_bytes`` to ``path``."""
    rng = np.random.default_rng(seed)
    words = word_names(vocab_size)
    mixtures = rng.dirichlet(np.full(n_topics, concentration), size=vocab_size)
    base = 1.0 / (np.arange(vocab_size) + 10.0)
    emit = mixtures * base[:, None]
    cdf = np.cumsum(emit / emit.sum(axis=0), axis=0).T  # (K, V)
    avg_len = np.dot(base / base.sum(), [len(w) + 1 for w in words])
    n_lines = int(target_bytes / (avg_len * line_len))
    topics = rng.integers(0, n_topics, size=n_lines)
    u = rng.random((n_lines, line_len))
    ids = np.empty((n_lines, line_len), dtype=np.int64)
    for k in range(n_topics):
        rows = topics == k
        ids[rows] = np.minimum(np.searchsorted(cdf[k], u[rows]), vocab_size - 1)
    _write_lines(path, ids.ravel(), line_len, words)
    return TopicCorpus(words, mixtures, ids.size)


def similarity_pairs(corpus: TopicCorpus, n_pairs=500, top=1000, seed=0) -> list[tuple[str, str, float]]:
    """Random distinct word pairs among the ``top`` most frequent ids, scored by mixture cosine."""
    rng = np.random.default_rng(seed)
    top = min(top, len(corpus.words))
    seen = set()
    rows = []
    unit = corpus.mixtures / np.linalg.norm(corpus.mixtures, axis=1, keepdims=True)
    while len(rows) < n_pairs:
        a, b = sorted(int(v) for v in rng.choice(top, size=2, replace=False))
        if (a, b) in seen:
            continue
        seen.add((a, b))
        rows.append((corpus.words[a], corpus.words[b], float(unit[a] @ unit[b])))
    return rows


@dataclass
class Taxonomy:
    words: list[str]
    parent: np.ndarray  # -1 for the root
    level: np.ndarray

    def edges(self) -> list[tuple[str, str]]:
        """(child, parent) word pairs."""
        return [(self.words[c], self.words[p]) for c, p in enumerate(self.parent) if p >= 0]

    def ancestors(self, node: int) -> list[int]:
        out = []
        while self.parent[node] >= 0:
            node = int(self.parent[node])
            out.append(node)
        return out


def build_taxonomy(branching=(4, 6, 6, 6)) -> Taxonomy:
    """A single root over levels of sizes 4, 24, 144, 864 by default; ids are ordered by level."""
    parent = [-1]
    level = [0]
    prev = [0]
    for depth, b in enumerate(branching):
        cur = []
        for p in prev:
            for _ in range(b):
                cur.append(len(parent))
                parent.append(p)
                level.append(depth + 1)
        prev = cur
    return Taxonomy(word_names(len(parent)), np.array(parent), np.array(level))


def taxonomy_corpus(path, tax: Taxonomy, n_lines=60_000, siblings=3, seed=0) -> int:
    """Each line: a random leaf, all of its ancestors and ``siblings`` leaves drawn from the parent's children.

    Ancestors therefore co-occur with every line below them, the single root
    with all lines. Returns the number of tokens written.
    """
    rng = np.random.default_rng(seed)
    leaves = np.flatnonzero(tax.level == tax.level.max())
    children = {}
    for node, p in enumerate(tax.parent):
        children.setdefault(int(p), []).append(node)
    n_tokens = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for leaf in rng.choice(leaves, size=n_lines):
            anc = tax.ancestors(int(leaf))
            line = [int(leaf), *anc, *rng.choice(children[anc[0]], size=siblings).tolist()]
            fh.write(" ".join(tax.words[line[i]] for i in rng.permutation(len(line))) + "\n")
            n_tokens += len(line)
    return n_tokens
