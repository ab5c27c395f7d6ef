"""Similarity and entailment benchmarks with out-of-vocabulary accounting."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from . import manifold
from .errors import FormatError
from .hypernymy import GaussianEmbedding, IsometryTransform, isa_score, to_gaussian
from .modelio import WordVectors
from .trainer import EmbeddingTable

RESAMPLE_CAP = 100


def spearman(xs, ys) -> float:
    """Pearson correlation of average ranks; NaN when either side has no rank variance."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("spearman needs two 1-D sequences of equal length")
    if len(xs) < 2:
        raise ValueError("spearman needs at least two observations")
    rx = rankdata(xs) - 0.5 * (len(xs) + 1)
    ry = rankdata(ys) - 0.5 * (len(ys) + 1)
    den = np.sqrt(np.dot(rx, rx) * np.dot(ry, ry))
    if den == 0:
        return float("nan")
    return float(np.clip(np.dot(rx, ry) / den, -1.0, 1.0))


@dataclass
class PairDataset:
    """Rows of (word1, word2, value): graded similarity, graded entailment or 0/1 labels."""

    rows: list[tuple[str, str, float]]

    def __len__(self):
        return len(self.rows)


def load_pair_dataset(path, lowercase=False) -> PairDataset:
    """``word1<TAB>word2<TAB>value`` lines; a non-numeric first line is taken as a header."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t") if "\t" in line else line.split()
            if len(parts) < 3:
                raise FormatError(f"{path}:{lineno}: expected 'word1<TAB>word2<TAB>value'")
            try:
                value = float(parts[2])
            except ValueError as exc:
                if lineno == 1:
                    continue
                raise FormatError(f"{path}:{lineno}: non-numeric value {parts[2]!r}") from exc
            if not np.isfinite(value):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            w1, w2 = parts[0].strip(), parts[1].strip()
            if lowercase:
                w1, w2 = w1.lower(), w2.lower()
            rows.append((w1, w2, value))
    if not rows:
        raise FormatError(f"{path}: no data rows")
    return PairDataset(rows)


@dataclass
class EvalResult:
    metric: str
    value: float
    n_used: int
    n_dropped: int
    details: list[dict] = field(default_factory=list)


def _resolve_pairs(dataset: PairDataset, index):
    i = np.array([index.get(r[0], -1) for r in dataset.rows], dtype=np.int64)
    j = np.array([index.get(r[1], -1) for r in dataset.rows], dtype=np.int64)
    gold = np.array([r[2] for r in dataset.rows], dtype=np.float64)
    return i, j, gold, (i >= 0) & (j >= 0)


def pair_similarity(model, i, j):
    """-product distance on target vectors, or cosine for Euclidean vectors."""
    if isinstance(model, WordVectors):
        a = model.vectors[i]
        b = model.vectors[j]
        den = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        return np.sum(a * b, axis=1) / np.where(den > 0, den, 1.0)
    return -manifold.product_distance(model.target[i], model.target[j])


def _details(dataset, used, scores):
    out = []
    full = np.full(len(dataset), np.nan)
    full[used] = scores
    for n, (w1, w2, gold) in enumerate(dataset.rows):
        rec = {"row": n, "word1": w1, "word2": w2, "gold": gold, "used": bool(used[n])}
        if used[n]:
            rec["score"] = float(full[n])
        out.append(rec)
    return out


def eval_similarity(dataset: PairDataset, model) -> EvalResult:
    i, j, gold, used = _resolve_pairs(dataset, model.word_index())
    if not used.any():
        raise ValueError("every dataset row has an out-of-vocabulary word")
    scores = pair_similarity(model, i[used], j[used])
    rho = spearman(scores, gold[used]) if used.sum() >= 2 else float("nan")
    return EvalResult("spearman", rho, int(used.sum()), int((~used).sum()), _details(dataset, used, scores))


def gaussians(table: EmbeddingTable, T: IsometryTransform) -> GaussianEmbedding:
    return to_gaussian(table.target, T)


def entailment_scores(dataset: PairDataset, table: EmbeddingTable, T: IsometryTransform):
    """isa(hyponym, hypernym) for in-vocabulary rows; returns (scores, gold, used)."""
    i, j, gold, used = _resolve_pairs(dataset, table.word_index())
    g = gaussians(table, T)
    scores = isa_score(g[i[used]], g[j[used]])
    return scores, gold, used


def eval_hyperlex(dataset: PairDataset, table: EmbeddingTable, T: IsometryTransform) -> EvalResult:
    scores, gold, used = entailment_scores(dataset, table, T)
    if not used.any():
        raise ValueError("every dataset row has an out-of-vocabulary word")
    rho = spearman(scores, gold[used]) if used.sum() >= 2 else float("nan")
    return EvalResult("spearman", rho, int(used.sum()), int((~used).sum()), _details(dataset, used, scores))


def best_threshold(scores, labels):
    """Threshold maximising accuracy of ``score > threshold``; the smallest one wins ties.

    Candidates are midpoints between adjacent distinct sorted scores plus one
    value below and one above the whole range.
    """
    s = np.unique(scores)
    cands = np.concatenate([[s[0] - 1.0], 0.5 * (s[1:] + s[:-1]), [s[-1] + 1.0]])
    acc = np.mean((scores[None, :] > cands[:, None]) == labels[None, :].astype(bool), axis=1)
    return float(cands[int(np.argmax(acc))])


def threshold_accuracy(scores, labels, holdout=0.02, repeats=1000, seed=0) -> float:
    """Mean test accuracy of a threshold tuned on a random holdout fraction, over repeats."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n = len(scores)
    size = max(2, int(round(holdout * n)))
    if size >= n:
        raise ValueError("holdout leaves no test rows")
    if labels.all() or not labels.any():
        raise ValueError("labels contain a single class")
    accs = np.empty(repeats)
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(repeats)):
        rng = np.random.default_rng(child)
        for _ in range(RESAMPLE_CAP):
            pick = rng.permutation(n)
            held = pick[:size]
            if 0 < labels[held].sum() < size:
                break
        else:
            raise ValueError(f"no two-class holdout of size {size} after {RESAMPLE_CAP} draws")
        test = pick[size:]
        theta = best_threshold(scores[held], labels[held])
        accs[r] = np.mean((scores[test] > theta) == labels[test])
    return float(accs.mean())


def eval_wbless(dataset: PairDataset, table: EmbeddingTable, T: IsometryTransform,
                holdout=0.02, repeats=1000, seed=0) -> EvalResult:
    scores, gold, used = entailment_scores(dataset, table, T)
    if not used.any():
        raise ValueError("every dataset row has an out-of-vocabulary word")
    acc = threshold_accuracy(scores, gold[used] > 0.5, holdout, repeats, seed)
    return EvalResult("accuracy", acc, int(used.sum()), int((~used).sum()), _details(dataset, used, scores))


def fmt(value) -> str:
    """Six significant digits for floats; integers and strings unchanged."""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".6g")
    return str(value)


def summary_line(fields) -> str:
    return "\t".join(fmt(v) for v in fields)


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
