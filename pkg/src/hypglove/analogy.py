"""Analogy queries a : b :: c : ? via gyro-parallelograms and geodesic interpolation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import manifold
from ._jit import HAS_NUMBA, njit, prange
from .errors import FormatError
from .modelio import WordVectors
from .trainer import EmbeddingTable

T_GRID = tuple(round(0.1 * i, 1) for i in range(11))
METRICS = ("poincare", "cosine")


def gyro_parallelogram(a, b, c):
    """The two hyperbolic analogues of c + (b - a) and b + (c - a), factor-wise."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    d1 = manifold.mobius_add(c, manifold.gyration(c, -a, manifold.mobius_add(-a, b)))
    d2 = manifold.mobius_add(b, manifold.gyration(b, -a, manifold.mobius_add(-a, c)))
    return d1, d2


def analogy_answer(a, b, c, t=0.3):
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    d1, d2 = gyro_parallelogram(a, b, c)
    return manifold.geodesic_point(d1, d2, t)


def combined_points(table: EmbeddingTable, use: str = "w"):
    """Target vectors (``w``) or the gyro-midpoint of target and context (``w+c``)."""
    if use == "w":
        return table.target
    if use == "w+c":
        return manifold.geodesic_point(table.target, table.context, 0.5)
    raise ValueError(f"unknown vector choice {use!r}")


@njit(cache=True, nogil=True)
def _factor_distance(x, y):
    xx = 0.0
    yy = 0.0
    s = 0.0
    for q in range(x.shape[0]):
        xx += x[q] * x[q]
        yy += y[q] * y[q]
        s += (x[q] - y[q]) ** 2
    z = max(2.0 * s / ((1.0 - xx) * (1.0 - yy)), 0.0)
    return math.log1p(z + math.sqrt(z * (z + 2.0)))


@njit(cache=True, parallel=True)
def _scan_poincare(queries, points, exclude):
    n_q = queries.shape[0]
    out = np.full(n_q, -1, dtype=np.int64)
    for qi in prange(n_q):
        best = np.inf
        for v in range(points.shape[0]):
            skip = False
            for e in range(exclude.shape[1]):
                if exclude[qi, e] == v:
                    skip = True
            if skip:
                continue
            d2 = 0.0
            for l in range(points.shape[1]):
                dl = _factor_distance(queries[qi, l], points[v, l])
                d2 += dl * dl
            if d2 < best:
                best = d2
                out[qi] = v
    return out


@njit(cache=True, parallel=True)
def _scan_max_score(scores_q, cand, valid, exclude):
    """argmax over v of scores_q[qi] . cand[v] for valid, non-excluded v."""
    n_q = scores_q.shape[0]
    out = np.full(n_q, -1, dtype=np.int64)
    for qi in prange(n_q):
        best = -np.inf
        for v in range(cand.shape[0]):
            if not valid[v]:
                continue
            skip = False
            for e in range(exclude.shape[1]):
                if exclude[qi, e] == v:
                    skip = True
            if skip:
                continue
            s = 0.0
            for q in range(cand.shape[1]):
                s += scores_q[qi, q] * cand[v, q]
            if s > best:
                best = s
                out[qi] = v
    return out


def _exclude_array(exclude, n_q):
    if exclude is None:
        return np.full((n_q, 1), -1, dtype=np.int64)
    arr = np.asarray(exclude, dtype=np.int64)
    if arr.ndim == 1:
        arr = np.broadcast_to(arr, (n_q, arr.shape[0]))
    if arr.shape[1] == 0:
        return np.full((n_q, 1), -1, dtype=np.int64)
    return np.ascontiguousarray(arr)


def _masked_argmin(values, exclude, valid=None):
    values = values.copy()
    if valid is not None:
        values[:, ~valid] = np.inf
    rows = np.repeat(np.arange(values.shape[0]), exclude.shape[1])
    cols = exclude.ravel()
    keep = cols >= 0
    values[rows[keep], cols[keep]] = np.inf
    out = np.argmin(values, axis=1)
    out[~np.isfinite(values[np.arange(len(out)), out])] = -1
    return out


def _unit_rows(x):
    norm = np.linalg.norm(x, axis=1)
    valid = norm > 0
    unit = np.zeros_like(x)
    unit[valid] = x[valid] / norm[valid, None]
    return unit, valid


def nearest_words(queries, points, metric="poincare", exclude=None, batch=256):
    """Nearest vocabulary entry for each query point; ties go to the lowest id.

    ``queries`` is (Q, p, k), ``points`` is (V, p, k) and ``exclude`` holds the
    ids to skip, either one list for every query or a (Q, E) array padded
    with -1. Returns -1 where every candidate was excluded.
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    if metric not in METRICS:
        raise ValueError(f"unknown neighbour metric {metric!r}")
    n_q = queries.shape[0]
    exclude = _exclude_array(exclude, n_q)
    if metric == "cosine":
        q_unit, _ = _unit_rows(queries.reshape(n_q, -1))
        c_unit, valid = _unit_rows(points.reshape(points.shape[0], -1))
        return _max_score(q_unit, c_unit, valid, exclude, batch)
    if HAS_NUMBA:
        return _scan_poincare(queries, points, exclude)
    out = np.empty(n_q, dtype=np.int64)
    for lo in range(0, n_q, batch):
        q = queries[lo:lo + batch, None]
        d = manifold.ball_distance(q, points[None])
        out[lo:lo + batch] = _masked_argmin(np.sum(d * d, axis=-1), exclude[lo:lo + batch])
    return out


def _max_score(weights, cand, valid, exclude, batch=256):
    if HAS_NUMBA:
        return _scan_max_score(weights, cand, valid, exclude)
    out = np.empty(weights.shape[0], dtype=np.int64)
    for lo in range(0, weights.shape[0], batch):
        scores = weights[lo:lo + batch] @ cand.T
        out[lo:lo + batch] = _masked_argmin(-scores, exclude[lo:lo + batch], valid)
    return out


def nearest_word(q, points, metric="poincare", exclude=()):
    """Single-query form of :func:`nearest_words`; raises if nothing is left."""
    res = int(nearest_words(np.asarray(q, dtype=np.float64)[None], points, metric, [list(exclude)])[0])
    if res < 0:
        raise ValueError("no candidate words left after exclusion")
    return res


def three_cos_add_batch(a, b, c, vectors):
    """3COSADD answers for id arrays ``a``, ``b``, ``c`` over Euclidean ``vectors``."""
    unit, valid = _unit_rows(np.asarray(vectors, dtype=np.float64))
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    c = np.asarray(c, dtype=np.int64)
    # cos(d,c) + cos(d,b) - cos(d,a) is linear in the unit candidate d
    weights = unit[c] + unit[b] - unit[a]
    exclude = np.stack([a, b, c], axis=1)
    return _max_score(np.ascontiguousarray(weights), unit, valid, exclude)


def three_cos_add(a: int, b: int, c: int, vectors) -> int:
    res = int(three_cos_add_batch([a], [b], [c], vectors)[0])
    if res < 0:
        raise ValueError("no candidate words left after exclusion")
    return res


@dataclass
class AnalogyDataset:
    rows: list[tuple[str, str, str, str]]
    sections: list[str]

    def split_of(self, idx: int) -> str:
        return "syntactic" if self.sections[idx].startswith("gram") else "semantic"


def load_analogy_dataset(path, lowercase=False) -> AnalogyDataset:
    """Lines ``a b c gold``; ``: name`` lines start a section (``gram*`` = syntactic)."""
    rows, sections = [], []
    section = ""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith(":"):
                section = line[1:].strip()
                continue
            parts = line.lower().split() if lowercase else line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 words, got {len(parts)}")
            rows.append(tuple(parts))
            sections.append(section)
    return AnalogyDataset(rows, sections)


@dataclass
class SplitScore:
    correct: int = 0
    total: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else float("nan")


@dataclass
class AnalogyResult:
    splits: dict[str, SplitScore] = field(default_factory=dict)
    dropped: int = 0
    details: list[dict] = field(default_factory=list)

    @property
    def accuracy(self) -> float:
        return self.splits["total"].accuracy


@dataclass
class ResolvedQueries:
    ids: np.ndarray  # (Q, 4): a, b, c, gold
    rows: np.ndarray  # index into the dataset
    split: np.ndarray  # True for syntactic
    dropped: list[int]


def resolve_queries(dataset: AnalogyDataset, index: dict[str, int]) -> ResolvedQueries:
    ids, rows, split, dropped = [], [], [], []
    for n, words in enumerate(dataset.rows):
        got = [index.get(w, -1) for w in words]
        if min(got) < 0:
            dropped.append(n)
            continue
        ids.append(got)
        rows.append(n)
        split.append(dataset.split_of(n) == "syntactic")
    return ResolvedQueries(
        np.array(ids, dtype=np.int64).reshape(-1, 4), np.array(rows, dtype=np.int64),
        np.array(split, dtype=bool), dropped,
    )


def predict(model, ids, metric="poincare", t=0.3, use="w"):
    """Predicted answer ids for (Q, >=3) query id rows."""
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        return np.zeros(0, dtype=np.int64)
    if isinstance(model, WordVectors):
        return three_cos_add_batch(ids[:, 0], ids[:, 1], ids[:, 2], model.vectors)
    points = combined_points(model, use)
    answers = analogy_answer(points[ids[:, 0]], points[ids[:, 1]], points[ids[:, 2]], t)
    return nearest_words(answers, points, metric, ids[:, :3])


def eval_analogy(dataset: AnalogyDataset, model, metric="poincare", t=0.3, use="w") -> AnalogyResult:
    """Accuracy per split; rows with out-of-vocabulary words are dropped and counted."""
    q = resolve_queries(dataset, model.word_index())
    pred = predict(model, q.ids, metric, t, use)
    words = model.words
    result = AnalogyResult(
        {"semantic": SplitScore(), "syntactic": SplitScore(), "total": SplitScore()}, len(q.dropped)
    )
    hits = pred == q.ids[:, 3] if len(pred) else np.zeros(0, dtype=bool)
    for name, mask in (("semantic", ~q.split), ("syntactic", q.split), ("total", np.ones(len(hits), bool))):
        result.splits[name] = SplitScore(int(np.sum(hits[mask])), int(np.sum(mask)))
    answer = {int(r): (int(p), bool(h)) for r, p, h in zip(q.rows, pred, hits)}
    for n, row in enumerate(dataset.rows):
        rec = {"row": n, "words": list(row), "split": dataset.split_of(n)}
        if n in answer:
            p, h = answer[n]
            rec.update(used=True, predicted=words[p] if p >= 0 else None, correct=h)
        else:
            rec.update(used=False)
        result.details.append(rec)
    return result


@dataclass
class CrossValidation:
    t: tuple[float, float]
    test_accuracy: tuple[float, float]
    grid_accuracy: np.ndarray  # (2, len(grid)) accuracy of each half at each t


def cross_validate_t(dataset: AnalogyDataset, model: EmbeddingTable, grid=T_GRID, seed=0,
                     metric="poincare", use="w") -> CrossValidation:
    """Pick t on one random half of the queries and score it on the other, both ways.

    Ties in training accuracy go to the smaller t.
    """
    q = resolve_queries(dataset, model.word_index())
    n = len(q.ids)
    if n < 2:
        raise ValueError("need at least two in-vocabulary queries to cross-validate")
    perm = np.random.default_rng(seed).permutation(n)
    halves = (np.sort(perm[: n // 2]), np.sort(perm[n // 2:]))
    grid = np.asarray(grid, dtype=np.float64)
    hits = np.stack([predict(model, q.ids, metric, float(t), use) == q.ids[:, 3] for t in grid])
    acc = np.stack([hits[:, h].mean(axis=1) for h in halves])
    chosen = [int(np.argmax(acc[f])) for f in range(2)]  # argmax keeps the first maximum
    return CrossValidation(
        (float(grid[chosen[0]]), float(grid[chosen[1]])),
        (float(acc[1, chosen[0]]), float(acc[0, chosen[1]])),
        acc,
    )
