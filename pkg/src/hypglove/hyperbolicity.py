"""Sampled Gromov four-point hyperbolicity of word metrics.

A metric source exposes ``size`` and ``distances(i, j)`` returning
``(d, valid, clamped)`` arrays, so sampling code is shared between the
co-occurrence-induced metric, explicit point sets and distance matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import CoocMatrix
from .hfunc import HFunction

SMOOTHING = ("none", "plus_one")
RETRY_FACTOR = 100


def tuple_delta(d_xy, d_zt, d_xz, d_yt, d_xt, d_yz):
    """Half the gap between the two largest of the three pairing sums."""
    sums = np.stack([
        np.asarray(d_xy, dtype=np.float64) + d_zt,
        np.asarray(d_xz, dtype=np.float64) + d_yt,
        np.asarray(d_xt, dtype=np.float64) + d_yz,
    ], axis=-1)
    sums.sort(axis=-1)
    return 0.5 * (sums[..., 2] - sums[..., 1])


def induced_argument(xi, xj, xij, smoothing="plus_one"):
    """log(X_i X_j / X_ij), or with every log(x) replaced by log(1 + x)."""
    xi, xj, xij = (np.asarray(a, dtype=np.float64) for a in (xi, xj, xij))
    if smoothing == "plus_one":
        return np.log1p(xi) + np.log1p(xj) - np.log1p(xij)
    if smoothing != "none":
        raise ValueError(f"unknown smoothing {smoothing!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log(xi) + np.log(xj) - np.log(xij)


def induced_from_argument(arg, h: HFunction):
    """h^-1 of ``arg`` clamped up to h's range minimum; returns (d, valid, clamped)."""
    arg = np.asarray(arg, dtype=np.float64)
    valid = np.isfinite(arg)
    clamped = valid & (arg < h.domain_min)
    safe = np.where(valid, np.maximum(arg, h.domain_min), h.domain_min if np.isfinite(h.domain_min) else 0.0)
    return h.inverse(safe), valid, clamped


def induced_distance(i: int, j: int, cooc: CoocMatrix, h: HFunction, smoothing="plus_one"):
    """h^-1(log(X_i X_j / X_ij)); NaN when undefined (X_ij = 0 without smoothing)."""
    if i == j:
        raise ValueError("induced distance needs two different words")
    d, valid, _ = CoocMetric(cooc, h, smoothing).distances(np.array([i]), np.array([j]))
    return float(d[0]) if valid[0] else float("nan")


class CoocMetric:
    """Distance induced on word ids by co-occurrence counts; optionally the ``top`` most frequent ids only."""

    def __init__(self, cooc: CoocMatrix, h: HFunction, smoothing="plus_one", top=None):
        if smoothing not in SMOOTHING:
            raise ValueError(f"unknown smoothing {smoothing!r}")
        self.cooc = cooc
        self.h = h
        self.smoothing = smoothing
        self.size = cooc.vocab_size if top is None else min(int(top), cooc.vocab_size)

    def distances(self, i, j):
        xs = self.cooc.row_sums
        arg = induced_argument(xs[i], xs[j], self.cooc.lookup(i, j), self.smoothing)
        return induced_from_argument(arg, self.h)


class PointMetric:
    """Explicit points with a vectorised distance callable ``dist(x, y)``."""

    def __init__(self, points, dist):
        self.points = np.asarray(points, dtype=np.float64)
        self.dist = dist
        self.size = len(self.points)

    def distances(self, i, j):
        d = np.asarray(self.dist(self.points[i], self.points[j]), dtype=np.float64)
        return d, np.ones(d.shape, bool), np.zeros(d.shape, bool)


class MatrixMetric:
    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("distance matrix must be square")
        self.size = len(self.matrix)

    def distances(self, i, j):
        d = self.matrix[i, j]
        return d, np.isfinite(d), np.zeros(d.shape, bool)


@dataclass
class DeltaEstimate:
    delta_avg: float
    d_avg: float
    ratio: float
    n_samples: int
    n_pairs: int
    clamp_count: int
    delta_max: float


def _ratio(delta, d):
    if d > 0:
        return 2.0 * delta / d
    return 0.0 if delta == 0 else float("inf")


def _sample_rows(source, rng, n, width, batch):
    """Up to ``n`` rows of ``width`` distinct ids whose pairwise distances are all defined."""
    pairs = [(a, b) for a in range(width) for b in range(a + 1, width)]
    kept_d, kept_c = [], []
    have = attempts = 0
    cap = RETRY_FACTOR * n
    while have < n and attempts < cap:
        m = min(batch, cap - attempts, max(64, 2 * (n - have)))
        ids = rng.integers(0, source.size, size=(m, width))
        attempts += m
        srt = np.sort(ids, axis=1)
        ids = ids[np.all(srt[:, 1:] != srt[:, :-1], axis=1)]
        d, ok, clamp = source.distances(ids[:, [a for a, _ in pairs]], ids[:, [b for _, b in pairs]])
        good = np.all(ok, axis=1)
        kept_d.append(d[good])
        kept_c.append(clamp[good])
        have += int(good.sum())
    if not kept_d:
        return np.zeros((0, len(pairs))), np.zeros((0, len(pairs)), bool)
    return np.concatenate(kept_d)[:n], np.concatenate(kept_c)[:n]


def estimate_delta(source, n_tuples=100_000, n_pairs=100_000, seed=0, batch=65_536) -> DeltaEstimate:
    """Mean four-point delta over sampled tuples of distinct ids, and mean pair distance.

    Tuples and pairs draw from independent substreams of ``seed``; tuples with
    an undefined distance are resampled, up to 100 attempts per requested sample.
    """
    if source.size < 4:
        raise ValueError("need at least 4 usable words to sample 4-tuples")
    tuple_seq, pair_seq = np.random.SeedSequence(seed).spawn(2)
    d6, c6 = _sample_rows(source, np.random.default_rng(tuple_seq), n_tuples, 4, batch)
    d2, c2 = _sample_rows(source, np.random.default_rng(pair_seq), n_pairs, 2, batch)
    if len(d6) == 0 or len(d2) == 0:
        raise ValueError("could not sample any tuple with all distances defined")
    # pair order in d6: (0,1) (0,2) (0,3) (1,2) (1,3) (2,3) for points x, y, z, t
    deltas = tuple_delta(d6[:, 0], d6[:, 5], d6[:, 1], d6[:, 4], d6[:, 2], d6[:, 3])
    delta_avg = float(np.mean(deltas))
    d_avg = float(np.mean(d2[:, 0]))
    return DeltaEstimate(
        delta_avg, d_avg, _ratio(delta_avg, d_avg), len(deltas), len(d2),
        int(c6.sum() + c2.sum()), float(np.max(deltas)),
    )
