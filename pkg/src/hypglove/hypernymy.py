"""Generic/specific orientation of 2D factors and the Gaussian is-a score.

Each 2D factor is Mobius-translated so the midpoint of the generic and
specific word means sits at the origin, then rotated so the generic mean lies
on the positive vertical axis. Mapping to the half-plane then turns every
factor into a 1D Gaussian whose standard deviation grows with generality.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import manifold

log = logging.getLogger(__name__)

SIGMA_MAX = 1.0 / manifold.EPS_BALL
DEGENERATE_NORM = 1e-12  # below this the generic direction is rounding noise


@dataclass
class GenericSpecificSets:
    generic: np.ndarray
    specific: np.ndarray
    provenance: str
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        self.generic = np.asarray(self.generic, dtype=np.int64)
        self.specific = np.asarray(self.specific, dtype=np.int64)
        if len(self.generic) == 0 or len(self.specific) == 0:
            raise ValueError("generic and specific sets must both be nonempty")
        if np.intersect1d(self.generic, self.specific).size:
            raise ValueError("generic and specific sets overlap")

    def swapped(self) -> "GenericSpecificSets":
        return GenericSpecificSets(self.specific, self.generic, self.provenance, dict(self.report))


def select_sets_unsupervised(vocab_size: int, n: int = 5000, pool: int = 50000) -> GenericSpecificSets:
    """The ``n`` most frequent ids as generic, the ``n`` least frequent of the top ``pool`` as specific."""
    if vocab_size < pool:
        raise ValueError(f"vocabulary has {vocab_size} words; pass a pool of at most {vocab_size}")
    if not 1 <= n <= pool // 2:
        raise ValueError("need 1 <= n <= pool / 2")
    return GenericSpecificSets(np.arange(n), np.arange(pool - n, pool), "unsupervised_topk", {"n": n, "pool": pool})


def _read_word_list(path):
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def select_sets_from_files(generic_path, specific_path, index: dict[str, int]) -> GenericSpecificSets:
    """Word-per-line files; OOV words are skipped and words in both lists dropped from both."""
    generic_words = _read_word_list(generic_path)
    specific_words = _read_word_list(specific_path)
    both = set(generic_words) & set(specific_words)
    report = {"overlap_removed": sorted(both)}
    ids = []
    for name, words in (("generic", generic_words), ("specific", specific_words)):
        kept = [index[w] for w in dict.fromkeys(words) if w in index and w not in both]
        oov = sum(1 for w in dict.fromkeys(words) if w not in index)
        report[f"{name}_oov"] = oov
        report[f"{name}_listed"] = len(dict.fromkeys(words))
        if oov:
            log.warning("%d of %d %s words are out of vocabulary", oov, len(dict.fromkeys(words)), name)
        if not kept:
            raise ValueError(f"{name} word set is empty after vocabulary mapping")
        ids.append(kept)
    if both:
        log.warning("%d words listed as both generic and specific were dropped", len(both))
    return GenericSpecificSets(ids[0], ids[1], "wordlist_files", report)


@dataclass
class IsometryTransform:
    """Per-factor translation centres ``m`` (p, 2) and unit directions ``u`` (p, 2)."""

    m: np.ndarray
    u: np.ndarray

    @classmethod
    def identity(cls, p: int) -> "IsometryTransform":
        return cls(np.zeros((p, 2)), np.tile([0.0, 1.0], (p, 1)))


def fit_isometry(points, sets: GenericSpecificSets) -> IsometryTransform:
    """Fit centre and rotation from Euclidean means of generic and specific points.

    ``points`` holds the (V, p, 2) target vectors.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 3 or points.shape[2] != 2:
        raise ValueError("isometry fitting needs (V, p, 2) points")
    g = points[sets.generic].mean(axis=0)
    s = points[sets.specific].mean(axis=0)
    m = manifold.project_to_ball(0.5 * (g + s))
    v = manifold.mobius_add(-m, g)
    norm = np.linalg.norm(v, axis=-1)
    degenerate = norm <= DEGENERATE_NORM
    if np.any(degenerate):
        log.warning("generic mean coincides with the centre in factors %s; using u=(0,1)",
                    np.flatnonzero(degenerate).tolist())
    u = np.where(degenerate[:, None], np.array([0.0, 1.0]), v / np.where(degenerate, 1.0, norm)[:, None])
    return IsometryTransform(m, u)


def apply_isometry(x, T: IsometryTransform):
    """Translate each factor by the inverse of ``m`` then rotate ``u`` onto (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2:] != T.m.shape:
        raise ValueError(f"point shape {x.shape} does not match transform {T.m.shape}")
    return manifold.rotate_about_origin(T.u, manifold.mobius_add(-T.m, x))


@dataclass
class GaussianEmbedding:
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        if self.mu.shape != self.sigma.shape:
            raise ValueError("mu and sigma must have equal shape")
        if np.any(~(self.sigma > 0)):
            raise ValueError("sigma must be positive")

    def __getitem__(self, idx) -> "GaussianEmbedding":
        return GaussianEmbedding(self.mu[idx], self.sigma[idx])


def to_gaussian(x, T: IsometryTransform | None = None) -> GaussianEmbedding:
    """Diagonal Gaussian per point: half-plane image (a, y) gives mu = sqrt(2) a, sigma = y."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != 2:
        raise ValueError("Gaussian mapping needs 2D factors")
    if T is not None:
        x = apply_isometry(x, T)
    z = manifold._halfplane_coords(x)
    sigma = z[..., 1]
    over = sigma > SIGMA_MAX
    if np.any(over):
        log.warning("%d factors lie next to the boundary point (0, 1); sigma clamped to %g",
                    int(np.sum(over)), SIGMA_MAX)
        sigma = np.minimum(sigma, SIGMA_MAX)
    return GaussianEmbedding(np.sqrt(2.0) * z[..., 0], sigma)


def from_gaussian(g: GaussianEmbedding):
    """Inverse of :func:`to_gaussian` without the transform: back to transformed disk points."""
    return manifold.halfplane_to_disk(np.stack([g.mu / np.sqrt(2.0), g.sigma], axis=-1))


def isa_score(v: GaussianEmbedding, w: GaussianEmbedding):
    """sum_i log sigma^w_i - log sigma^v_i: positive when ``w`` is the more general word.

    Each sigma is split as m * 2**e so that scaling both sides by a power of
    two leaves the score bitwise unchanged.
    """
    mw, ew = np.frexp(w.sigma)
    mv, ev = np.frexp(v.sigma)
    return np.sum((np.log(mw) - np.log(mv)) + (ew - ev) * np.log(2.0), axis=-1)


def fisher_distance(g1: GaussianEmbedding, g2: GaussianEmbedding):
    a = np.stack([g1.mu / np.sqrt(2.0), g1.sigma], axis=-1)
    b = np.stack([g2.mu / np.sqrt(2.0), g2.sigma], axis=-1)
    d = manifold.halfplane_distance(a, b)
    return np.sqrt(np.sum(2.0 * d * d, axis=-1))


def kl_1d(mu_p, sigma_p, mu_q, sigma_q):
    """KL(N(mu_p, sigma_p^2) || N(mu_q, sigma_q^2))."""
    mu_p, sigma_p, mu_q, sigma_q = (np.asarray(a, dtype=np.float64) for a in (mu_p, sigma_p, mu_q, sigma_q))
    return np.log(sigma_q / sigma_p) + (sigma_p**2 + (mu_p - mu_q) ** 2) / (2.0 * sigma_q**2) - 0.5


def kl_diag(g1: GaussianEmbedding, g2: GaussianEmbedding):
    """KL between diagonal Gaussians: the per-coordinate 1D divergences summed."""
    return np.sum(kl_1d(g1.mu, g1.sigma, g2.mu, g2.sigma), axis=-1)
