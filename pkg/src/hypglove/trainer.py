"""Metric-space GloVe over products of Poincare balls.

The objective, summed over both orientations of every stored co-occurrence, is

    f(X_ij) * (-h(d(w_i, c_j)) + b_i + b~_j - log X_ij) ** 2

with d the product-of-balls distance between target vector w_i and context
vector c_j. Optimisation uses Riemannian SGD or Riemannian Adagrad.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _train_kernels as K
from . import manifold
from ._jit import set_num_threads
from .corpus import CoocMatrix, Vocab, glove_weight
from .hfunc import TRAINABLE, HFunction, default_lr

log = logging.getLogger(__name__)

INIT_RADIUS = 1e-3
EPS_ADA = 1e-8


@dataclass
class EmbeddingTable:
    """Target/context product points (V, p, k) and their biases (V,)."""

    target: np.ndarray
    context: np.ndarray
    bias_target: np.ndarray
    bias_context: np.ndarray
    words: tuple[str, ...] | None = None
    h: HFunction | None = None

    def __post_init__(self):
        if self.target.shape != self.context.shape or self.target.ndim != 3:
            raise ValueError("target and context must share shape (V, p, k)")
        V = self.target.shape[0]
        if self.bias_target.shape != (V,) or self.bias_context.shape != (V,):
            raise ValueError("bias arrays must have shape (V,)")
        if self.words is not None and len(self.words) != V:
            raise ValueError("words must match the table size")

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.target.shape

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(
            self.target.copy(), self.context.copy(), self.bias_target.copy(),
            self.bias_context.copy(), self.words, self.h,
        )

    def word_index(self) -> dict[str, int]:
        if self.words is None:
            raise ValueError("table carries no words")
        return {w: i for i, w in enumerate(self.words)}

    def equals(self, other: "EmbeddingTable") -> bool:
        """Bitwise equality of all arrays and metadata."""
        return (
            self.words == other.words
            and self.h == other.h
            and all(
                a.shape == b.shape and a.tobytes() == b.tobytes()
                for a, b in zip(self._arrays(), other._arrays())
            )
        )

    def _arrays(self):
        return (self.target, self.context, self.bias_target, self.bias_context)


@dataclass
class AdagradState:
    target: np.ndarray
    context: np.ndarray
    bias_target: np.ndarray
    bias_context: np.ndarray

    @classmethod
    def zeros(cls, V: int, p: int) -> "AdagradState":
        return cls(np.zeros((V, p)), np.zeros((V, p)), np.zeros(V), np.zeros(V))


@dataclass
class TrainConfig:
    p: int = 10
    k: int = 2
    h: HFunction = field(default_factory=lambda: HFunction("cosh_pow", 2))
    lr: float | None = None
    epochs: int = 50
    optimizer: str = "radagrad"
    x_max: float = 100.0
    alpha: float = 0.75
    seed: int = 0
    mode: str = "deterministic"
    threads: int = 1

    def __post_init__(self):
        if self.h.kind not in TRAINABLE:
            raise ValueError(f"h={self.h.name} cannot be trained; use square or cosh^K")
        if self.lr is None:
            self.lr = default_lr(self.h)
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.optimizer not in ("rsgd", "radagrad"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.mode not in ("hogwild", "deterministic"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class TrainResult:
    table: EmbeddingTable
    epoch_losses: list[float]
    state: AdagradState


def random_ball_points(rng, shape, radius=INIT_RADIUS):
    """Uniform samples in the Euclidean ball of ``radius``; shape ends with k."""
    k = shape[-1]
    direction = rng.standard_normal(shape)
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    r = radius * rng.random(shape[:-1]) ** (1.0 / k)
    return direction * r[..., None]


def fresh_table(V: int, p: int, k: int, seed=0, words=None, h=None) -> EmbeddingTable:
    rng = np.random.default_rng(seed)
    target = random_ball_points(rng, (V, p, k))
    context = random_ball_points(rng, (V, p, k))
    return EmbeddingTable(target, context, np.zeros(V), np.zeros(V), words, h)


def init_trick(restricted: EmbeddingTable, restricted_vocab: Vocab, full_vocab: Vocab, seed=0) -> EmbeddingTable:
    """Warm start a full-vocabulary table from a model trained on a sub-vocabulary."""
    V, (_, p, k) = len(full_vocab), restricted.shape
    table = fresh_table(V, p, k, seed, words=full_vocab.words, h=restricted.h)
    for word, i in full_vocab.index.items():
        j = restricted_vocab.get(word)
        if j < 0:
            continue
        table.target[i] = restricted.target[j]
        table.context[i] = restricted.context[j]
        table.bias_target[i] = restricted.bias_target[j]
        table.bias_context[i] = restricted.bias_context[j]
    return table


def loss_term(entry, table: EmbeddingTable, h: HFunction, x_max=100.0, alpha=0.75) -> float:
    """f(X_ij) * (-h(d(w_i, c_j)) + b_i + b~_j - log X_ij)^2 for one oriented entry."""
    i, j, x = entry
    d = manifold.product_distance(table.target[i], table.context[j])
    r = -h(d) + table.bias_target[i] + table.bias_context[j] - np.log(x)
    return float(glove_weight(x, x_max, alpha) * r * r)


def euclidean_gradients(entry, table: EmbeddingTable, h: HFunction, x_max=100.0, alpha=0.75):
    """Analytic gradients of :func:`loss_term` w.r.t. (w_i, c_j, b_i, b~_j)."""
    i, j, x = entry
    _, p, k = table.shape
    gw = np.empty((p, k))
    gc = np.empty((p, k))
    _, g, _ = K.entry_loss_grads(
        table.target[i], table.context[j], table.bias_target[i], table.bias_context[j],
        float(np.log(x)), float(glove_weight(x, x_max, alpha)), _h_kind(h), h.power,
        gw, gc, np.empty(p),
    )
    return gw, gc, g, g


def _h_kind(h: HFunction) -> int:
    if h.kind == "square":
        return K.H_SQUARE
    if h.kind == "cosh_pow":
        return K.H_COSH_POW
    raise ValueError(f"h={h.name} is not trainable")


def riemannian_scale(grad, x):
    """Rescale a Euclidean gradient by the inverse metric, (1 - |x|^2)^2 / 4."""
    x = np.asarray(x, dtype=np.float64)
    return ((1.0 - np.sum(x * x, axis=-1)) ** 2 / 4.0)[..., None] * np.asarray(grad, dtype=np.float64)


def rsgd_step(x, rgrad, lr):
    return manifold.exp_map(x, -lr * np.asarray(rgrad, dtype=np.float64))


def radagrad_step(x, rgrad, acc: float, lr, eps_ada=EPS_ADA):
    """One Riemannian Adagrad step for a single factor; returns (x, acc)."""
    rgrad = np.asarray(rgrad, dtype=np.float64)
    lam = manifold.conformal_factor(x)
    acc = acc + float(lam * lam * np.dot(rgrad, rgrad))
    if not np.any(rgrad):
        return np.array(x, dtype=np.float64), acc
    return manifold.exp_map(x, -(lr / np.sqrt(acc + eps_ada)) * rgrad), acc


def train(cooc: CoocMatrix, cfg: TrainConfig, init: EmbeddingTable | None = None, words=None) -> TrainResult:
    V = cooc.vocab_size
    if init is None:
        table = fresh_table(V, cfg.p, cfg.k, cfg.seed, words=words, h=cfg.h)
    else:
        if init.shape != (V, cfg.p, cfg.k):
            raise ValueError(f"initial table shape {init.shape} does not match (V={V}, p={cfg.p}, k={cfg.k})")
        table = init.copy()
        table.h = cfg.h
        if words is not None:
            table.words = tuple(words)
    state = AdagradState.zeros(V, cfg.p)

    rows, cols, x = cooc.both_orientations()
    n = len(x)
    logx = np.log(x)
    weight = glove_weight(x, cfg.x_max, cfg.alpha)
    rng = np.random.default_rng(cfg.seed)
    use_adagrad = cfg.optimizer == "radagrad"
    kind = _h_kind(cfg.h)
    args_tail = (kind, cfg.h.power, float(cfg.lr), use_adagrad, EPS_ADA, manifold.EPS_BALL)
    tables = (
        table.target, table.context, table.bias_target, table.bias_context,
        state.target, state.context, state.bias_target, state.bias_context,
    )
    hogwild = cfg.mode == "hogwild" and cfg.threads > 1
    if hogwild:
        set_num_threads(cfg.threads)
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        if hogwild:
            bounds = np.linspace(0, n, cfg.threads + 1).astype(np.int64)
            shard_loss = np.zeros(cfg.threads)
            shard_bad = np.full(cfg.threads, -1, dtype=np.int64)
            K.hogwild_epoch(*tables, rows, cols, logx, weight, order, bounds, *args_tail, shard_loss, shard_bad)
            total = float(shard_loss.sum())
            bad = next((int(b) for b in shard_bad if b >= 0), -1)
        else:
            total, bad = K.sgd_range(*tables, rows, cols, logx, weight, order, 0, n, *args_tail)
        if bad >= 0:
            i, j = int(rows[bad]), int(cols[bad])
            raise FloatingPointError(
                f"non-finite loss at entry {bad} (i={i}, j={j}, X={x[bad]!r}); "
                f"|w_i|={np.linalg.norm(table.target[i], axis=-1).max():.6g}, "
                f"|c_j|={np.linalg.norm(table.context[j], axis=-1).max():.6g}, "
                f"b_i={table.bias_target[i]:.6g}, b_j={table.bias_context[j]:.6g}"
            )
        mean = total / max(n, 1)
        losses.append(mean)
        log.info("epoch %d/%d loss %.6g", epoch + 1, cfg.epochs, mean)
    return TrainResult(table, losses, state)


def total_loss(cooc: CoocMatrix, table: EmbeddingTable, h: HFunction, x_max=100.0, alpha=0.75) -> float:
    """Mean weighted loss over both orientations, evaluated without updating."""
    rows, cols, x = cooc.both_orientations()
    d = manifold.product_distance(table.target[rows], table.context[cols])
    r = -h(d) + table.bias_target[rows] + table.bias_context[cols] - np.log(x)
    return float(np.mean(glove_weight(x, x_max, alpha) * r * r))

