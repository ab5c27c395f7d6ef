"""Acceptance criteria 1-9, each checked at its stated tolerance.

Every test appends one ``criterion N PASS|FAIL`` line to the terminal
summary, whether its assertions hold or not. The corpus-scale checks
(6, 7, 8) generate their corpora with the seeded synthetic generator and are
marked ``slow``.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from hypglove import analogy, corpus, evaluation, hyperbolicity as Y, hypernymy as H, manifold as M
from hypglove import modelio, synthetic, trainer
from hypglove.hfunc import HFunction
from hypglove.hypernymy import GaussianEmbedding

from builders import planted_t_fixture
from conftest import ball_points
from test_trainer import gradient_check_errors

N = 10_000
COSH2 = HFunction("cosh_pow", 2)


@contextmanager
def criterion(log, n, title):
    """Yield a dict for measured values; record PASS unless the body raises."""
    info = {}
    ok = False
    try:
        yield info
        ok = True
    finally:
        detail = " ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}" + (f" [{detail}]" if detail else "")
        log.append(line)
        print(line)


@pytest.fixture(scope="session")
def topic5(tmp_path_factory):
    path = tmp_path_factory.mktemp("c6") / "topic5.txt"
    synthetic.topic_corpus(path, 5_000_000, seed=1)
    vocab = corpus.build_vocab(path)
    return corpus.count_cooccurrences(path, vocab, 10, "harmonic", 1)


def test_criterion_1_gyrovector_algebra(acceptance_log):
    rng = np.random.default_rng(1)
    with criterion(acceptance_log, 1, "gyrovector algebra, 1e4 cases per identity") as info:
        t0 = time.perf_counter()
        a, b = ball_points(rng, N), ball_points(rng, N)
        cancel = np.max(np.abs(M.mobius_add(-a, M.mobius_add(a, b)) - b))

        u, v = ball_points(rng, N), ball_points(rng, N)
        w1, w2 = rng.standard_normal((N, 2)), rng.standard_normal((N, 2))
        alpha = rng.standard_normal(N)[:, None]
        g1 = M.gyration(u, v, w1)
        orth = np.max(np.abs(np.linalg.norm(g1, axis=1) / np.linalg.norm(w1, axis=1) - 1.0))
        lin = np.max(np.abs(M.gyration(u, v, alpha * w1 + w2) - (alpha * g1 + M.gyration(u, v, w2))))

        x = ball_points(rng, N, max_norm=0.9)
        d = rng.standard_normal((N, 2))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        tv = d * (5.0 * rng.random(N) / M.conformal_factor(x))[:, None]
        inv = np.max(np.abs(M.log_map(x, M.exp_map(x, tv)) - tv))

        y = ball_points(rng, N)
        tw = rng.standard_normal((N, 2))
        trip = np.max(np.abs(M.parallel_transport(y, x, M.parallel_transport(x, y, tw)) - tw))
        elapsed = time.perf_counter() - t0
        info.update(cancel=cancel, orth=orth, lin=lin, explog=inv, transport=trip, seconds=elapsed)
        assert cancel <= 1e-9
        assert orth <= 1e-10 and lin <= 1e-10
        assert inv <= 1e-8
        assert trip <= 1e-9
        assert elapsed < 10.0


def test_criterion_2_isometry(acceptance_log):
    rng = np.random.default_rng(2)
    with criterion(acceptance_log, 2, "disk/half-plane isometry on 1e4 pairs") as info:
        x, y = ball_points(rng, N), ball_points(rng, N)
        hx, hy = M.disk_to_halfplane(x), M.disk_to_halfplane(y)
        dist = np.max(np.abs(M.halfplane_distance(hx, hy) - M.ball_distance(x, y)))
        trip = np.max(np.abs(M.halfplane_to_disk(hx) - x))
        d1 = float(M.ball_distance(np.zeros(2), np.array([0.5, 0.0])))
        d2 = float(M.halfplane_distance(np.array([0.0, 1.0]), np.array([0.8, 0.6])))
        chain = max(abs(d1 - math.log(3)), abs(d2 - math.log(3)))
        info.update(dist=dist, round_trip=trip, ln3=chain)
        assert dist <= 1e-9
        assert trip <= 1e-10
        assert chain <= 1e-12


def test_criterion_3_fisher_consistency(acceptance_log):
    rng = np.random.default_rng(3)
    with criterion(acceptance_log, 3, "Fisher distance and local KL agreement") as info:
        g1 = GaussianEmbedding(rng.normal(size=(N, 4)), rng.uniform(0.1, 5, size=(N, 4)))
        g2 = GaussianEmbedding(rng.normal(size=(N, 4)), rng.uniform(0.1, 5, size=(N, 4)))
        per = M.halfplane_distance(np.stack([g1.mu / math.sqrt(2), g1.sigma], -1),
                                   np.stack([g2.mu / math.sqrt(2), g2.sigma], -1))
        fisher = np.max(np.abs(H.fisher_distance(g1, g2) - np.sqrt(np.sum(2 * per**2, axis=1))))

        mu = rng.normal(size=(1000, 3))
        sigma = rng.uniform(0.5, 2.0, size=(1000, 3))
        step = rng.standard_normal((1000, 6))
        step *= 1e-2 / np.linalg.norm(step, axis=1, keepdims=True)
        p = GaussianEmbedding(mu, sigma)
        q = GaussianEmbedding(mu + step[:, :3], sigma + step[:, 3:])
        local = np.max(np.abs(2 * H.kl_diag(p, q) / H.fisher_distance(p, q) ** 2 - 1))
        info.update(fisher=fisher, kl_rel=local)
        assert fisher <= 1e-9
        assert local <= 5e-2


def test_criterion_4_gradient_check(acceptance_log):
    with criterion(acceptance_log, 4, "analytic vs central-difference gradients") as info:
        t0 = time.perf_counter()
        sq = gradient_check_errors(np.random.default_rng(4), HFunction("square"), n=100).max()
        ch = gradient_check_errors(np.random.default_rng(5), COSH2, n=100).max()
        elapsed = time.perf_counter() - t0
        info.update(square=sq, cosh2=ch, seconds=elapsed)
        assert sq <= 1e-4 and ch <= 1e-4
        assert elapsed < 5.0


def test_criterion_5_analogy_algebra(acceptance_log):
    rng = np.random.default_rng(5)
    with criterion(acceptance_log, 5, "gyro-parallelogram identities and planted t") as info:
        a, b, c = (ball_points(rng, N, max_norm=0.9) for _ in range(3))
        d1, d2 = analogy.gyro_parallelogram(a, b, c)
        transport = M.exp_map(c, M.parallel_transport(a, c, M.log_map(a, b)))
        eq = np.max(np.abs(d1 - transport))
        sym = np.max(np.abs(M.geodesic_point(d1, d2, 0.5) - M.geodesic_point(d2, d1, 0.5)))

        small = [1e-2 * ball_points(rng, N, max_norm=1.0) for _ in range(3)]
        flat = small[2] + small[1] - small[0]
        lim = max(np.max(np.linalg.norm(analogy.analogy_answer(*small, t=t) - flat, axis=1))
                  for t in (0.0, 0.3, 1.0))

        table, data = planted_t_fixture()
        cv = analogy.cross_validate_t(data, table, seed=0)
        info.update(eq6=eq, midpoint=sym, flat_limit=lim, t=str(cv.t))
        assert eq <= 1e-8
        assert sym <= 1e-9
        assert lim <= 1e-5
        assert cv.t == (0.3, 0.3)


def _star(leaves=6):
    d = np.full((leaves + 1, leaves + 1), 2.0)
    d[0, :] = d[:, 0] = 1.0
    np.fill_diagonal(d, 0.0)
    return d


@pytest.mark.slow
def test_criterion_6_delta_hyperbolicity(acceptance_log, topic5):
    rng = np.random.default_rng(6)
    with criterion(acceptance_log, 6, "four-point delta checks and cosh^k ordering") as info:
        star = Y.estimate_delta(Y.MatrixMetric(_star()), 5000, 5000, seed=0)

        sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
        dsq = np.linalg.norm(sq[:, None] - sq[None], axis=-1)
        square = Y.tuple_delta(dsq[0, 1], dsq[2, 3], dsq[0, 2], dsq[1, 3], dsq[0, 3], dsq[1, 2])

        ang = rng.uniform(0, 2 * np.pi, 5000)
        rad = 0.95 * np.sqrt(rng.random(5000))
        disk = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
        dmax = Y.estimate_delta(Y.PointMetric(disk, M.ball_distance), 50_000, 5000, seed=1).delta_max

        pts = rng.standard_normal((60, 3))
        dm = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
        base = Y.estimate_delta(Y.MatrixMetric(dm), 5000, 5000, seed=2).ratio
        scaled = [Y.estimate_delta(Y.MatrixMetric(s * dm), 5000, 5000, seed=2).ratio for s in (0.125, 4.0, 64.0)]

        ratios = [Y.estimate_delta(Y.CoocMetric(topic5, HFunction("cosh_pow", k)), 100_000, 100_000, seed=0).ratio
                  for k in (1, 2, 4)]
        info.update(star=star.delta_avg, square_err=abs(square - (math.sqrt(2) - 1)), disk_max=dmax,
                    r1=ratios[0], r2=ratios[1], r4=ratios[2])
        assert star.delta_avg == 0.0
        assert abs(square - (math.sqrt(2) - 1)) <= 1e-12
        assert dmax <= math.log(1 + math.sqrt(2)) + 0.05
        assert all(r == base for r in scaled)
        assert ratios[0] >= ratios[1] >= ratios[2]


@pytest.mark.slow
def test_criterion_7_hypernymy(acceptance_log, tmp_path):
    rng = np.random.default_rng(7)
    with criterion(acceptance_log, 7, "is-a score invariants and synthetic hierarchy") as info:
        t0 = time.perf_counter()
        sv, sw, su = (rng.uniform(1e-3, 1e3, size=(N, 10)) for _ in range(3))
        v, w, u = GaussianEmbedding(0 * sv, sv), GaussianEmbedding(0 * sw, sw), GaussianEmbedding(0 * su, su)
        anti = bool(np.array_equal(H.isa_score(v, w), -H.isa_score(w, v)))
        rescale = all(
            np.array_equal(H.isa_score(GaussianEmbedding(0 * sv, s * sv), GaussianEmbedding(0 * sw, s * sw)),
                           H.isa_score(v, w))
            for s in (2.0**-7, 0.5, 2.0, 2.0**9)
        )
        trans = np.max(np.abs(H.isa_score(v, u) - (H.isa_score(v, w) + H.isa_score(w, u))))

        tax = synthetic.build_taxonomy((4, 6, 6, 6))
        path = tmp_path / "taxonomy.txt"
        synthetic.taxonomy_corpus(path, tax, n_lines=60_000, seed=0)
        vocab = corpus.build_vocab(path)
        m = corpus.count_cooccurrences(path, vocab, 10, "harmonic", 1)
        cfg = trainer.TrainConfig(p=10, k=2, h=COSH2, lr=0.05, epochs=150, seed=0, mode="deterministic", threads=1)
        table = trainer.train(m, cfg, words=vocab.words).table
        sets = H.select_sets_unsupervised(len(vocab), n=100, pool=len(vocab))
        g = H.to_gaussian(table.target, H.fit_isometry(table.target, sets))
        edges = tax.edges()
        child = np.array([vocab.index[c] for c, _ in edges])
        parent = np.array([vocab.index[p] for _, p in edges])
        frac = float(np.mean(H.isa_score(g[child], g[parent]) > 0))
        elapsed = time.perf_counter() - t0
        info.update(words=len(vocab), edges_positive=frac, transitivity=trans, seconds=elapsed)
        assert anti and rescale
        assert trans <= 1e-12
        assert frac >= 0.8
        assert elapsed < 300.0


@pytest.mark.slow
def test_criterion_8_end_to_end(acceptance_log, tmp_path):
    with criterion(acceptance_log, 8, "10 MB corpus, 10x2D cosh^2, 15 epochs") as info:
        t0 = time.perf_counter()
        path = tmp_path / "topic10.txt"
        tc = synthetic.topic_corpus(path, 10_000_000, seed=0)
        vocab = corpus.build_vocab(path)
        m = corpus.count_cooccurrences(path, vocab, 10, "harmonic", 1)
        gold = evaluation.PairDataset(synthetic.similarity_pairs(tc, 500, seed=1))
        cfg = trainer.TrainConfig(p=10, k=2, h=COSH2, lr=0.05, epochs=15, seed=0, mode="deterministic", threads=1)
        baseline = evaluation.eval_similarity(gold, trainer.fresh_table(len(vocab), 10, 2, seed=0, words=vocab.words))
        res = trainer.train(m, cfg, words=vocab.words)
        trained = evaluation.eval_similarity(gold, res.table)
        losses = res.epoch_losses
        decreasing = all(losses[e + 1] < losses[e] for e in range(1, len(losses) - 1))
        max_norm = float(np.max(np.linalg.norm(res.table.target, axis=-1)))
        elapsed = time.perf_counter() - t0
        info.update(spearman=trained.value, baseline=baseline.value, max_norm=max_norm, seconds=elapsed)
        assert decreasing
        assert max_norm <= 1.0 - M.EPS_BALL
        assert np.max(np.linalg.norm(res.table.context, axis=-1)) <= 1.0 - M.EPS_BALL
        assert trained.value - baseline.value >= 0.15
        assert elapsed < 600.0


def test_criterion_9_determinism(acceptance_log, tmp_path):
    with criterion(acceptance_log, 9, "bitwise reruns of counting, training, metrics and delta") as info:
        path = tmp_path / "c.txt"
        tc = synthetic.topic_corpus(path, 300_000, vocab_size=500, seed=9)
        gold = evaluation.PairDataset(synthetic.similarity_pairs(tc, 100, top=300, seed=9))
        runs = []
        for r in range(2):
            vocab = corpus.build_vocab(path)
            m = corpus.count_cooccurrences(path, vocab, 10, "harmonic", 1)
            cfg = trainer.TrainConfig(p=4, k=2, h=COSH2, epochs=5, seed=3, mode="deterministic", threads=1)
            table = trainer.train(m, cfg, words=vocab.words).table
            modelio.save_model(table, tmp_path / f"m{r}.hgmd")
            sim = evaluation.eval_similarity(gold, table).value
            delta = Y.estimate_delta(Y.CoocMetric(m, COSH2), 20_000, 20_000, seed=4)
            runs.append((m, (tmp_path / f"m{r}.hgmd").read_bytes(), sim, delta))
        (m0, b0, s0, d0), (m1, b1, s1, d1) = runs
        info.update(model_bytes=len(b0), spearman=s0, delta_ratio=d0.ratio)
        assert m0 == m1
        assert b0 == b1
        assert s0 == s1
        assert d0 == d1
