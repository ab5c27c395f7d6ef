"""Gyro-parallelogram answers, neighbour search and the analogy protocol."""

import numpy as np
import pytest

from hypglove import analogy, manifold
from hypglove.analogy import AnalogyDataset
from hypglove.errors import FormatError
from hypglove.modelio import WordVectors
from hypglove.trainer import EmbeddingTable

from builders import planted_t_fixture
from conftest import ball_points


def product_points(rng, n, p=3, k=2, max_norm=0.9):
    return ball_points(rng, n * p, k, max_norm).reshape(n, p, k)


def brute_nearest(q, points, exclude):
    best, arg = np.inf, -1
    for v in range(len(points)):
        if v in exclude:
            continue
        d = manifold.product_distance(q, points[v])
        if d < best:
            best, arg = d, v
    return arg


def table_from(points, words=None):
    V = len(points)
    return EmbeddingTable(points, points.copy(), np.zeros(V), np.zeros(V), words)


class TestParallelogram:
    def test_degenerate(self, rng):
        a, b, c = product_points(rng, 3)
        d1, d2 = analogy.gyro_parallelogram(a, a, c)
        np.testing.assert_allclose(d1, c, atol=1e-15)
        np.testing.assert_allclose(d2, c, atol=1e-12)
        d1, _ = analogy.gyro_parallelogram(a, b, a)
        np.testing.assert_allclose(d1, b, atol=1e-12)

    def test_sides_differ(self, rng):
        a, b, c = product_points(rng, 3, max_norm=0.8)
        d1, d2 = analogy.gyro_parallelogram(a, b, c)
        assert np.max(np.abs(d1 - d2)) > 1e-3

    def test_transport_form(self, rng):
        a, b, c = (product_points(rng, 2000, p=2) for _ in range(3))
        d1, _ = analogy.gyro_parallelogram(a, b, c)
        ref = manifold.exp_map(c, manifold.parallel_transport(a, c, manifold.log_map(a, b)))
        assert np.max(np.abs(d1 - ref)) <= 1e-8

    def test_euclidean_limit(self, rng):
        a, b, c = (product_points(rng, 1000, max_norm=1e-2) for _ in range(3))
        d1, d2 = analogy.gyro_parallelogram(a, b, c)
        assert np.max(np.linalg.norm(d1 - (c + b - a), axis=-1)) <= 1e-5
        assert np.max(np.linalg.norm(d2 - (b + c - a), axis=-1)) <= 1e-5
        for t in (0.0, 0.3, 1.0):
            ans = analogy.analogy_answer(a, b, c, t)
            assert np.max(np.linalg.norm(ans - (c + b - a), axis=-1)) <= 1e-5


class TestAnswer:
    def test_endpoints(self, rng):
        a, b, c = (product_points(rng, 50) for _ in range(3))
        d1, d2 = analogy.gyro_parallelogram(a, b, c)
        np.testing.assert_allclose(analogy.analogy_answer(a, b, c, 0.0), d1, atol=1e-12)
        np.testing.assert_allclose(analogy.analogy_answer(a, b, c, 1.0), d2, atol=1e-9)

    def test_midpoint_symmetry(self, rng):
        a, b, c = (product_points(rng, 2000) for _ in range(3))
        d1, d2 = analogy.gyro_parallelogram(a, b, c)
        m12 = manifold.geodesic_point(d1, d2, 0.5)
        m21 = manifold.geodesic_point(d2, d1, 0.5)
        assert np.max(np.abs(m12 - m21)) <= 1e-9

    def test_inside_ball(self, rng):
        a, b, c = (product_points(rng, 500, max_norm=0.99999) for _ in range(3))
        ans = analogy.analogy_answer(a, b, c)
        assert np.all(np.linalg.norm(ans, axis=-1) <= 1 - manifold.EPS_BALL + 1e-15)

    def test_t_range(self, rng):
        a = product_points(rng, 1)[0]
        with pytest.raises(ValueError):
            analogy.analogy_answer(a, a, a, 1.5)

    def test_all_equal(self, rng):
        points = product_points(rng, 20)
        c = points[7]
        ans = analogy.analogy_answer(c, c, c, 0.3)
        np.testing.assert_allclose(ans, c, atol=1e-15)
        assert analogy.nearest_word(ans, points) == 7


class TestNearest:
    def test_self_and_exclusion(self, rng):
        points = product_points(rng, 30)
        assert analogy.nearest_word(points[4], points) == 4
        two = points[:2]
        assert analogy.nearest_word(two[0], two, exclude=[0]) == 1
        with pytest.raises(ValueError):
            analogy.nearest_word(two[0], two, exclude=[0, 1])
        with pytest.raises(ValueError):
            analogy.nearest_words(points[:1], points, metric="euclid")

    def test_ties_lowest_id(self, rng):
        points = product_points(rng, 5)
        points[3] = points[1]
        q = points[1] * 0.9
        assert analogy.nearest_word(q, points) == 1
        assert analogy.nearest_word(q, points, metric="cosine") in (1, 3)
        assert analogy.nearest_word(points[1], points, metric="cosine") == 1

    @pytest.mark.parametrize("use_numba", [True, False])
    def test_brute_force(self, monkeypatch, use_numba):
        rng = np.random.default_rng(3)
        if not use_numba:
            monkeypatch.setattr(analogy, "HAS_NUMBA", False)
        for _ in range(1000):
            V = int(rng.integers(2, 12))
            points = product_points(rng, V, p=2)
            q = product_points(rng, 2, p=2)
            excl = np.array([[int(rng.integers(0, V)), -1], [-1, -1]])
            got = analogy.nearest_words(q, points, exclude=excl, batch=1)
            assert got[0] == brute_nearest(q[0], points, set(excl[0]))
            assert got[1] == brute_nearest(q[1], points, set())

    @pytest.mark.parametrize("use_numba", [True, False])
    def test_cosine_brute_force(self, monkeypatch, rng, use_numba):
        if not use_numba:
            monkeypatch.setattr(analogy, "HAS_NUMBA", False)
        points = product_points(rng, 200)
        points[5] = 0.0
        q = product_points(rng, 50)
        got = analogy.nearest_words(q, points, metric="cosine", exclude=[0])
        flat = points.reshape(200, -1)
        norms = np.linalg.norm(flat, axis=1)
        for n in range(50):
            qv = q[n].ravel()
            sims = [-np.inf if (v in (0, 5)) else flat[v] @ qv / (norms[v] * np.linalg.norm(qv)) for v in range(200)]
            assert got[n] == int(np.argmax(sims))


class TestThreeCosAdd:
    def test_composite_wins(self):
        e = np.eye(3)
        comp = (e[1] + e[2] - e[0]) / np.sqrt(3)
        vectors = np.vstack([e, comp])
        assert analogy.three_cos_add(0, 1, 2, vectors) == 3
        scores = [e[2] @ v + e[1] @ v - e[0] @ v for v in vectors]
        assert int(np.argmax(scores[3:])) + 3 == 3

    def test_a_equals_b(self, rng):
        vectors = rng.standard_normal((50, 8))
        got = analogy.three_cos_add(4, 4, 9, vectors)
        unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        cos = unit @ unit[9]
        cos[[4, 9]] = -np.inf
        assert got == int(np.argmax(cos))

    def test_rescaling_and_zero(self, rng):
        vectors = rng.standard_normal((100, 6))
        q = rng.integers(0, 100, size=(40, 3))
        base = analogy.three_cos_add_batch(q[:, 0], q[:, 1], q[:, 2], vectors)
        scaled = vectors * rng.uniform(0.1, 10.0, size=(100, 1))
        np.testing.assert_array_equal(base, analogy.three_cos_add_batch(q[:, 0], q[:, 1], q[:, 2], scaled))
        vectors[base[0]] = 0.0
        again = analogy.three_cos_add_batch(q[:1, 0], q[:1, 1], q[:1, 2], vectors)
        assert again[0] != base[0]

    def test_against_enumeration(self, rng):
        vectors = rng.standard_normal((60, 5))
        unit = vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
        for _ in range(50):
            a, b, c = rng.choice(60, size=3, replace=False)
            scores = unit @ unit[c] + unit @ unit[b] - unit @ unit[a]
            scores[[a, b, c]] = -np.inf
            assert analogy.three_cos_add(a, b, c, vectors) == int(np.argmax(scores))


class TestDataset:
    def test_load(self, tmp_path):
        path = tmp_path / "q.txt"
        path.write_text(": capital-common-countries\nAthens Greece Baghdad Iraq\n"
                        ": gram1-adjective-to-adverb\namazing amazingly calm calmly\n", encoding="utf-8")
        ds = analogy.load_analogy_dataset(path, lowercase=True)
        assert ds.rows[0] == ("athens", "greece", "baghdad", "iraq")
        assert [ds.split_of(i) for i in range(2)] == ["semantic", "syntactic"]
        path.write_text("a b c\n", encoding="utf-8")
        with pytest.raises(FormatError, match=":1:"):
            analogy.load_analogy_dataset(path)


class TestEval:
    def test_planted_accuracy(self):
        table, ds = planted_t_fixture()
        res = analogy.eval_analogy(ds, table, t=0.3)
        assert res.accuracy == 1.0
        assert res.splits["semantic"].total == 20 and res.splits["syntactic"].total == 20
        assert analogy.eval_analogy(ds, table, t=0.7).accuracy == 0.0

    def test_oov_dropped(self):
        table, ds = planted_t_fixture(n_queries=4)
        ds = AnalogyDataset(ds.rows + [("zz", "yy", "xx", "ww")], ds.sections + ["capital-world"])
        res = analogy.eval_analogy(ds, table)
        assert res.dropped == 1 and res.splits["total"].total == 4
        assert res.details[-1]["used"] is False
        oov = AnalogyDataset([("zz", "yy", "xx", "ww")], ["x"])
        res = analogy.eval_analogy(oov, table)
        assert res.splits["total"].total == 0 and res.dropped == 1
        assert np.isnan(res.accuracy)

    def test_chance_level(self, rng):
        V = 1000
        points = product_points(rng, V, p=2, max_norm=0.8)
        words = tuple(f"w{i}" for i in range(V))
        q = rng.integers(0, V, size=(500, 4))
        ds = AnalogyDataset([tuple(words[i] for i in row) for row in q], ["x"] * 500)
        assert analogy.eval_analogy(ds, table_from(points, words)).accuracy <= 0.01

    def test_word_vectors_use_3cosadd(self):
        e = np.eye(3)
        vectors = np.vstack([e, (e[1] + e[2] - e[0]) / np.sqrt(3)])
        wv = WordVectors(("a", "b", "c", "d"), vectors)
        res = analogy.eval_analogy(AnalogyDataset([("a", "b", "c", "d")], ["x"]), wv)
        assert res.accuracy == 1.0

    def test_w_plus_c(self, rng):
        target = product_points(rng, 10)
        context = product_points(rng, 10)
        t = EmbeddingTable(target, context, np.zeros(10), np.zeros(10))
        mid = analogy.combined_points(t, "w+c")
        np.testing.assert_allclose(manifold.ball_distance(mid, target), manifold.ball_distance(mid, context),
                                   atol=1e-9)


class TestCrossValidation:
    def test_planted_recovery(self):
        table, ds = planted_t_fixture()
        cv = analogy.cross_validate_t(ds, table, seed=0)
        assert cv.t == (0.3, 0.3)
        assert cv.test_accuracy == (1.0, 1.0)

    def test_constant_grid_picks_zero(self, rng):
        V = 50
        points = product_points(rng, V)
        words = tuple(f"w{i}" for i in range(V))
        # a = b collapses every t onto c, which is excluded, so accuracy is 0 across the grid
        ds = AnalogyDataset([(words[0], words[0], words[2], words[2])] * 6, ["x"] * 6)
        cv = analogy.cross_validate_t(ds, table_from(points, words))
        assert cv.t == (0.0, 0.0)
        assert np.all(cv.grid_accuracy == cv.grid_accuracy[:, :1])

    def test_deterministic(self):
        table, ds = planted_t_fixture(seed=2)
        a = analogy.cross_validate_t(ds, table, seed=11)
        b = analogy.cross_validate_t(ds, table, seed=11)
        assert a.t == b.t and a.test_accuracy == b.test_accuracy
        np.testing.assert_array_equal(a.grid_accuracy, b.grid_accuracy)
