import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knnmt.bm25 import search
from knnmt.corpus import BOS
from knnmt.datastore import Datastore, Neighbor, build_store, knn_search
from knnmt.errors import DimensionMismatch
from knnmt.interp import (
    DistanceAware,
    Fixed,
    KnnConfig,
    Trainable,
    compute_lambda,
    interpolate,
    knn_distribution,
    knn_step,
    parse_policy,
)
from knnmt.model import check_probdist
from knnmt.trainer import TrainedLambda, save_policy

V = 12


def nb(d, v, i=0):
    return Neighbor(float(d), v, i)


def random_dist(rng: np.random.Generator, n: int = V) -> np.ndarray:
    p = rng.random(n)
    return p / p.sum()


class TestKnnDistribution:
    def test_single_neighbor(self):
        p = knn_distribution([nb(0, 7)], 100, V)
        assert p[7] == 1.0 and p.sum() == 1.0

    def test_same_value_two_distances(self):
        p = knn_distribution([nb(1, 5, 0), nb(3, 5, 1)], 1, V)
        assert p[5] == 1.0
        assert np.count_nonzero(p) == 1

    def test_ln2_example(self):
        p = knn_distribution([nb(0, 4), nb(math.log(2) * 100, 9, 1)], 100, V)
        assert p[4] == pytest.approx(2 / 3, abs=1e-15)
        assert p[9] == pytest.approx(1 / 3, abs=1e-15)

    def test_empty(self):
        assert knn_distribution([], 100, V) is None

    def test_large_distances_no_underflow(self):
        p = knn_distribution([nb(1e6, 3), nb(1e6 + 1, 4, 1)], 1.0, V)
        check_probdist(p, V)
        assert p[3] == pytest.approx(1 / (1 + math.exp(-1)))

    def test_high_temperature_limit(self):
        neighbors = [nb(0.5, 2, 0), nb(7, 2, 1), nb(30, 5, 2), nb(90, 8, 3)]
        p = knn_distribution(neighbors, 1e12, V)
        empirical = np.zeros(V)
        empirical[[2, 5, 8]] = [0.5, 0.25, 0.25]
        assert np.allclose(p, empirical, atol=1e-6)

    def test_low_temperature_limit(self):
        neighbors = [nb(3.0, 6, 0), nb(2.5, 1, 1), nb(4.0, 9, 2)]
        p = knn_distribution(neighbors, 1e-12, V)
        assert p[1] == pytest.approx(1.0, abs=1e-6)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 500), st.integers(0, V - 1)), min_size=1, max_size=10),
           st.floats(1e-3, 1e4))
    def test_normalized_and_supported(self, pairs, t):
        neighbors = [nb(d, v, i) for i, (d, v) in enumerate(pairs)]
        p = knn_distribution(neighbors, t, V)
        check_probdist(p, V)
        assert set(np.flatnonzero(p)) <= {v for _, v in pairs}

    def test_bad_temperature(self):
        with pytest.raises(ValueError):
            knn_distribution([nb(0, 1)], 0.0, V)


class TestLambda:
    @pytest.mark.parametrize("d0,lam", [(0, 1.0), (150, 0.0), (50, 0.5), (100, 0.0)])
    def test_distance_aware(self, d0, lam):
        assert compute_lambda(DistanceAware(100), d0) == lam

    def test_trainable_zero(self):
        for d0 in (0.0, 3.0, 1e9):
            assert compute_lambda(Trainable(0, 0), d0) == 0.5

    def test_trainable_matches_sigmoid(self):
        rng = random.Random(0)
        for _ in range(100):
            w, b, d0 = rng.uniform(-1, 1), rng.uniform(-5, 5), rng.uniform(0, 200)
            assert compute_lambda(Trainable(w, b), d0) == pytest.approx(1 / (1 + math.exp(-(w * d0 + b))), rel=1e-12)

    def test_trainable_extreme_inputs(self):
        assert compute_lambda(Trainable(-1.0, 0.0), 1e6) == 0.0
        assert compute_lambda(Trainable(1.0, 0.0), 1e6) == 1.0

    def test_fixed(self):
        assert compute_lambda(Fixed(0.3), 42.0) == 0.3

    @pytest.mark.parametrize("policy", [Fixed(0.7), DistanceAware(100), Trainable(-0.1, 2.0)])
    def test_absent_d0(self, policy):
        assert compute_lambda(policy, None) == 0.0

    def test_distance_aware_non_increasing(self):
        d = np.linspace(0, 300, 1001)
        lam = [compute_lambda(DistanceAware(100), x) for x in d]
        assert all(a >= b for a, b in zip(lam, lam[1:]))

    def test_trainable_negative_weight_strictly_decreasing(self):
        d = np.linspace(0, 50, 501)
        lam = [compute_lambda(Trainable(-0.05, 1.0), x) for x in d]
        assert all(a > b for a, b in zip(lam, lam[1:]))

    @pytest.mark.parametrize("bad", [lambda: Fixed(1.5), lambda: Fixed(-0.1), lambda: DistanceAware(0),
                                     lambda: Trainable(math.nan, 0), lambda: Trainable(0, math.inf)])
    def test_policy_validation(self, bad):
        with pytest.raises(ValueError):
            bad()


class TestInterpolate:
    def test_lambda_zero(self):
        rng = np.random.default_rng(0)
        p_mt, p_knn = random_dist(rng), random_dist(rng)
        assert np.array_equal(interpolate(p_mt, p_knn, 0.0), p_mt)

    def test_lambda_one(self):
        rng = np.random.default_rng(1)
        p_mt, p_knn = random_dist(rng), random_dist(rng)
        assert np.array_equal(interpolate(p_mt, p_knn, 1.0), p_knn)

    def test_quarter(self):
        out = interpolate(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.25)
        assert out.tolist() == [0.625, 0.375]

    def test_literal_orientation(self):
        out = interpolate(np.array([0.5, 0.5]), np.array([1.0, 0.0]), 0.25, literal_eq3=True)
        assert out.tolist() == [0.875, 0.125]

    def test_empty_marker(self):
        p_mt = random_dist(np.random.default_rng(2))
        out = interpolate(p_mt, None, 0.9)
        assert np.array_equal(out, p_mt) and out is not p_mt

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            interpolate(np.ones(3) / 3, np.ones(4) / 4, 0.5)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 1))
    def test_convex_and_normalized(self, seed, lam):
        rng = np.random.default_rng(seed)
        p_mt, p_knn = random_dist(rng), random_dist(rng)
        out = interpolate(p_mt, p_knn, lam)
        check_probdist(out, V)
        lo, hi = np.minimum(p_mt, p_knn), np.maximum(p_mt, p_knn)
        assert np.all(out >= lo - 1e-15) and np.all(out <= hi + 1e-15)


class TestKnnStep:
    def test_empty_store(self, tiny_model):
        out = knn_step(tiny_model, Datastore.empty(tiny_model.hidden_dim), [4, 5], [BOS], KnnConfig())
        _, p_mt = tiny_model.step([4, 5], [BOS])
        assert out.lam == 0.0 and out.d0 is None and out.p_knn is None
        assert np.array_equal(out.p_final, p_mt)

    def test_exact_match_point_mass(self, tiny_model):
        x, prefix = [4, 5, 6], [BOS, 8]
        h, p_mt = tiny_model.step(x, prefix)
        target = int(np.argmin(p_mt))
        far = -h
        store = Datastore(np.stack([h, far]), np.array([target, int(np.argmax(p_mt))]), tiny_model.hidden_dim)
        out = knn_step(tiny_model, store, x, prefix, KnnConfig(k=1, policy=DistanceAware(100)))
        assert out.d0 == 0.0 and out.lam == 1.0
        assert int(np.argmax(out.p_final)) == target

    def test_matches_hand_composition(self, small_domain):
        d = small_domain
        policies = [DistanceAware(100), Fixed(0.4), Trainable(-0.02, 1.0), DistanceAware(30)]
        for j, (src, tgt) in enumerate(d.test_b.pairs[:10]):
            store = build_store(d.model, search(d.index, src), d.ref_b)
            cfg = KnnConfig(k=1 + j % 4, temperature=50 + 10 * j, policy=policies[j % 4], literal_eq3=j % 2 == 1)
            prefix = [BOS]
            for tok in tgt:
                out = knn_step(d.model, store, src, prefix, cfg)
                h, p_mt = d.model.step(src, prefix)
                neighbors = knn_search(store, h, cfg.k)
                p_knn = knn_distribution(neighbors, cfg.temperature, len(p_mt))
                lam = compute_lambda(cfg.policy, neighbors[0].distance)
                expected = interpolate(p_mt, p_knn, lam, cfg.literal_eq3)
                assert np.array_equal(out.p_final, expected)
                assert out.neighbors == neighbors and out.lam == lam
                check_probdist(out.p_final)
                prefix.append(tok)


class TestParsePolicy:
    def test_fixed(self):
        assert parse_policy("fixed:0.3") == Fixed(0.3)

    def test_sk(self):
        assert parse_policy("sk:100") == DistanceAware(100.0)

    def test_trained(self, tmp_path):
        save_policy(TrainedLambda(-0.013, 1.2), tmp_path / "p")
        assert parse_policy(f"trained:{tmp_path / 'p'}") == Trainable(-0.013, 1.2)

    @pytest.mark.parametrize("text", ["fixed", "sk:", "nearest:3", "fixed:2", "sk:-1"])
    def test_bad(self, text):
        with pytest.raises(ValueError):
            parse_policy(text)
