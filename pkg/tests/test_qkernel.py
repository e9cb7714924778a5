import json
import math

import numpy as np
import pytest

from oracles import random_feature_map
from sqs.errors import DimensionError, UsageError
from sqs.pauli_sim import FeatureMap, Gene, apply_hadamard_layer, init_zero_state
from sqs.qkernel import (cross_gram, fidelity, gram_matrix, inversion_test_estimate,
                         inversion_test_probability, kernel_entry, read_gram, write_gram)


def z_map(alpha):
    return FeatureMap(1, (Gene("Z", alpha),))


class TestFidelity:
    def test_same_state(self):
        psi = apply_hadamard_layer(init_zero_state(3))
        assert fidelity(psi, psi) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert fidelity([1, 0], [0, 1]) == 0.0

    def test_plus_overlap(self):
        assert fidelity(init_zero_state(1), apply_hadamard_layer(init_zero_state(1))) == \
            pytest.approx(0.5, abs=1e-15)

    def test_dimension(self):
        with pytest.raises(DimensionError):
            fidelity(init_zero_state(1), init_zero_state(2))


class TestKernelEntry:
    def test_diagonal(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 5))
            fm = random_feature_map(rng, n)
            x = rng.uniform(-math.pi, math.pi, n)
            assert abs(kernel_entry(fm, x, x) - 1) <= 1e-12

    @pytest.mark.parametrize("alpha", [0.3, 1.0, 2.7])
    def test_single_z_closed_form(self, alpha, rng):
        for x, x2 in rng.uniform(-math.pi, math.pi, (20, 2)):
            expected = math.cos(alpha * (x - x2) / 2) ** 2
            assert abs(kernel_entry(z_map(alpha), [x], [x2]) - expected) <= 1e-10

    def test_symmetric(self, rng):
        fm = random_feature_map(rng, 3)
        x, x2 = rng.standard_normal((2, 3))
        assert abs(kernel_entry(fm, x, x2) - kernel_entry(fm, x2, x)) <= 1e-12


class TestGram:
    def test_identical_rows(self, rng):
        fm = random_feature_map(rng, 2)
        X = np.tile(rng.standard_normal(2), (5, 1))
        assert np.allclose(gram_matrix(fm, X), np.ones((5, 5)), atol=1e-12)

    def test_single_row(self, rng):
        assert np.array_equal(gram_matrix(random_feature_map(rng, 2), [[0.1, 0.2]]), [[1.0]])

    def test_matches_pairwise_loop(self, rng):
        for n in (1, 2, 3):
            fm = random_feature_map(rng, n)
            X = rng.uniform(-math.pi, math.pi, (5, n))
            K = gram_matrix(fm, X)
            loop = np.array([[kernel_entry(fm, a, b) for b in X] for a in X])
            assert np.max(np.abs(K - loop)) <= 1e-12

    def test_empty(self, rng):
        with pytest.raises(UsageError):
            gram_matrix(random_feature_map(rng, 2), np.empty((0, 2)))

    def test_dimension(self, rng):
        with pytest.raises(DimensionError):
            gram_matrix(random_feature_map(rng, 2), np.zeros((3, 3)))

    def test_validity_properties(self, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            K = gram_matrix(random_feature_map(rng, n), rng.uniform(-math.pi, math.pi, (30, n)))
            assert np.array_equal(K, K.T)
            assert np.all(np.abs(np.diag(K) - 1) <= 1e-10)
            assert K.min() >= -1e-10 and K.max() <= 1 + 1e-10
            assert np.linalg.eigvalsh(K).min() >= -1e-8

    def test_shots_are_reproducible_and_symmetric(self, rng):
        fm = random_feature_map(rng, 2)
        X = rng.standard_normal((6, 2))
        a = gram_matrix(fm, X, shots=100, seed=3)
        b = gram_matrix(fm, X, shots=100, seed=3)
        assert np.array_equal(a, b)
        assert np.array_equal(a, a.T)
        assert np.all(np.diag(a) == 1.0)
        assert np.all(np.round(a * 100) == a * 100)


class TestCrossGram:
    def test_equals_gram_on_same_data(self, rng):
        fm = random_feature_map(rng, 3)
        X = rng.standard_normal((6, 3))
        assert np.max(np.abs(cross_gram(fm, X, X) - gram_matrix(fm, X))) <= 1e-12

    def test_row_hits_training_point(self, rng):
        fm = random_feature_map(rng, 2)
        X = rng.uniform(-math.pi, math.pi, (4, 2))
        row = cross_gram(fm, X[2:3], X)
        assert row[0, 2] == pytest.approx(1.0, abs=1e-12)

    def test_matches_entrywise(self, rng):
        fm = random_feature_map(rng, 2)
        A = rng.standard_normal((3, 2))
        B = rng.standard_normal((4, 2))
        K = cross_gram(fm, A, B)
        assert K.shape == (3, 4)
        for i in range(3):
            for j in range(4):
                assert abs(K[i, j] - kernel_entry(fm, A[i], B[j])) <= 1e-12


class TestInversionTest:
    def test_identical_inputs(self, rng):
        fm = random_feature_map(rng, 3)
        x = rng.standard_normal(3)
        for shots in (1, 7, 1000):
            assert inversion_test_estimate(fm, x, x, shots, seed=5) == 1.0

    def test_probability_equals_kernel(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 5))
            fm = random_feature_map(rng, n)
            x, x2 = rng.uniform(-math.pi, math.pi, (2, n))
            assert abs(inversion_test_probability(fm, x, x2) - kernel_entry(fm, x, x2)) <= 1e-10

    def test_large_shot_limit(self, rng):
        fm = random_feature_map(rng, 2)
        x, x2 = rng.uniform(-math.pi, math.pi, (2, 2))
        est = inversion_test_estimate(fm, x, x2, 10**6, seed=11)
        assert abs(est - kernel_entry(fm, x, x2)) <= 0.005

    def test_deterministic(self, rng):
        fm = random_feature_map(rng, 2)
        x, x2 = rng.standard_normal((2, 2))
        assert inversion_test_estimate(fm, x, x2, 50, 9) == inversion_test_estimate(fm, x, x2, 50, 9)

    def test_zero_shots(self, rng):
        with pytest.raises(UsageError):
            inversion_test_estimate(random_feature_map(rng, 1), [0.1], [0.2], 0, 0)

    def test_shot_noise_scaling(self):
        fm = FeatureMap(2, (Gene("ZZ", 1.0), Gene("XI", 0.7)))
        x, x2 = np.array([0.4, 1.1]), np.array([-0.8, 0.9])
        p0 = inversion_test_probability(fm, x, x2)
        assert 0.05 < p0 < 0.95
        shots = 200
        draws = np.array([inversion_test_estimate(fm, x, x2, shots, seed) for seed in range(1000)])
        expected = math.sqrt(p0 * (1 - p0) / shots)
        assert abs(draws.std() - expected) <= 0.2 * expected


def test_gram_export_round_trip(tmp_path, rng):
    fm = random_feature_map(rng, 2)
    X = rng.standard_normal((4, 2))
    K = gram_matrix(fm, X)
    meta_path = write_gram(tmp_path / "k.csv", K, fm, ids=["a", "b", "c", "d"])
    meta = json.loads(meta_path.read_text())
    assert meta == {"feature_map": fm.to_dict(), "n": 4, "exact": True, "shots": None, "seed": None}
    K2, ids, _ = read_gram(tmp_path / "k.csv")
    assert ids == ["a", "b", "c", "d"]
    assert np.array_equal(K, K2)
