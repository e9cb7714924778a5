import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import jacobi_eigenvalues, random_psd, random_unit_diag_psd
from sqs.errors import ConvergenceError, NumericError, UsageError
from sqs.fitness import max_eigen_fitness, symmetric_max_eigenvalue, target_alignment


def balanced_labels(n):
    return np.array([1.0, -1.0] * (n // 2))


def brute_alignment(K, y):
    T = np.outer(y, y)
    return float(np.sum(K * T) / math.sqrt(np.sum(K * K) * np.sum(T * T)))


class TestAlignment:
    def test_ideal_kernel(self, rng):
        y = rng.choice([-1.0, 1.0], 9)
        y[:2] = [1, -1]
        assert abs(target_alignment(np.outer(y, y), y) - 1) <= 1e-12

    @pytest.mark.parametrize("n", [2, 4, 10, 50])
    def test_identity(self, n):
        assert abs(target_alignment(np.eye(n), balanced_labels(n)) - 1 / math.sqrt(n)) <= 1e-12

    def test_sign_invariance(self, rng):
        K = random_unit_diag_psd(rng, 8)
        y = balanced_labels(8)
        assert target_alignment(K, y) == pytest.approx(target_alignment(K, -y), abs=1e-15)

    def test_proportional_kernel(self, rng):
        y = balanced_labels(6)
        assert target_alignment(3.7 * np.outer(y, y), y) == pytest.approx(1.0, abs=1e-12)

    def test_all_ones_against_formula(self):
        y = np.array([1, 1, 1, -1, -1.0])
        assert target_alignment(np.ones((5, 5)), y) == pytest.approx(brute_alignment(np.ones((5, 5)), y))

    def test_single_class(self):
        with pytest.raises(UsageError):
            target_alignment(np.eye(3), np.ones(3))

    def test_balanced_constant_kernel_is_zero(self):
        y = np.array([1.0] + [-1.0] * 9)
        assert target_alignment(np.ones((10, 10)), y, balanced=True) == pytest.approx(0.0, abs=1e-15)
        assert target_alignment(np.ones((10, 10)), y) == pytest.approx(0.64)

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 12))
            K = random_unit_diag_psd(rng, n)
            y = rng.choice([-1.0, 1.0], n)
            y[:2] = [1, -1]
            value = target_alignment(K, y)
            assert value == pytest.approx(brute_alignment(K, y), abs=1e-12)
            assert -1 <= value <= 1


class TestPowerIteration:
    def test_diagonal(self):
        assert symmetric_max_eigenvalue(np.diag([3.0, 1.0, 0.5])) == pytest.approx(3.0, abs=1e-9)

    def test_all_ones(self):
        assert symmetric_max_eigenvalue(np.ones((4, 4))) == pytest.approx(4.0, abs=1e-12)

    def test_random_psd_against_jacobi(self, rng):
        for _ in range(50):
            A = random_psd(rng, 8)
            assert abs(symmetric_max_eigenvalue(A) - jacobi_eigenvalues(A)[-1]) <= 1e-8

    def test_cap(self):
        A = np.diag([1.0, 0.95, 0.2])
        with pytest.raises(ConvergenceError) as info:
            symmetric_max_eigenvalue(A, max_iter=3)
        assert 0.2 < info.value.last_value <= 1.0

    def test_non_finite(self):
        with pytest.raises(NumericError):
            symmetric_max_eigenvalue(np.array([[1.0, np.nan], [np.nan, 1.0]]))

    def test_asymmetric(self):
        with pytest.raises(UsageError):
            symmetric_max_eigenvalue(np.array([[1.0, 0.5], [0.0, 1.0]]))


class TestMaxEigenFitness:
    def test_all_ones(self):
        assert max_eigen_fitness(np.ones((6, 6))) == pytest.approx(1.0, abs=1e-12)

    def test_identity(self):
        assert max_eigen_fitness(np.eye(7)) == pytest.approx(1 / 7, abs=1e-12)

    def test_small_against_jacobi(self, rng):
        for _ in range(30):
            n = int(rng.integers(2, 7))
            K = random_unit_diag_psd(rng, n)
            assert abs(max_eigen_fitness(K) - jacobi_eigenvalues(K)[-1] / n) <= 1e-8

    def test_non_finite(self):
        with pytest.raises(NumericError):
            max_eigen_fitness(np.full((2, 2), np.inf))

    def test_range(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 10))
            f = max_eigen_fitness(random_unit_diag_psd(rng, n))
            assert 1 / n - 1e-12 <= f <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_eigen_fitness_permutation_invariant(n, seed):
    rng = np.random.default_rng(seed)
    K = random_unit_diag_psd(rng, n)
    perm = rng.permutation(n)
    assert max_eigen_fitness(K[np.ix_(perm, perm)]) == pytest.approx(max_eigen_fitness(K), abs=1e-9)
