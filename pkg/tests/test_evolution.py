import math
from dataclasses import replace

import numpy as np
import pytest

from oracles import random_feature_map
from sqs.errors import ConfigurationError, UsageError
from sqs.evolution import (EvolutionConfig, LocalOptConfig, alignment_gradient, alignment_of,
                           crossover, evaluate_population, init_population, local_optimize,
                           mutate, run, score_individual, select_elite, splice)
from sqs.fitness import max_eigen_fitness, target_alignment
from sqs.pauli_sim import FeatureMap, Gene
from sqs.qkernel import gram_matrix
from sqs.svm import default_gamma, rbf_kernel


def two_clusters_1d(seed, n=20):
    rng = np.random.default_rng(seed)
    y = np.array([1.0] * (n // 2) + [-1.0] * (n // 2))
    x = np.where(y > 0, rng.normal(0.8, 0.25, n), rng.normal(-0.8, 0.25, n))
    return x[:, None], y


def blobs(seed, n=40, qubits=2, sep=1.5):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    X = rng.normal(0, 0.25, (n, qubits))
    X[:, 0] += y * sep / 2
    return X, y


def cfg(**kw):
    base = dict(maximum_generations=3, population_size=8, elite_size=2, qubit_size=2,
                gene_chain_size=3, local_opt=LocalOptConfig(max_iterations=2))
    base.update(kw)
    return EvolutionConfig(**base)


class TestConfig:
    def test_elite_lower_bound(self):
        with pytest.raises(ConfigurationError):
            cfg(elite_size=1)

    def test_elite_upper_bound(self):
        with pytest.raises(ConfigurationError):
            cfg(elite_size=9)

    def test_quantum_dim_must_match(self):
        with pytest.raises(ConfigurationError):
            cfg(quantum_dim=3)

    def test_target_range(self):
        with pytest.raises(ConfigurationError):
            cfg(target_fitness=1.5)


class TestInitPopulation:
    def test_contract(self):
        pop = init_population(cfg(population_size=10, gene_chain_size=4))
        assert len(pop) == 10
        for fm in pop:
            assert fm.qubits == 2 and 1 <= len(fm.genes) <= 4
            for g in fm.genes:
                assert len(g.word.letters) == 2 and g.word.letters != "II"
                assert 0.1 <= g.alpha <= 2.0

    def test_deterministic(self):
        assert init_population(cfg(master_seed=4)) == init_population(cfg(master_seed=4))
        assert init_population(cfg(master_seed=4)) != init_population(cfg(master_seed=5))

    def test_single_gene_chains(self):
        assert all(len(fm.genes) == 1 for fm in init_population(cfg(gene_chain_size=1)))


class TestEvaluatePopulation:
    def test_identical_rows_give_one(self, rng):
        pop = [random_feature_map(rng, 2) for _ in range(3)]
        X = np.tile([0.4, -0.2], (6, 1))
        assert np.allclose(evaluate_population(pop, X), 1.0, atol=1e-12)

    def test_identical_individuals(self, rng):
        fm = random_feature_map(rng, 2)
        f = evaluate_population([fm, fm], rng.standard_normal((8, 2)))
        assert f[0] == f[1]

    def test_threads_match_serial_oracle(self, rng):
        pop = [random_feature_map(rng, 3) for _ in range(12)]
        X = rng.uniform(-math.pi, math.pi, (15, 3))
        serial = [max_eigen_fitness(gram_matrix(fm, X)) for fm in pop]
        assert np.array_equal(evaluate_population(pop, X, threads=4), serial)

    def test_dimension_error_names_individual(self, rng):
        pop = [random_feature_map(rng, 2)]
        with pytest.raises(UsageError, match="individual 0"):
            evaluate_population(pop, np.zeros((4, 3)))

    def test_alignment_needs_labels(self, rng):
        with pytest.raises(UsageError):
            evaluate_population([random_feature_map(rng, 2)], np.zeros((4, 2)), fitness="alignment")


class TestSelectElite:
    def test_example(self):
        assert select_elite([0.2, 0.9, 0.5], 2) == [1, 2]

    def test_ties(self):
        assert select_elite([0.3, 0.3, 0.3], 2) == [0, 1]

    def test_whole_population(self):
        assert select_elite([0.1, 0.7, 0.4], 3) == [1, 2, 0]

    def test_too_large(self):
        with pytest.raises(UsageError):
            select_elite([0.1, 0.2], 3)


class TestLocalOptimize:
    def test_stationary_returned_unchanged(self):
        # identical rows: Gram is all-ones for every alpha
        fm = FeatureMap(1, (Gene("Z", 0.9),))
        X = np.zeros((4, 1))
        y = np.array([1, 1, -1, -1.0])
        assert local_optimize(fm, X, y) is fm

    def test_words_kept(self, rng):
        X, y = blobs(1)
        fm = random_feature_map(rng, 2)
        out = local_optimize(fm, X, y)
        assert [g.word for g in out.genes] == [g.word for g in fm.genes]

    def test_never_decreases_alignment(self, rng):
        opts = LocalOptConfig(max_iterations=2)
        for k in range(200):
            n = int(rng.integers(1, 4))
            X = rng.uniform(-math.pi, math.pi, (10, n))
            y = np.where(rng.random(10) < 0.5, 1.0, -1.0)
            y[:2] = [1, -1]
            fm = random_feature_map(rng, n, max_genes=2)
            balanced = bool(k % 2)
            before = alignment_of(fm, X, y, balanced)
            after = alignment_of(local_optimize(fm, X, y, opts, balanced), X, y, balanced)
            assert after >= before - 1e-12

    def test_grid_search_oracle(self):
        grid = np.linspace(0, 2 * math.pi, 2048)
        for seed in range(20):
            X, y = two_clusters_1d(seed)
            best = max(alignment_of(FeatureMap(1, (Gene("Z", a),)), X, y) for a in grid)
            start = float(np.random.default_rng(seed).uniform(0.1, 2.0))
            out = local_optimize(FeatureMap(1, (Gene("Z", start),)), X, y,
                                 LocalOptConfig(max_iterations=50))
            assert alignment_of(out, X, y) >= best - 0.02

    def test_gradient_against_half_step(self, rng):
        X, y = blobs(2, n=16)
        for _ in range(10):
            fm = random_feature_map(rng, 2, max_genes=3)
            g = alignment_gradient(fm, X, y, 1e-4)
            fine = alignment_gradient(fm, X, y, 5e-5)
            scale = max(np.max(np.abs(fine)), 1e-8)
            assert np.max(np.abs(g - fine)) <= 1e-4 * scale


class TestCrossover:
    def genes(self, *alphas):
        return tuple(Gene("ZI", a) for a in alphas)

    def test_splice_example(self):
        a = FeatureMap(2, self.genes(1, 2, 3))
        b = FeatureMap(2, self.genes(11, 12))
        assert splice(a, b, 1, 1, 4).alphas.tolist() == [1, 12]

    def test_splice_truncates(self):
        a = FeatureMap(2, self.genes(1, 2, 3))
        b = FeatureMap(2, self.genes(11, 12))
        assert len(splice(a, b, 3, 0, 4).genes) == 4

    def test_rate_zero_clones(self, rng):
        elite = [random_feature_map(rng, 2) for _ in range(3)]
        pop = crossover(elite, 10, 0.0, 4, seed=1)
        assert pop[:3] == elite
        assert all(fm in elite for fm in pop)

    def test_size_and_bounds(self, rng):
        elite = [random_feature_map(rng, 2, max_genes=4) for _ in range(4)]
        for seed in range(20):
            pop = crossover(elite, 13, 0.8, 3, seed=seed, generation=seed)
            assert len(pop) == 13 and pop[:4] == elite
            assert all(1 <= len(fm.genes) <= 4 for fm in pop)
            assert all(len(fm.genes) <= 3 for fm in pop[4:])

    def test_needs_two_parents(self, rng):
        with pytest.raises(UsageError):
            crossover([random_feature_map(rng, 2)], 5, 0.5, 3)


class TestMutate:
    def test_zero_rate(self, rng):
        fm = random_feature_map(rng, 3)
        assert mutate(fm, 0.0, rng) == fm

    def test_single_gene_always_mutated(self):
        fm = FeatureMap(2, (Gene("ZX", 1.0),))
        for seed in range(50):
            out = mutate(fm, 1.0, np.random.default_rng(seed)).genes[0]
            word_changed = out.word != fm.genes[0].word
            alpha_changed = out.alpha != fm.genes[0].alpha
            assert word_changed != alpha_changed
            if word_changed:
                diff = sum(a != b for a, b in zip(out.word.letters, "ZX"))
                assert diff == 1
            else:
                assert 0.5 <= out.alpha <= 2.0

    def test_never_identity(self):
        fm = FeatureMap(1, (Gene("Z", 1.0),))
        for seed in range(200):
            assert mutate(fm, 1.0, np.random.default_rng(seed)).genes[0].word.letters != "I"


class TestRun:
    def test_zero_target_stops_after_first(self):
        X, y = blobs(0)
        _, report = run(cfg(target_fitness=1e-9, maximum_generations=5), X, y)
        assert report.stop_reason == "target-reached" and len(report.generations) == 1

    def test_single_generation(self):
        X, y = blobs(0)
        _, report = run(cfg(maximum_generations=1), X, y)
        assert len(report.generations) == 1
        assert report.stop_reason == "generations-exhausted"

    def test_deterministic(self):
        X, y = blobs(3)
        a = run(cfg(master_seed=7), X, y)
        b = run(cfg(master_seed=7), X, y)
        assert a[0] == b[0]
        assert a[1].summary(include_timing=False) == b[1].summary(include_timing=False)
        assert a[1].to_jsonl() == b[1].to_jsonl()

    def test_threads_bit_identical(self):
        X, y = blobs(4)
        one = run(cfg(master_seed=2), X, y, threads=1)[1]
        many = run(cfg(master_seed=2), X, y, threads=8)[1]
        assert one.to_jsonl() == many.to_jsonl()
        assert one.summary(include_timing=False) == many.summary(include_timing=False)

    def test_eigen_fitness_mode_monotone(self):
        X, y = blobs(5)
        _, report = run(cfg(fitness="eigen", maximum_generations=4), X, y)
        best = [r.best_fitness for r in report.generations]
        assert best == sorted(best)

    def test_invariants_each_generation(self):
        X, y = blobs(6, qubits=3)
        seen = []
        run(cfg(qubit_size=3, maximum_generations=4), X, y, callback=seen.append)
        for record in seen:
            assert len(record.elite) == 2
            for snap in record.elite:
                fm = FeatureMap.from_dict(snap["feature_map"])
                assert fm.qubits == 3 and 1 <= len(fm.genes) <= 3

    def test_rescoring_saved_map(self):
        X, y = blobs(8)
        c = cfg(master_seed=3)
        best, report = run(c, X, y)
        restored = FeatureMap.from_json(best.to_json())
        score, align = score_individual(restored, X, y, c.fitness, c.balanced_alignment)
        assert abs(score - report.final_fitness) <= 1e-10
        assert abs(align - report.final_alignment) <= 1e-10

    def test_wrong_width(self):
        with pytest.raises(UsageError):
            run(cfg(), np.zeros((4, 3)), np.array([1, -1, 1, -1.0]))

    def test_separable_blobs_reach_alignment(self):
        # two 2D Gaussians 6 sigma apart, 10% positives: a nonnegative kernel on
        # balanced classes cannot exceed alignment 1/sqrt(2)
        rng = np.random.default_rng(0)
        sigma = 0.2
        y = np.where(np.arange(60) < 6, 1.0, -1.0)
        X = rng.normal(0, sigma, (60, 2))
        X[:, 0] += y * 3 * sigma
        feasible = max(target_alignment(rbf_kernel(X, X, g * default_gamma(X)), y)
                       for g in np.logspace(-2, 2, 9))
        assert feasible > 0.8
        c = replace(cfg(), population_size=20, maximum_generations=10, gene_chain_size=4,
                    local_opt=LocalOptConfig(), balanced_alignment=False)
        best, report = run(c, X, y)
        assert max(r.best_alignment for r in report.generations) >= 0.8
        assert target_alignment(gram_matrix(best, X), y) >= 0.8


def test_nonnegative_kernel_alignment_ceiling(rng):
    for _ in range(50):
        n_pos = int(rng.integers(1, 15))
        n_neg = int(rng.integers(1, 15))
        y = np.array([1.0] * n_pos + [-1.0] * n_neg)
        X = rng.uniform(-math.pi, math.pi, (len(y), 2))
        K = gram_matrix(random_feature_map(rng, 2), X)
        assert target_alignment(K, y) <= math.hypot(n_pos, n_neg) / len(y) + 1e-12
