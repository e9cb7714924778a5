"""Evolutionary search over Pauli-word feature maps.

One generation: score every individual, keep the best-ever, stop early on
the target, pick the elite, refine the elite's alphas by alignment ascent,
refill the population by crossover of elite parents, then mutate every
non-elite slot.

Random draws come from per-slot streams seeded by
``(master_seed, purpose, generation, slot)``, so results do not depend on
how many worker threads score the population.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, ConvergenceError, NumericError, SQSError, UsageError
from .fitness import label_weights, max_eigen_fitness, target_alignment
from .pauli_sim import MAX_QUBITS, PAULI_LETTERS, FeatureMap, Gene, PauliWord
from .qkernel import gram_matrix

FITNESS_KINDS = ("eigen", "alignment")
ALPHA_INIT_RANGE = (0.1, 2.0)
ALPHA_MUTATION_RANGE = (0.5, 2.0)
GRADIENT_TOL = 1e-6
MAX_HALVINGS = 40

_INIT, _CROSSOVER, _MUTATE = 1, 2, 3


@dataclass(frozen=True)
class LocalOptConfig:
    max_iterations: int = 10
    fd_step: float = 1e-4
    initial_step_size: float = 1.0

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigurationError("localOpt.maxIterations must be >= 0")
        if not self.fd_step > 0 or not self.initial_step_size > 0:
            raise ConfigurationError("localOpt.fdStep and initialStepSize must be > 0")


@dataclass(frozen=True)
class EvolutionConfig:
    """Search hyperparameters.

    ``fitness`` picks the selection score: ``"alignment"`` (target alignment)
    or ``"eigen"`` (largest normalized Gram eigenvalue).  Local optimization
    always ascends target alignment; ``balanced_alignment`` switches both
    uses to class-size-weighted labels.

    ``"eigen"`` is maximal (exactly 1) for any map that leaves the uniform
    superposition invariant, e.g. chains of X-only words, so on its own it
    tends to select constant kernels.
    """

    maximum_generations: int = 50
    target_fitness: float = 1.0
    qubit_size: int = 2
    gene_chain_size: int = 4
    population_size: int = 10
    crossover_rate: float = 0.7
    mutation_percentage: float = 0.2
    elite_size: int = 2
    quantum_dim: int | None = None
    master_seed: int = 0
    local_opt: LocalOptConfig = field(default_factory=LocalOptConfig)
    fitness: str = "alignment"
    balanced_alignment: bool = True

    def __post_init__(self):
        if isinstance(self.local_opt, dict):
            object.__setattr__(self, "local_opt", LocalOptConfig(**self.local_opt))
        if self.quantum_dim is None:
            object.__setattr__(self, "quantum_dim", self.qubit_size)
        checks = [
            (self.maximum_generations >= 1, "maximumGenerations must be >= 1"),
            (0.0 <= self.target_fitness <= 1.0, "targetFitness must be in [0, 1]"),
            (1 <= self.qubit_size <= MAX_QUBITS, f"qubitSize must be in [1, {MAX_QUBITS}]"),
            (self.gene_chain_size >= 1, "geneChainSize must be >= 1"),
            (self.population_size >= 2, "populationSize must be >= 2"),
            (0.0 <= self.crossover_rate <= 1.0, "crossoverRate must be in [0, 1]"),
            (0.0 <= self.mutation_percentage <= 1.0, "mutationPercentage must be in [0, 1]"),
            (2 <= self.elite_size <= self.population_size,
             "eliteSize must be in [2, populationSize]"),
            (self.quantum_dim == self.qubit_size, "quantumDim must equal qubitSize"),
            (self.master_seed >= 0, "masterSeed must be >= 0"),
            (self.fitness in FITNESS_KINDS, f"fitness must be one of {FITNESS_KINDS}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigurationError(message)


def _stream(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def random_word(qubits: int, rng: np.random.Generator) -> PauliWord:
    while True:
        letters = "".join(PAULI_LETTERS[i] for i in rng.integers(0, 4, size=qubits))
        if letters != "I" * qubits:
            return PauliWord(letters)


def random_individual(cfg: EvolutionConfig, rng: np.random.Generator) -> FeatureMap:
    length = int(rng.integers(1, cfg.gene_chain_size + 1))
    genes = tuple(
        Gene(random_word(cfg.qubit_size, rng), float(rng.uniform(*ALPHA_INIT_RANGE)))
        for _ in range(length)
    )
    return FeatureMap(cfg.qubit_size, genes)


def init_population(cfg: EvolutionConfig) -> list[FeatureMap]:
    return [
        random_individual(cfg, _stream(cfg.master_seed, _INIT, slot))
        for slot in range(cfg.population_size)
    ]


def _map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _annotate(exc: SQSError, prefix: str) -> SQSError:
    if isinstance(exc, ConvergenceError):
        return ConvergenceError(f"{prefix}: {exc}", exc.last_value)
    return type(exc)(f"{prefix}: {exc}")


def score_individual(fm: FeatureMap, X, y, fitness: str = "eigen",
                     balanced: bool = False) -> tuple[float, float]:
    """Return ``(fitness, alignment)`` from one Gram matrix."""
    K = gram_matrix(fm, X)
    alignment = target_alignment(K, y, balanced=balanced) if y is not None else float("nan")
    score = max_eigen_fitness(K) if fitness == "eigen" else alignment
    return score, alignment


def _score_all(pop: Sequence[FeatureMap], X, y, fitness: str, balanced: bool,
               threads: int) -> list[tuple[float, float]]:
    if fitness == "alignment" and y is None:
        raise UsageError("alignment fitness needs labels")

    def one(item):
        i, fm = item
        try:
            return score_individual(fm, X, y, fitness, balanced)
        except SQSError as exc:
            raise _annotate(exc, f"individual {i}") from exc

    return _map(one, list(enumerate(pop)), threads)


def evaluate_population(pop: Sequence[FeatureMap], X, y=None, fitness: str = "eigen",
                        balanced: bool = False, threads: int = 1) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.array([s for s, _ in _score_all(pop, X, y, fitness, balanced, threads)])


def select_elite(fitness: Sequence[float], elite_size: int) -> list[int]:
    """Indices of the ``elite_size`` best scores, best first; ties go to the lower index."""
    fitness = np.asarray(fitness, dtype=float)
    if not 1 <= elite_size <= len(fitness):
        raise UsageError(f"eliteSize {elite_size} not in [1, {len(fitness)}]")
    order = sorted(range(len(fitness)), key=lambda i: (-fitness[i], i))
    return order[:elite_size]


def alignment_of(fm: FeatureMap, X, y, balanced: bool = False) -> float:
    return target_alignment(gram_matrix(fm, X), y, balanced=balanced)


def alignment_gradient(fm: FeatureMap, X, y, step: float, balanced: bool = False) -> np.ndarray:
    """Central finite-difference gradient of target alignment w.r.t. the alphas."""
    alphas = fm.alphas
    grad = np.empty_like(alphas)
    for k in range(len(alphas)):
        up = alphas.copy()
        down = alphas.copy()
        up[k] += step
        down[k] -= step
        grad[k] = (alignment_of(fm.with_alphas(up), X, y, balanced)
                   - alignment_of(fm.with_alphas(down), X, y, balanced)) / (2 * step)
    return grad


def local_optimize(fm: FeatureMap, X, y, opts: LocalOptConfig | None = None,
                   balanced: bool = False) -> FeatureMap:
    """Gradient ascent of target alignment over the gene alphas.

    A step is kept only if it strictly improves alignment; otherwise it is
    halved.  Words are never changed.
    """
    opts = opts or LocalOptConfig()
    X = np.asarray(X, dtype=float)
    label_weights(y)

    def objective(alphas: np.ndarray) -> float:
        value = alignment_of(fm.with_alphas(alphas), X, y, balanced)
        if not np.isfinite(value):
            raise NumericError(f"non-finite alignment at alphas={alphas.tolist()}")
        return value

    alphas = fm.alphas
    current = objective(alphas)
    step = opts.initial_step_size
    improved = False
    for _ in range(opts.max_iterations):
        grad = alignment_gradient(fm.with_alphas(alphas), X, y, opts.fd_step, balanced)
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient at alphas={alphas.tolist()}")
        if np.max(np.abs(grad)) < GRADIENT_TOL:
            break
        for _ in range(MAX_HALVINGS):
            candidate = alphas + step * grad
            value = objective(candidate)
            if value > current:
                alphas, current, improved = candidate, value, True
                step *= 2.0
                break
            step /= 2.0
        else:
            break
    return fm.with_alphas(alphas) if improved else fm


def splice(a: FeatureMap, b: FeatureMap, cut_a: int, cut_b: int,
           gene_chain_size: int) -> FeatureMap:
    """Head ``a[:cut_a]`` followed by tail ``b[cut_b:]``, truncated to ``gene_chain_size``."""
    genes = (a.genes[:cut_a] + b.genes[cut_b:])[:gene_chain_size]
    return FeatureMap(a.qubits, genes)


def crossover(elite: Sequence[FeatureMap], population_size: int, crossover_rate: float,
              gene_chain_size: int, seed: int = 0, generation: int = 0) -> list[FeatureMap]:
    """Elite first, unchanged; remaining slots bred from two distinct elite parents."""
    if len(elite) < 2:
        raise UsageError("crossover needs at least two elite parents")
    population = list(elite[:population_size])
    for slot in range(len(population), population_size):
        rng = _stream(seed, _CROSSOVER, generation, slot)
        i, j = rng.choice(len(elite), size=2, replace=False)
        a, b = elite[i], elite[j]
        if rng.random() < crossover_rate:
            cut_a = int(rng.integers(1, len(a) + 1))
            cut_b = int(rng.integers(0, len(b)))
            population.append(splice(a, b, cut_a, cut_b, gene_chain_size))
        else:
            population.append(a)
    return population


def _mutate_word(word: PauliWord, rng: np.random.Generator) -> PauliWord:
    letters = list(word.letters)
    while True:
        q = int(rng.integers(0, len(letters)))
        choices = [c for c in PAULI_LETTERS if c != letters[q]]
        new = letters.copy()
        new[q] = choices[int(rng.integers(0, 3))]
        if set(new) != {"I"}:
            return PauliWord("".join(new))


def mutate(fm: FeatureMap, mutation_percentage: float, rng: np.random.Generator) -> FeatureMap:
    """Each gene mutates with probability ``mutation_percentage``.

    A mutation either swaps one letter for a different one or rescales alpha
    by a factor in [0.5, 2.0], both equally likely.
    """
    genes = []
    for gene in fm.genes:
        if rng.random() < mutation_percentage:
            if rng.random() < 0.5:
                gene = Gene(_mutate_word(gene.word, rng), gene.alpha)
            else:
                gene = Gene(gene.word, gene.alpha * float(rng.uniform(*ALPHA_MUTATION_RANGE)))
        genes.append(gene)
    return FeatureMap(fm.qubits, tuple(genes))


@dataclass
class GenerationRecord:
    generation: int
    best_fitness: float
    generation_best_fitness: float
    mean_fitness: float
    best_alignment: float
    elite: list[dict]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EvolutionReport:
    generations: list[GenerationRecord]
    stop_reason: str
    best: FeatureMap
    best_fitness: float
    final_fitness: float
    final_alignment: float
    wall_time: float = 0.0

    def summary(self, include_timing: bool = True) -> dict:
        out = {
            "stop_reason": self.stop_reason,
            "generations": len(self.generations),
            "best_fitness": self.best_fitness,
            "final_fitness": self.final_fitness,
            "final_alignment": self.final_alignment,
            "entangling_blocks": self.best.entangling_blocks,
            "best_feature_map": self.best.to_dict(),
        }
        if include_timing:
            out["wall_time"] = self.wall_time
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict()) + "\n" for r in self.generations)


def run(cfg: EvolutionConfig, X, y, threads: int = 1,
        callback: Callable[[GenerationRecord], None] | None = None
        ) -> tuple[FeatureMap, EvolutionReport]:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != cfg.qubit_size:
        raise UsageError(f"data has shape {X.shape}, expected (N, {cfg.qubit_size})")
    label_weights(y)
    started = time.perf_counter()
    balanced = cfg.balanced_alignment
    population = init_population(cfg)
    best: FeatureMap | None = None
    best_fitness = -np.inf
    records: list[GenerationRecord] = []
    stop_reason = "generations-exhausted"

    for gen in range(cfg.maximum_generations):
        try:
            scores = _score_all(population, X, y, cfg.fitness, balanced, threads)
            fitness = np.array([s for s, _ in scores])
            alignment = np.array([a for _, a in scores])
            top = select_elite(fitness, cfg.elite_size)
            if fitness[top[0]] > best_fitness:
                best_fitness = float(fitness[top[0]])
                best = population[top[0]]
            record = GenerationRecord(
                generation=gen,
                best_fitness=best_fitness,
                generation_best_fitness=float(fitness[top[0]]),
                mean_fitness=float(fitness.mean()),
                best_alignment=float(alignment.max()),
                elite=[
                    {"fitness": float(fitness[i]), "alignment": float(alignment[i]),
                     "feature_map": population[i].to_dict()}
                    for i in top
                ],
            )
            records.append(record)
            if callback is not None:
                callback(record)
            if best_fitness >= cfg.target_fitness:
                stop_reason = "target-reached"
                break
            if gen == cfg.maximum_generations - 1:
                break

            elite = _map(lambda fm: local_optimize(fm, X, y, cfg.local_opt, balanced),
                         [population[i] for i in top], threads)
            population = crossover(elite, cfg.population_size, cfg.crossover_rate,
                                   cfg.gene_chain_size, cfg.master_seed, gen)
            for slot in range(cfg.elite_size, cfg.population_size):
                rng = _stream(cfg.master_seed, _MUTATE, gen, slot)
                population[slot] = mutate(population[slot], cfg.mutation_percentage, rng)
        except SQSError as exc:
            raise _annotate(exc, f"generation {gen}") from exc

    assert best is not None
    refined = local_optimize(best, X, y, cfg.local_opt, balanced)
    final_fitness, final_alignment = score_individual(refined, X, y, cfg.fitness, balanced)
    report = EvolutionReport(
        generations=records,
        stop_reason=stop_reason,
        best=refined,
        best_fitness=best_fitness,
        final_fitness=final_fitness,
        final_alignment=final_alignment,
        wall_time=time.perf_counter() - started,
    )
    return refined, report
