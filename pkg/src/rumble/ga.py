"""Selectorecombinative GA with building-block-wise uniform crossover.

Generational, binary tournament selection, crossover probability 1.0, no bit
mutation. Every generation's offspring replace the parents and are evaluated
afresh, so a run of ``g`` generations costs exactly ``n * (g + 1)`` evaluations.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from rumble.core import BlockStructure, RngStream, block_patterns, check_genome, random_population
from rumble.functions import (
    DecomposableFitness,
    correct_bb_count,
    evaluate_noisy_population,
    evaluate_population,
    fitness_variance,
)
from rumble.models import (
    ModelParams,
    default_generation_cap,
    pop_size,
    round_population,
)

__all__ = [
    "GaConfig", "Population", "RunRecord", "bb_uniform_crossover", "correct_bb_count",
    "crossover_population", "fixated_blocks", "majority_genome", "run_ga",
    "select_parents", "tournament_select",
]


@dataclass
class Population:
    members: np.ndarray
    fitness: np.ndarray

    def __post_init__(self):
        n = len(self.members)
        if n < 2 or n % 2:
            raise ValueError(f"population size must be even and >= 2, got {n}")
        if self.fitness.shape != (n,):
            raise ValueError("one cached fitness per member required")

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class RunRecord:
    algorithm: str
    evaluations: int
    generations: int
    success: bool
    correct_bbs: int
    best_fitness: float
    base_seed: int
    stream_id: int
    population_size: int = 0
    samples: int = 1
    fixated: bool = True

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class GaConfig:
    population_size: int
    max_generations: int
    success_threshold: int
    noisy: bool = False
    # Shuffle-based tournaments: every member enters exactly two tournaments.
    tournament_replacement: bool = False

    def __post_init__(self):
        if self.population_size < 2 or self.population_size % 2:
            raise ValueError(f"population size must be even and >= 2, got {self.population_size}")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.success_threshold < 0:
            raise ValueError("success_threshold must be >= 0")

    @classmethod
    def for_problem(cls, f: DecomposableFitness, population_size: int | None = None,
                    success_threshold: int | None = None, max_generations: int | None = None,
                    alpha: float | None = None, **kwargs) -> "GaConfig":
        """Defaults: model-sized population, threshold m - 1, cap of 3 model convergence times."""
        noisy = f.noise_variance > 0
        ratio = f.noise_variance / fitness_variance(f)
        if population_size is None:
            population_size = round_population(pop_size(ModelParams.from_fitness(f, alpha=alpha), noisy))
        if success_threshold is None:
            success_threshold = max(f.m - 1, 0)
        if max_generations is None:
            max_generations = default_generation_cap(f.blocks.length, ratio if noisy else 0.0)
        return cls(population_size, max_generations, success_threshold, noisy=noisy, **kwargs)


def _tournament_winners(fitness: np.ndarray, contestants: np.ndarray, rng: RngStream) -> np.ndarray:
    a, b = contestants[:, 0], contestants[:, 1]
    fa, fb = fitness[a], fitness[b]
    coin = rng.gen.random(len(contestants)) < 0.5
    return np.where(fa > fb, a, np.where(fb > fa, b, np.where(coin, a, b)))


def tournament_select(pop: Population, rng: RngStream) -> np.ndarray:
    """One binary tournament with replacement; returns a copy of the winner."""
    contestants = rng.gen.integers(0, pop.size, size=(1, 2))
    winner = _tournament_winners(pop.fitness, contestants, rng)[0]
    return pop.members[winner].copy()


def select_parents(fitness: np.ndarray, rng: RngStream, replacement: bool = False) -> np.ndarray:
    """Indices of n tournament winners built from 2n contestant draws.

    Without replacement the population is shuffled twice and each shuffle is cut
    into n/2 disjoint pairs.
    """
    n = len(fitness)
    if replacement:
        contestants = rng.gen.integers(0, n, size=(n, 2))
    else:
        contestants = np.concatenate([rng.gen.permutation(n).reshape(-1, 2),
                                      rng.gen.permutation(n).reshape(-1, 2)])
    return _tournament_winners(fitness, contestants, rng)


def bb_uniform_crossover(p1: np.ndarray, p2: np.ndarray, blocks: BlockStructure,
                         rng: RngStream) -> tuple[np.ndarray, np.ndarray]:
    """Swap each block between the parents with probability 0.5."""
    p1, p2 = check_genome(p1, blocks), check_genome(p2, blocks)
    swap = (rng.gen.random(blocks.m) < 0.5)[blocks.block_of_locus]
    return np.where(swap, p2, p1), np.where(swap, p1, p2)


def crossover_population(parents: np.ndarray, blocks: BlockStructure, rng: RngStream) -> np.ndarray:
    """Cross rows (0, 1), (2, 3), ...; offspring keep their parents' slots."""
    p1, p2 = parents[0::2], parents[1::2]
    swap = (rng.gen.random((len(p1), blocks.m)) < 0.5)[:, blocks.block_of_locus]
    out = np.empty_like(parents)
    out[0::2] = np.where(swap, p2, p1)
    out[1::2] = np.where(swap, p1, p2)
    return out


def fixated_blocks(members: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    """Boolean per block: does every member carry the same pattern there."""
    patterns = block_patterns(members, blocks)
    return (patterns == patterns[0]).all(axis=0)


def majority_genome(members: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    """Genome assembled from the most common pattern of each block (ties: lowest pattern)."""
    patterns = block_patterns(members, blocks)
    counts = np.zeros((blocks.m, 1 << blocks.k), dtype=np.int64)
    np.add.at(counts, (np.broadcast_to(np.arange(blocks.m), patterns.shape), patterns), 1)
    winners = counts.argmax(axis=1)
    out = np.empty(blocks.length, dtype=np.uint8)
    out[blocks.index] = blocks.pattern_bits[winners]
    return out


def run_ga(f: DecomposableFitness, cfg: GaConfig, rng: RngStream,
           initial: np.ndarray | None = None,
           observer: Callable[[int, np.ndarray], None] | None = None) -> RunRecord:
    """Run until every block is fixated or the generation cap is reached.

    ``observer(generation, members)`` is called after each evaluation, starting
    with generation 0.
    """
    n = cfg.population_size
    if n % 2 or n < 2:
        raise ValueError(f"population size must be even and >= 2, got {n}")
    if cfg.success_threshold > f.m:
        raise ValueError(f"success_threshold {cfg.success_threshold} exceeds m = {f.m}")
    blocks = f.blocks
    if initial is None:
        members = random_population(n, blocks, rng)
    else:
        members = np.array(check_genome(initial, blocks), dtype=np.uint8)
        if members.shape != (n, blocks.length):
            raise ValueError(f"initial population must have shape {(n, blocks.length)}")

    noisy = cfg.noisy and f.noise_variance > 0

    def score(genomes):
        return evaluate_noisy_population(f, genomes, rng) if noisy else evaluate_population(f, genomes)

    fitness = score(members)
    evaluations = n
    generation = 0
    if observer:
        observer(0, members)
    fixated = bool(fixated_blocks(members, blocks).all())
    while not fixated and generation < cfg.max_generations:
        parents = members[select_parents(fitness, rng, cfg.tournament_replacement)]
        members = crossover_population(parents, blocks, rng)
        fitness = score(members)
        evaluations += n
        generation += 1
        if observer:
            observer(generation, members)
        fixated = bool(fixated_blocks(members, blocks).all())

    best = majority_genome(members, blocks)
    correct = correct_bb_count(best, f)
    return RunRecord(
        algorithm="ga",
        evaluations=evaluations,
        generations=generation,
        success=fixated and correct >= cfg.success_threshold,
        correct_bbs=correct,
        best_fitness=float(evaluate_population(f, members).max()),
        base_seed=rng.base_seed,
        stream_id=rng.stream_id,
        population_size=n,
        fixated=fixated,
    )
