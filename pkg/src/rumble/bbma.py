"""Enumerative building-block-wise mutation algorithm (BBMA).

Starting from one random genome, each block in turn is set to every one of its
2**k patterns and the best-scoring candidate is kept. Under noise each genome is
scored as the mean of ``samples`` evaluations, charged once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from rumble.core import RngStream, block_patterns, check_genome, random_genome, random_population
from rumble.functions import DecomposableFitness, correct_bb_count, evaluate_population
from rumble.ga import RunRecord


@dataclass
class BbmaConfig:
    samples: int = 1
    block_order: Sequence[int] | None = None
    success_threshold: int | None = None

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples per evaluation must be >= 1")

    def order_for(self, m: int) -> list[int]:
        order = list(range(m)) if self.block_order is None else [int(j) for j in self.block_order]
        if sorted(order) != list(range(m)):
            raise ValueError(f"block_order must be a permutation of 0..{m - 1}")
        return order


def _mean_scores(f: DecomposableFitness, genomes: np.ndarray, samples: int, rng: RngStream) -> np.ndarray:
    true = evaluate_population(f, genomes)
    if f.noise_variance == 0:
        return true
    # Row-major draw order: all samples of candidate 0, then candidate 1, ...
    draws = rng.gen.normal(0.0, f.noise_sd, size=(len(genomes), samples))
    return true + draws.mean(axis=1)


def run_bbma(f: DecomposableFitness, cfg: BbmaConfig, rng: RngStream,
             initial: np.ndarray | None = None,
             observer: Callable[[int, np.ndarray, np.ndarray], None] | None = None) -> RunRecord:
    """One BBMA sweep over all blocks.

    ``observer(block, incumbent, candidates)`` sees each phase's candidate set
    and the incumbent chosen at the end of the phase.
    """
    blocks = f.blocks
    order = cfg.order_for(blocks.m)
    threshold = max(blocks.m - 1, 0) if cfg.success_threshold is None else cfg.success_threshold
    ns = cfg.samples
    patterns = np.arange(1 << blocks.k)

    incumbent = random_genome(blocks, rng) if initial is None else check_genome(initial, blocks).astype(np.uint8)
    score = _mean_scores(f, incumbent[None, :], ns, rng)[0]
    evaluations = ns

    for j in order:
        current = int(block_patterns(incumbent, blocks)[j])
        others = patterns[patterns != current]
        candidates = np.repeat(incumbent[None, :], len(others), axis=0)
        candidates[:, blocks.index[j]] = blocks.pattern_bits[others]
        scores = _mean_scores(f, candidates, ns, rng)
        evaluations += ns * len(others)
        # argmax returns the lowest pattern among ties; the incumbent wins any tie
        best = int(np.argmax(scores))
        if scores[best] > score:
            incumbent, score = candidates[best], scores[best]
        if observer:
            observer(j, incumbent, candidates)

    correct = correct_bb_count(incumbent, f)
    return RunRecord(
        algorithm="bbma",
        evaluations=evaluations,
        generations=len(order),
        success=correct >= threshold,
        correct_bbs=correct,
        best_fitness=float(evaluate_population(f, incumbent)),
        base_seed=rng.base_seed,
        stream_id=rng.stream_id,
        samples=ns,
    )


def block_decision_accuracy(f: DecomposableFitness, samples: int, trials: int, rng: RngStream,
                            block: int = 0) -> float:
    """Fraction of single-block decisions that pick the best pattern.

    Each decision scores all 2**k patterns of ``block`` on a random background,
    averaging ``samples`` noisy evaluations per candidate, and keeps the argmax.
    The average of ``samples`` Gaussian draws is taken directly from its exact
    distribution N(0, sigma_N^2 / samples) so large sample counts stay cheap.
    """
    if samples < 1 or trials < 1:
        raise ValueError("samples and trials must be >= 1")
    blocks = f.blocks
    backgrounds = random_population(trials, blocks, rng)
    width = 1 << blocks.k
    rest = evaluate_population(f, backgrounds) - f.lut[block, block_patterns(backgrounds, blocks)[:, block]]
    true = rest[:, None] + f.lut[block][None, :]
    z = rng.gen.standard_normal((trials, width))
    scores = true + z * (f.noise_sd / np.sqrt(samples))
    chosen = scores.argmax(axis=1)
    return float(np.mean(chosen == f.best_patterns[block]))
