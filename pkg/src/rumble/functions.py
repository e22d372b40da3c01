"""Additively separable test problems and their block statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from rumble.core import BlockStructure, RngStream, block_patterns, check_genome


def _best_and_signal(values: np.ndarray) -> tuple[int, float]:
    order = np.argsort(values, kind="stable")
    best, runner_up = int(order[-1]), int(order[-2])
    d = float(values[best] - values[runner_up])
    if d <= 0:
        raise ValueError("subfunction table has a tied maximum; the best pattern must be unique")
    return best, d


@dataclass(frozen=True)
class SubfunctionTable:
    """Fitness contribution of each of the 2**k patterns of one block."""

    k: int
    values: tuple[float, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if len(self.values) != 1 << self.k:
            raise ValueError(f"expected {1 << self.k} values for k = {self.k}, got {len(self.values)}")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("table values must be finite")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        _best_and_signal(np.asarray(self.values))

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, pattern: int) -> float:
        return self.values[pattern]


@dataclass(frozen=True)
class BlockStats:
    d: float
    sigma_bb: float
    mean: float
    best_pattern: int

    @property
    def variance(self) -> float:
        return self.sigma_bb ** 2


def block_stats(table: SubfunctionTable) -> BlockStats:
    """Exact statistics over all 2**k equiprobable patterns.

    ``sigma_bb`` is a standard deviation (population form, divisor 2**k) and
    ``d`` is the gap between the best and the second-best pattern values.
    """
    values = np.asarray(table.values, dtype=float)
    best, d = _best_and_signal(values)
    mean = float(values.mean())
    sigma = float(np.sqrt(np.mean((values - mean) ** 2)))
    return BlockStats(d=d, sigma_bb=sigma, mean=mean, best_pattern=best)


@dataclass(frozen=True)
class DecomposableFitness:
    """Sum of per-block subfunctions plus optional additive Gaussian noise."""

    blocks: BlockStructure
    tables: tuple[SubfunctionTable, ...]
    noise_variance: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        if len(self.tables) != self.blocks.m:
            raise ValueError(f"need {self.blocks.m} tables, got {len(self.tables)}")
        if any(t.k != self.blocks.k for t in self.tables):
            raise ValueError(f"every table must have k = {self.blocks.k}")
        if not (self.noise_variance >= 0 and math.isfinite(self.noise_variance)):
            raise ValueError("noise_variance must be a finite value >= 0")

    @property
    def m(self) -> int:
        return self.blocks.m

    @property
    def k(self) -> int:
        return self.blocks.k

    @property
    def noise_sd(self) -> float:
        return math.sqrt(self.noise_variance)

    @cached_property
    def lut(self) -> np.ndarray:
        """(m, 2**k) lookup of table values."""
        return np.stack([t.array for t in self.tables])

    @cached_property
    def stats(self) -> tuple[BlockStats, ...]:
        cache: dict[SubfunctionTable, BlockStats] = {}
        for t in self.tables:
            if t not in cache:
                cache[t] = block_stats(t)
        return tuple(cache[t] for t in self.tables)

    @cached_property
    def best_patterns(self) -> np.ndarray:
        return np.array([s.best_pattern for s in self.stats], dtype=np.int64)

    @property
    def homogeneous(self) -> bool:
        return len(set(self.tables)) == 1

    @property
    def sigma_bb(self) -> float:
        """Root-mean-square of the per-block standard deviations."""
        return math.sqrt(sum(s.variance for s in self.stats) / self.m)

    @property
    def d(self) -> float:
        """Smallest per-block signal."""
        return min(s.d for s in self.stats)

    @cached_property
    def optimum(self) -> float:
        return float(self.lut.max(axis=1).sum())

    def with_noise(self, noise_variance: float) -> "DecomposableFitness":
        return replace(self, noise_variance=float(noise_variance))


def make_onemax(m: int, noise_variance: float = 0.0) -> DecomposableFitness:
    if m < 1:
        raise ValueError("OneMax needs m >= 1")
    table = SubfunctionTable(1, (0.0, 1.0))
    return DecomposableFitness(BlockStructure.contiguous(m, 1), (table,) * m, noise_variance, name="onemax")


def make_trap(k: int) -> SubfunctionTable:
    """Fully deceptive trap on unitation: k at all-ones, otherwise k - 1 - u."""
    if k < 2:
        raise ValueError("a trap needs k >= 2")
    values = []
    for pattern in range(1 << k):
        u = bin(pattern).count("1")
        values.append(float(k if u == k else k - 1 - u))
    return SubfunctionTable(k, tuple(values))


def make_trap_problem(k: int, m: int, noise_variance: float = 0.0,
                      blocks: BlockStructure | None = None) -> DecomposableFitness:
    if m < 1:
        raise ValueError("need m >= 1")
    blocks = blocks or BlockStructure.contiguous(m, k)
    return DecomposableFitness(blocks, (make_trap(k),) * m, noise_variance, name=f"trap{k}")


def make_uniform_problem(table: SubfunctionTable, m: int, noise_variance: float = 0.0,
                         name: str = "custom") -> DecomposableFitness:
    return DecomposableFitness(BlockStructure.contiguous(m, table.k), (table,) * m, noise_variance, name=name)


def parse_table(text: str) -> SubfunctionTable:
    """Parse the plain-text table format.

    First non-blank line ``k=<int>``, then ``2**k`` lines ``<pattern-bits> <value>``.
    Patterns are written MSB first and must cover every value exactly once.
    """
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines or not lines[0].replace(" ", "").startswith("k="):
        raise ValueError("table file must start with a 'k=<int>' line")
    try:
        k = int(lines[0].replace(" ", "")[2:])
    except ValueError:
        raise ValueError(f"bad header line: {lines[0]!r}") from None
    if k < 1:
        raise ValueError("k must be >= 1")
    rows = lines[1:]
    if len(rows) != 1 << k:
        raise ValueError(f"expected {1 << k} pattern lines, found {len(rows)}")
    values: dict[int, float] = {}
    for row in rows:
        parts = row.split()
        if len(parts) != 2:
            raise ValueError(f"bad table line: {row!r}")
        bits, value = parts
        if len(bits) != k or set(bits) - {"0", "1"}:
            raise ValueError(f"pattern {bits!r} is not a {k}-bit binary string")
        pattern = int(bits, 2)
        if pattern in values:
            raise ValueError(f"duplicate pattern {bits}")
        values[pattern] = float(value)
    return SubfunctionTable(k, tuple(values[p] for p in range(1 << k)))


def load_table(path: str | Path) -> SubfunctionTable:
    return parse_table(Path(path).read_text())


def format_table(table: SubfunctionTable) -> str:
    lines = [f"k={table.k}"]
    lines += [f"{p:0{table.k}b} {v!r}" for p, v in enumerate(table.values)]
    return "\n".join(lines) + "\n"


def fitness_variance(f: DecomposableFitness) -> float:
    """Variance of total fitness under uniform random genomes."""
    return float(sum(s.variance for s in f.stats))


def evaluate_population(f: DecomposableFitness, genomes: np.ndarray) -> np.ndarray:
    """Noiseless fitness of every genome in a stacked array."""
    patterns = block_patterns(genomes, f.blocks)
    return f.lut[np.arange(f.m), patterns].sum(axis=-1)


def evaluate(f: DecomposableFitness, g: np.ndarray) -> float:
    g = check_genome(g, f.blocks)
    if g.ndim != 1:
        raise ValueError("evaluate expects a single genome")
    return float(evaluate_population(f, g))


def noise(f: DecomposableFitness, rng: RngStream, size=None):
    """Noise draws for ``size`` evaluations; zeros when the problem is noiseless."""
    if f.noise_variance == 0:
        return np.zeros(size) if size is not None else 0.0
    return rng.gen.normal(0.0, f.noise_sd, size)


def evaluate_noisy(f: DecomposableFitness, g: np.ndarray, rng: RngStream) -> float:
    return evaluate(f, g) + float(noise(f, rng))


def evaluate_noisy_population(f: DecomposableFitness, genomes: np.ndarray, rng: RngStream) -> np.ndarray:
    """One noisy evaluation per row; noise is drawn in row order."""
    true = evaluate_population(f, genomes)
    return true + noise(f, rng, true.shape)


def correct_bb_count(g: np.ndarray, f: DecomposableFitness) -> int:
    """Number of blocks carrying their table's best pattern."""
    return int((block_patterns(g, f.blocks) == f.best_patterns).sum())


def brute_force_optimum(f: DecomposableFitness) -> tuple[float, np.ndarray]:
    """Enumerate all 2**l genomes; only sensible for small l."""
    ell = f.blocks.length
    if ell > 20:
        raise ValueError("brute force limited to l <= 20")
    codes = np.arange(1 << ell, dtype=np.int64)[:, None]
    genomes = ((codes >> np.arange(ell - 1, -1, -1)) & 1).astype(np.uint8)
    fit = evaluate_population(f, genomes)
    return float(fit.max()), genomes[fit == fit.max()]


def tables_from_values(k: int, rows: Sequence[Sequence[float]]) -> tuple[SubfunctionTable, ...]:
    return tuple(SubfunctionTable(k, tuple(r)) for r in rows)
