"""Genomes, block structure and seeded random streams.

A genome is a 1-D ``numpy.uint8`` array of 0/1 alleles; a population is a 2-D
array with one genome per row. Block patterns are packed in locus order with the
first locus of a block as the most significant bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finaliser; a bijection on 64-bit integers."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def mix_seed(base_seed: int, stream_id: int) -> int:
    """Derive a stream seed as ``splitmix64(splitmix64(base_seed) ^ stream_id)``.

    For a fixed base seed the map is injective in ``stream_id``, so distinct
    trials never share a seed.
    """
    return splitmix64(splitmix64(base_seed & MASK64) ^ (stream_id & MASK64))


@dataclass
class RngStream:
    """A reproducible random stream owned by one trial.

    The underlying generator is PCG64 seeded with ``mix_seed(base_seed, stream_id)``.
    Two streams built from the same pair produce identical draws.
    """

    base_seed: int
    stream_id: int = 0
    gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (0 <= self.base_seed <= MASK64 and 0 <= self.stream_id <= MASK64):
            raise ValueError("base_seed and stream_id must be unsigned 64-bit integers")
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    @property
    def seed(self) -> int:
        return mix_seed(self.base_seed, self.stream_id)

    def child(self, stream_id: int) -> "RngStream":
        """A stream keyed on this stream's seed, for nested trial indexing."""
        return RngStream(self.seed, stream_id)


@dataclass(frozen=True)
class BlockStructure:
    """Partition of ``m * k`` loci into ``m`` blocks of ``k`` loci."""

    m: int
    k: int
    locus_map: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.m < 1 or self.k < 1:
            raise ValueError("m and k must be positive")
        if len(self.locus_map) != self.m:
            raise ValueError(f"locus_map has {len(self.locus_map)} blocks, expected {self.m}")
        if any(len(loci) != self.k for loci in self.locus_map):
            raise ValueError(f"every block must list exactly {self.k} loci")
        flat = sorted(i for loci in self.locus_map for i in loci)
        if flat != list(range(self.m * self.k)):
            raise ValueError("locus lists must be disjoint and cover 0..l-1")

    @classmethod
    def contiguous(cls, m: int, k: int) -> "BlockStructure":
        """Block j owns loci j*k .. j*k+k-1."""
        return cls(m, k, tuple(tuple(range(j * k, j * k + k)) for j in range(m)))

    @classmethod
    def from_permutation(cls, m: int, k: int, order: Sequence[int]) -> "BlockStructure":
        """Chop a permutation of the loci into consecutive blocks."""
        order = [int(i) for i in order]
        return cls(m, k, tuple(tuple(order[j * k:(j + 1) * k]) for j in range(m)))

    @property
    def length(self) -> int:
        return self.m * self.k

    @cached_property
    def index(self) -> np.ndarray:
        """(m, k) locus indices."""
        return np.array(self.locus_map, dtype=np.intp).reshape(self.m, self.k)

    @cached_property
    def weights(self) -> np.ndarray:
        return 1 << np.arange(self.k - 1, -1, -1, dtype=np.int64)

    @cached_property
    def block_of_locus(self) -> np.ndarray:
        out = np.empty(self.length, dtype=np.intp)
        out[self.index] = np.arange(self.m)[:, None]
        return out

    @cached_property
    def pattern_bits(self) -> np.ndarray:
        """(2**k, k) table unpacking each pattern value into its locus-order bits."""
        values = np.arange(1 << self.k)[:, None]
        return ((values >> np.arange(self.k - 1, -1, -1)) & 1).astype(np.uint8)


def check_genome(g: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    g = np.asarray(g)
    if g.shape[-1] != blocks.length:
        raise ValueError(f"genome length {g.shape[-1]} does not match l = {blocks.length}")
    return g


def genome_from_string(bits: str) -> np.ndarray:
    """'1010' -> array([1, 0, 1, 0], dtype=uint8)."""
    if set(bits) - {"0", "1"}:
        raise ValueError(f"not a binary string: {bits!r}")
    return np.array([int(c) for c in bits], dtype=np.uint8)


def genome_to_string(g: np.ndarray) -> str:
    return "".join(str(int(b)) for b in g)


def random_genome(blocks: BlockStructure, rng: RngStream) -> np.ndarray:
    return rng.gen.integers(0, 2, size=blocks.length, dtype=np.uint8)


def random_population(n: int, blocks: BlockStructure, rng: RngStream) -> np.ndarray:
    return rng.gen.integers(0, 2, size=(n, blocks.length), dtype=np.uint8)


def block_patterns(genomes: np.ndarray, blocks: BlockStructure) -> np.ndarray:
    """Packed pattern of every block; shape ``genomes.shape[:-1] + (m,)``."""
    genomes = check_genome(genomes, blocks)
    return genomes[..., blocks.index].astype(np.int64) @ blocks.weights


def get_block(g: np.ndarray, blocks: BlockStructure, j: int) -> int:
    if not 0 <= j < blocks.m:
        raise IndexError(f"block index {j} out of range for m = {blocks.m}")
    g = check_genome(g, blocks)
    return int(g[blocks.index[j]].astype(np.int64) @ blocks.weights)


def set_block(g: np.ndarray, blocks: BlockStructure, j: int, pattern: int) -> np.ndarray:
    """Copy of ``g`` with block ``j`` overwritten by ``pattern``."""
    if not 0 <= j < blocks.m:
        raise IndexError(f"block index {j} out of range for m = {blocks.m}")
    if not 0 <= pattern < (1 << blocks.k):
        raise ValueError(f"pattern {pattern} does not fit in k = {blocks.k} bits")
    out = check_genome(g, blocks).copy()
    out[blocks.index[j]] = blocks.pattern_bits[pattern]
    return out
