"""Facetwise scalability models for the GA and the BB-wise mutation algorithm.

All logarithms are natural. The GA is sized by the gambler's-ruin model with a
per-block failure probability of 1/m, timed by the selection-intensity
convergence model, and costed as population size times convergence time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from rumble.functions import DecomposableFitness, fitness_variance

BINARY_TOURNAMENT_INTENSITY = 1 / math.sqrt(math.pi)

_C_BRACKET = (0.5, 200.0)


@dataclass(frozen=True)
class ModelParams:
    k: int
    m: int
    d: float
    sigma_bb: float
    sigma_f_sq: float
    sigma_n_sq: float = 0.0
    alpha: float | None = None
    tournament_size: int = 2
    selection_intensity: float | None = None

    def __post_init__(self):
        if self.alpha is None:
            object.__setattr__(self, "alpha", 1.0 / self.m if self.m > 0 else float("nan"))
        if self.selection_intensity is None:
            if self.tournament_size != 2:
                raise ValueError("selection intensity must be given for tournament sizes other than 2")
            object.__setattr__(self, "selection_intensity", BINARY_TOURNAMENT_INTENSITY)
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.m < 2:
            raise ValueError("the models need m >= 2 (they use ln m)")
        if not self.d > 0:
            raise ValueError("signal d must be positive")
        if self.sigma_bb < 0 or self.sigma_n_sq < 0:
            raise ValueError("sigma_bb and sigma_n_sq must be non-negative")
        if not self.sigma_f_sq > 0:
            raise ValueError("sigma_f_sq must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.tournament_size == 2 and not math.isclose(
                self.selection_intensity, BINARY_TOURNAMENT_INTENSITY, rel_tol=1e-12):
            raise ValueError("binary tournament selection has intensity 1/sqrt(pi)")
        if not self.selection_intensity > 0:
            raise ValueError("selection intensity must be positive")

    @classmethod
    def from_fitness(cls, f: DecomposableFitness, alpha: float | None = None,
                     noise_variance: float | None = None) -> "ModelParams":
        """Model inputs from a problem; block statistics are computed exactly."""
        sigma_n_sq = f.noise_variance if noise_variance is None else noise_variance
        return cls(k=f.k, m=f.m, d=f.d, sigma_bb=f.sigma_bb, sigma_f_sq=fitness_variance(f),
                   sigma_n_sq=float(sigma_n_sq), alpha=alpha)

    @property
    def length(self) -> int:
        return self.m * self.k

    @property
    def noise_ratio(self) -> float:
        """r = sigma_N^2 / sigma_f^2."""
        return self.sigma_n_sq / self.sigma_f_sq

    @property
    def noise_factor(self) -> float:
        return 1.0 + self.noise_ratio


def pop_size_deterministic(p: ModelParams) -> float:
    return (math.sqrt(math.pi) / 2) * (p.sigma_bb / p.d) * 2 ** p.k * math.sqrt(p.m) * math.log(p.m)


def pop_size_noisy(p: ModelParams) -> float:
    return pop_size_deterministic(p) * math.sqrt(p.noise_factor)


def pop_size(p: ModelParams, noisy: bool = False) -> float:
    return pop_size_noisy(p) if noisy else pop_size_deterministic(p)


def convergence_generations(length: int, noise_ratio: float = 0.0,
                            intensity: float = BINARY_TOURNAMENT_INTENSITY) -> float:
    """pi / (2 I) * sqrt(l) * sqrt(1 + r)."""
    return math.pi / (2 * intensity) * math.sqrt(length) * math.sqrt(1 + noise_ratio)


def convergence_time(p: ModelParams, noisy: bool = False) -> float:
    # The noisy form scales with sqrt(l), not sqrt(m), so that n * t_c gives the GA cost.
    return convergence_generations(p.length, p.noise_ratio if noisy else 0.0, p.selection_intensity)


def ga_cost(p: ModelParams, noisy: bool = False) -> float:
    """Closed-form GA evaluations; algebraically pop_size * convergence_time."""
    scale = math.pi ** 1.5 / (4 * p.selection_intensity)  # pi^2/4 for binary tournaments
    cost = scale * (p.sigma_bb / p.d) * math.sqrt(p.k) * math.log(p.m) * 2 ** p.k * p.m
    return cost * p.noise_factor if noisy else cost


def bbma_evaluations(k: int, m: int) -> int:
    """Evaluations of one enumerative BB-wise mutation sweep: (2^k - 1) m + 1."""
    return ((1 << k) - 1) * m + 1


def bbma_cost_deterministic(p: ModelParams) -> int:
    return bbma_evaluations(p.k, p.m)


def gaussian_tail(c: float) -> float:
    """Tail approximation exp(-c/2) / sqrt(2c)."""
    return math.exp(-c / 2) / math.sqrt(2 * c)


def solve_c(alpha: float) -> float:
    """Squared standard-normal ordinate c with gaussian_tail(c) == alpha."""
    if not 0 < alpha < 0.2:
        raise ValueError(f"alpha = {alpha} outside (0, 0.2) where the tail approximation holds")
    lo, hi = _C_BRACKET
    return brentq(lambda c: gaussian_tail(c) - alpha, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def sample_size_real(p: ModelParams) -> float:
    if p.sigma_n_sq == 0:
        return 1.0
    return 2 * solve_c(p.alpha) * p.sigma_n_sq / p.d ** 2


def sample_size(p: ModelParams) -> int:
    """Fitness samples averaged per candidate, rounded up, at least 1."""
    if p.sigma_n_sq == 0:
        return 1
    return max(1, math.ceil(sample_size_real(p) - 1e-9))


def bbma_cost_noisy(p: ModelParams) -> int:
    return sample_size(p) * bbma_evaluations(p.k, p.m)


def bbma_cost(p: ModelParams, noisy: bool = False) -> int:
    return bbma_cost_noisy(p) if noisy else bbma_cost_deterministic(p)


def speedup_deterministic(p: ModelParams) -> float:
    """GA evaluations over BBMA evaluations (mutation's advantage)."""
    return ga_cost(p) / bbma_cost_deterministic(p)


def speedup_noisy(p: ModelParams) -> float:
    """BBMA evaluations over GA evaluations (crossover's advantage)."""
    if p.sigma_n_sq == 0:
        raise ValueError("noisy speed-up needs sigma_n_sq > 0; use speedup_deterministic")
    return bbma_cost_noisy(p) / ga_cost(p, noisy=True)


def onemax_speedup(m: int) -> float:
    """(pi^2/4) ln m, the large-m form for OneMax."""
    return math.pi ** 2 / 4 * math.log(m)


def onemax_speedup_exact(m: int) -> float:
    return math.pi ** 2 / 4 * m * math.log(m) / (m + 1)


def trap_speedup(p: ModelParams) -> float:
    """(pi^2/4) (sigma_bb/d) sqrt(k) ln m, the large-m form for traps."""
    return math.pi ** 2 / 4 * (p.sigma_bb / p.d) * math.sqrt(p.k) * math.log(p.m)


def noisy_onemax_speedup(m: int, noise_ratio: float, c: float) -> float:
    """(4c/pi^2) (m / ln m) r / (1 + r)."""
    return 4 * c / math.pi ** 2 * m / math.log(m) * noise_ratio / (1 + noise_ratio)


def predicted_speedup(p: ModelParams, noisy: bool) -> float:
    """The speed-up reported as ``eta_predicted``.

    Deterministic: cost ratio GA/BBMA. Noisy with k = 1: the closed OneMax form
    (any k = 1 table is a rescaled OneMax, and r is scale free). Noisy with
    k > 1: cost ratio BBMA/GA.
    """
    if not noisy:
        return speedup_deterministic(p)
    if p.k == 1:
        return noisy_onemax_speedup(p.m, p.noise_ratio, solve_c(p.alpha))
    return speedup_noisy(p)


def round_population(n: float) -> int:
    """Round a model population size up to the next even integer (at least 2)."""
    size = max(2, math.ceil(n - 1e-9))
    return size + size % 2


def default_generation_cap(length: int, noise_ratio: float = 0.0) -> int:
    return math.ceil(3 * convergence_generations(length, noise_ratio))


@dataclass(frozen=True)
class Prediction:
    population_size: float
    population_size_rounded: int
    convergence_time: float
    ga_cost: float
    bbma_cost: int
    sample_size: float
    sample_size_rounded: int
    speedup: float
    c: float


def predict(p: ModelParams, noisy: bool | None = None) -> Prediction:
    """Every model output for one parameter set; ``noisy`` defaults to sigma_n_sq > 0."""
    if noisy is None:
        noisy = p.sigma_n_sq > 0
    n = pop_size(p, noisy)
    c = solve_c(p.alpha) if p.alpha < 0.2 else float("nan")
    return Prediction(
        population_size=n,
        population_size_rounded=round_population(n),
        convergence_time=convergence_time(p, noisy),
        ga_cost=ga_cost(p, noisy),
        bbma_cost=bbma_cost(p, noisy),
        sample_size=sample_size_real(p) if noisy else 1.0,
        sample_size_rounded=sample_size(p) if noisy else 1,
        speedup=predicted_speedup(p, noisy),
        c=c,
    )
