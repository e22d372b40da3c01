"""Seeded head-to-head sweeps and the sample-size verification.

Every trial owns an :class:`RngStream` derived from the base seed, the sweep
point (m, noise variance) and the trial index, so results do not depend on the
order or parallelism with which trials execute.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import struct
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from rumble.bbma import BbmaConfig, block_decision_accuracy, run_bbma
from rumble.core import RngStream, mix_seed
from rumble.functions import (
    DecomposableFitness,
    SubfunctionTable,
    fitness_variance,
    load_table,
    make_onemax,
    make_trap_problem,
    make_uniform_problem,
)
from rumble.ga import GaConfig, RunRecord, run_ga
from rumble.models import (
    ModelParams,
    default_generation_cap,
    pop_size,
    predicted_speedup,
    round_population,
    sample_size,
    sample_size_real,
)

log = logging.getLogger(__name__)

Z95 = 1.96

CI_METHOD = (
    "delta method for a ratio of independent sample means: "
    "var(A/B) ~= (A/B)^2 * (s_A^2/(n_A*A^2) + s_B^2/(n_B*B^2)); "
    "interval = eta +/- 1.96*sqrt(var). A = mean GA evaluations over successful runs, "
    "B = mean BBMA evaluations over all runs; eta = A/B when noiseless, B/A when noisy."
)


def make_problem(problem: str, m: int, k: int | None = None, noise_variance: float = 0.0,
                 table: SubfunctionTable | None = None) -> DecomposableFitness:
    """Build ``onemax``, ``trap`` (needs k) or ``table:<path>`` problems."""
    if problem == "onemax":
        return make_onemax(m, noise_variance)
    if problem == "trap":
        if k is None:
            raise ValueError("trap problems need k")
        return make_trap_problem(k, m, noise_variance)
    if problem.startswith("table:"):
        table = table or load_table(problem[len("table:"):])
        return make_uniform_problem(table, m, noise_variance, name=problem)
    raise ValueError(f"unknown problem {problem!r}; expected onemax, trap or table:<path>")


def _float_bits(x: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(x)))[0]


def point_seed(base_seed: int, m: int, noise_variance: float) -> int:
    """Seed shared by all trials of one sweep point."""
    return mix_seed(base_seed, mix_seed(m, _float_bits(noise_variance)))


@dataclass
class SweepSpec:
    problem: str
    m_values: Sequence[int]
    noise_variances: Sequence[float] = (0.0,)
    trials: int = 300
    base_seed: int = 0
    k: int | None = None
    alpha: float | None = None
    success_threshold: int | None = None
    # When set, noise variances are r * sigma_f^2 of each m instead of absolute values.
    noise_ratios: Sequence[float] | None = None
    threads: int = 1
    tournament_replacement: bool = False

    def __post_init__(self):
        self.m_values = [int(m) for m in self.m_values]
        if not self.m_values or min(self.m_values) < 2:
            raise ValueError("m values must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        levels = self.noise_ratios if self.noise_ratios is not None else self.noise_variances
        if not levels or any(not (v >= 0 and math.isfinite(v)) for v in levels):
            raise ValueError("noise levels must be finite and >= 0")
        if self.alpha is not None and not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.problem == "trap" and (self.k is None or self.k < 2):
            raise ValueError("trap problems need k >= 2")
        if self.success_threshold is not None and not 0 <= self.success_threshold <= min(self.m_values):
            raise ValueError("success threshold must lie in [0, m] for every m")

    def points(self) -> list[tuple[int, float]]:
        table = None
        if self.problem.startswith("table:"):
            table = load_table(self.problem[len("table:"):])
        out = []
        for m in self.m_values:
            if self.noise_ratios is None:
                out += [(m, float(v)) for v in self.noise_variances]
            else:
                var_f = fitness_variance(make_problem(self.problem, m, self.k, table=table))
                out += [(m, float(r) * var_f) for r in self.noise_ratios]
        return out


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    std: float
    ci_lo: float
    ci_hi: float
    success_rate: float


def aggregate(records: Sequence[RunRecord]) -> Summary:
    """Mean, sample standard deviation and normal 95% interval of evaluations."""
    if not records:
        raise ValueError("cannot aggregate an empty list of runs")
    evals = np.array([r.evaluations for r in records], dtype=float)
    mean = float(evals.mean())
    std = float(evals.std(ddof=1)) if len(evals) > 1 else 0.0
    half = Z95 * std / math.sqrt(len(evals))
    rate = sum(r.success for r in records) / len(records)
    return Summary(len(evals), mean, std, mean - half, mean + half, rate)


def ratio_interval(num: Summary, den: Summary) -> tuple[float, float, float]:
    eta = num.mean / den.mean
    rel = (num.std ** 2 / (num.count * num.mean ** 2)) + (den.std ** 2 / (den.count * den.mean ** 2))
    half = Z95 * eta * math.sqrt(rel)
    return eta, eta - half, eta + half


@dataclass(frozen=True)
class SpeedupRow:
    problem: str
    k: int
    m: int
    sigma_n_sq: float
    r: float
    n_model: int
    n_s_model: int
    eta_predicted: float
    eta_observed: float
    eta_ci_lo: float
    eta_ci_hi: float
    ga_success_rate: float
    bbma_success_rate: float
    ga_mean_evals: float
    bbma_mean_evals: float
    trials: int
    base_seed: int
    ga_failures: int = field(default=0, compare=False)

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "ga_failures"]

    @property
    def noisy(self) -> bool:
        return self.sigma_n_sq > 0

    def values(self) -> list:
        return list(astuple(self))[:len(self.columns())]


def _trial(task) -> RunRecord:
    kind, f, cfg, seed, stream_id = task
    rng = RngStream(seed, stream_id)
    return run_ga(f, cfg, rng) if kind == "ga" else run_bbma(f, cfg, rng)


def run_trials(tasks: list, threads: int = 1) -> list[RunRecord]:
    """Execute trials, returning records in task order whatever the worker count."""
    if threads <= 1 or len(tasks) < 2:
        return [_trial(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_trial, tasks, chunksize=chunk))


@dataclass
class PointResult:
    row: SpeedupRow
    ga: list[RunRecord]
    bbma: list[RunRecord]


def rumble_point(spec: SweepSpec, m: int, noise_variance: float,
                 table: SubfunctionTable | None = None) -> PointResult:
    f = make_problem(spec.problem, m, spec.k, noise_variance, table)
    params = ModelParams.from_fitness(f, alpha=spec.alpha)
    noisy = noise_variance > 0
    n = round_population(pop_size(params, noisy))
    n_s = sample_size(params)
    threshold = max(m - 1, 0) if spec.success_threshold is None else spec.success_threshold
    cap = default_generation_cap(f.blocks.length, params.noise_ratio if noisy else 0.0)
    ga_cfg = GaConfig(n, cap, threshold, noisy=noisy, tournament_replacement=spec.tournament_replacement)
    bbma_cfg = BbmaConfig(samples=n_s, success_threshold=threshold)

    seed = point_seed(spec.base_seed, m, noise_variance)
    tasks = [("ga", f, ga_cfg, seed, 2 * t) for t in range(spec.trials)]
    tasks += [("bbma", f, bbma_cfg, seed, 2 * t + 1) for t in range(spec.trials)]
    records = run_trials(tasks, spec.threads)
    ga, bbma = records[:spec.trials], records[spec.trials:]

    ga_ok = [r for r in ga if r.success]
    bbma_summary = aggregate(bbma)
    if ga_ok:
        ga_summary = aggregate(ga_ok)
        if noisy:
            eta, lo, hi = ratio_interval(bbma_summary, ga_summary)
        else:
            eta, lo, hi = ratio_interval(ga_summary, bbma_summary)
        ga_mean = ga_summary.mean
    else:
        eta = lo = hi = ga_mean = float("nan")

    row = SpeedupRow(
        problem=spec.problem if spec.problem != "trap" else f"trap{spec.k}",
        k=f.k, m=m, sigma_n_sq=noise_variance, r=params.noise_ratio,
        n_model=n, n_s_model=n_s,
        eta_predicted=predicted_speedup(params, noisy),
        eta_observed=eta, eta_ci_lo=lo, eta_ci_hi=hi,
        ga_success_rate=len(ga_ok) / len(ga),
        bbma_success_rate=bbma_summary.success_rate,
        ga_mean_evals=ga_mean, bbma_mean_evals=bbma_summary.mean,
        trials=spec.trials, base_seed=spec.base_seed,
        ga_failures=len(ga) - len(ga_ok),
    )
    return PointResult(row, ga, bbma)


def rumble(spec: SweepSpec, progress: Callable[[SpeedupRow], None] | None = None) -> list[SpeedupRow]:
    """Run GA and BBMA trials at every sweep point and compare speed-ups."""
    table = load_table(spec.problem[len("table:"):]) if spec.problem.startswith("table:") else None
    rows = []
    for m, var in spec.points():
        row = rumble_point(spec, m, var, table).row
        if row.ga_failures == spec.trials:
            log.warning("m=%d sigma_n_sq=%g: no successful GA run in %d trials; eta undefined",
                        m, var, spec.trials)
        log.info("m=%d sigma_n_sq=%g eta_pred=%.4g eta_obs=%.4g ga_success=%.3f",
                 m, var, row.eta_predicted, row.eta_observed, row.ga_success_rate)
        if progress:
            progress(row)
        rows.append(row)
    return rows


@dataclass(frozen=True)
class SampleRow:
    problem: str
    k: int
    m: int
    sigma_n_sq: float
    alpha: float
    target_accuracy: float
    n_s_model_real: float
    n_s_model: int
    n_s_empirical: int
    accuracy_at_empirical: float
    saturated: bool
    decisions: int
    base_seed: int

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def values(self) -> list:
        return list(astuple(self))


def minimal_samples(accuracy: Callable[[int], float], target: float,
                    max_samples: int = 1 << 16) -> tuple[int, float, bool]:
    """Smallest n with accuracy(n) >= target by doubling then bisection.

    Returns ``(n, accuracy(n), saturated)``; saturated runs report ``max_samples``.
    """
    hi, acc = 1, accuracy(1)
    lo = 0
    while acc < target:
        lo, hi = hi, hi * 2
        if hi > max_samples:
            return max_samples, accuracy(max_samples), True
        acc = accuracy(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        a = accuracy(mid)
        if a >= target:
            hi, acc = mid, a
        else:
            lo = mid
    return hi, acc, False


def verify_sample_size(problem: str, m: int, noise_variances: Iterable[float], k: int | None = None,
                       alpha: float | None = None, decisions: int = 20000, base_seed: int = 0,
                       max_samples: int = 1 << 16) -> list[SampleRow]:
    """Model versus empirical sample counts for single-block decisions.

    Every accuracy estimate replays the same stream (common random numbers), so
    the empirical minimum is monotone in both the sample count and the noise.
    """
    if decisions < 2000:
        raise ValueError("use at least 2000 decisions per accuracy estimate")
    variances = [float(v) for v in noise_variances]
    if not variances or any(v < 0 for v in variances):
        raise ValueError("noise variances must be a non-empty list of values >= 0")
    table = load_table(problem[len("table:"):]) if problem.startswith("table:") else None
    rows = []
    for var in variances:
        f = make_problem(problem, m, k, var, table)
        params = ModelParams.from_fitness(f, alpha=alpha)
        target = 1 - params.alpha

        def accuracy(ns, f=f):
            return block_decision_accuracy(f, ns, decisions, RngStream(base_seed, 0))

        n_emp, acc, saturated = minimal_samples(accuracy, target, max_samples)
        rows.append(SampleRow(
            problem=problem if problem != "trap" else f"trap{k}", k=f.k, m=m, sigma_n_sq=var,
            alpha=params.alpha, target_accuracy=target,
            n_s_model_real=sample_size_real(params), n_s_model=sample_size(params),
            n_s_empirical=n_emp, accuracy_at_empirical=acc, saturated=saturated,
            decisions=decisions, base_seed=base_seed,
        ))
    return rows


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(columns: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def speedup_csv(rows: Sequence[SpeedupRow]) -> str:
    return to_csv(SpeedupRow.columns(), (r.values() for r in rows))


def samples_csv(rows: Sequence[SampleRow]) -> str:
    return to_csv(SampleRow.columns(), (r.values() for r in rows))


def check_writable(path: str | Path) -> None:
    """Raise OSError unless ``path`` can be created or replaced."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise OSError(f"output directory {parent} does not exist")
    if path.is_dir():
        raise OSError(f"output path {path} is a directory")
    if not os.access(parent, os.W_OK):
        raise OSError(f"output directory {parent} is not writable")


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sweep_metadata(spec: SweepSpec) -> str:
    meta = {
        "problem": spec.problem,
        "k": spec.k,
        "m_values": list(spec.m_values),
        "noise_variances": list(spec.noise_variances) if spec.noise_ratios is None else None,
        "noise_ratios": list(spec.noise_ratios) if spec.noise_ratios is not None else None,
        "trials": spec.trials,
        "base_seed": spec.base_seed,
        "alpha": spec.alpha,
        "success_threshold": spec.success_threshold,
        "eta_observed": "mean evaluations of successful GA runs vs mean BBMA evaluations; "
                        "GA/BBMA when noiseless, BBMA/GA when noisy",
        "eta_ci": CI_METHOD,
        "population_rounding": "model population rounded up to the next even integer",
        "tournament": "with replacement" if spec.tournament_replacement else "shuffled, without replacement",
    }
    return json.dumps(meta, indent=2, sort_keys=True) + "\n"
