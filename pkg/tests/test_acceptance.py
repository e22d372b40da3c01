"""Acceptance criteria, one PASS/FAIL line each.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest. The
two large sweeps (OneMax with and without noise) take about a minute each on
one core.
"""

import math
import sys

import numpy as np
import pytest

from rumble.bbma import BbmaConfig, run_bbma
from rumble.cli import main as cli_main
from rumble.core import BlockStructure, RngStream, block_patterns, random_population
from rumble.experiments import SweepSpec, rumble, verify_sample_size
from rumble.functions import (
    DecomposableFitness,
    SubfunctionTable,
    brute_force_optimum,
    make_onemax,
    make_trap_problem,
)
from rumble.ga import GaConfig, crossover_population, run_ga, select_parents
from rumble.models import (
    ModelParams,
    bbma_cost_deterministic,
    bbma_cost_noisy,
    convergence_time,
    gaussian_tail,
    ga_cost,
    onemax_speedup,
    pop_size_deterministic,
    pop_size_noisy,
    solve_c,
    trap_speedup,
)

SEED = 1
TRIALS = 300


@pytest.fixture
def report(capsys):
    def emit(label, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] {label}" + (f": {detail}" if detail else ""))
        return ok
    return emit


# 1. Exact BBMA cost


def test_c1_exact_bbma_cost(report):
    bad = []
    for k in range(1, 7):
        for m in range(1, 51):
            f = make_onemax(m) if k == 1 else make_trap_problem(k, m)
            expected = ((1 << k) - 1) * m + 1
            if run_bbma(f, BbmaConfig(), RngStream(SEED, k * 100 + m)).evaluations != expected:
                bad.append((k, m, "deterministic"))
            ns = 1 + (k + m) % 5
            noisy = f.with_noise(1.0)
            if run_bbma(noisy, BbmaConfig(samples=ns), RngStream(SEED, k * 100 + m)).evaluations != ns * expected:
                bad.append((k, m, f"noisy n_s={ns}"))
    assert report("1 exact BBMA cost over k=1..6, m=1..50", not bad, f"{len(bad)} mismatches"), bad


# 2. Model identities


def test_c2_model_identities(report):
    rng = np.random.default_rng(SEED)
    worst = 0.0
    reductions_ok = True
    for noisy in (False, True):
        for _ in range(1000):
            k, m = int(rng.integers(1, 8)), int(rng.integers(2, 5000))
            sigma = float(rng.uniform(0.01, 10))
            p = ModelParams(k=k, m=m, d=float(rng.uniform(0.01, 10)), sigma_bb=sigma,
                            sigma_f_sq=m * sigma ** 2,
                            sigma_n_sq=float(rng.uniform(0, 50)) * m * sigma ** 2 if noisy else 0.0)
            n = pop_size_noisy(p) if noisy else pop_size_deterministic(p)
            product = n * convergence_time(p, noisy)
            worst = max(worst, abs(ga_cost(p, noisy) - product) / product)
            if not noisy:
                reductions_ok &= (pop_size_noisy(p) == pop_size_deterministic(p)
                                  and convergence_time(p, True) == convergence_time(p, False)
                                  and ga_cost(p, True) == ga_cost(p, False)
                                  and bbma_cost_noisy(p) == bbma_cost_deterministic(p))
    alphas = np.geomspace(1e-12, 0.199, 200)
    round_trip = max(abs(gaussian_tail(solve_c(a)) - a) for a in alphas)
    ok = worst <= 1e-9 and reductions_ok and round_trip <= 1e-10
    detail = f"max rel err {worst:.2e}, exact reduction {reductions_ok}, solve_c round trip {round_trip:.1e}"
    assert report("2 model identity suite", ok, detail)


# 3. OneMax speed-up sweep


@pytest.fixture(scope="module")
def onemax_rows():
    return rumble(SweepSpec("onemax", [50, 100, 200, 400], trials=TRIALS, base_seed=SEED))


def _band_detail(rows, approx=None):
    parts = []
    for r in rows:
        extra = f", closed form {approx(r):.3f}" if approx else ""
        parts.append(f"m={r.m} obs {r.eta_observed:.3f} pred {r.eta_predicted:.3f} "
                     f"(x{r.eta_observed / r.eta_predicted:.3f}{extra}, GA success {r.ga_success_rate:.2f})")
    return "; ".join(parts)


@pytest.mark.slow
def test_c3_onemax_band(onemax_rows, report):
    ok = all(abs(r.eta_observed / r.eta_predicted - 1) <= 0.25 for r in onemax_rows)
    assert report("3a OneMax speed-up within 25% of prediction", ok,
                  _band_detail(onemax_rows, lambda r: onemax_speedup(r.m)))


@pytest.mark.slow
def test_c3_onemax_monotone(onemax_rows, report):
    etas = [r.eta_observed for r in onemax_rows]
    ok = all(a < b for a, b in zip(etas, etas[1:]))
    assert report("3b OneMax speed-up increases with m", ok, ", ".join(f"{e:.3f}" for e in etas))


# 4. Trap speed-up sweep


@pytest.mark.slow
def test_c4_trap(report):
    rows = rumble(SweepSpec("trap", [5, 10, 20], k=4, trials=TRIALS, base_seed=SEED))
    sigma = make_trap_problem(4, 1).stats[0].sigma_bb
    band = all(abs(r.eta_observed / r.eta_predicted - 1) <= 0.30 for r in rows)
    bbma = all(r.bbma_success_rate == 1.0 for r in rows)

    def closed(r):
        return trap_speedup(ModelParams.from_fitness(make_trap_problem(4, r.m)))

    ok = band and bbma and abs(sigma - 1.1022) < 5e-5
    detail = f"sigma_BB {sigma:.5f}; " + _band_detail(rows, closed)
    detail += f"; BBMA success {[r.bbma_success_rate for r in rows]}"
    assert report("4 trap k=4 speed-up within 30%, BBMA always optimal", ok, detail)


# 5. Sample size


def test_c5_sample_size(report):
    rows = verify_sample_size("onemax", 20, [0.5, 1.0, 2.0, 4.0], base_seed=SEED)
    within = all(0.5 <= r.n_s_empirical / r.n_s_model <= 2.0 for r in rows)
    emp = [r.n_s_empirical for r in rows]
    monotone = emp == sorted(emp)
    detail = ", ".join(f"var {r.sigma_n_sq}: empirical {r.n_s_empirical} model {r.n_s_model}" for r in rows)
    assert report("5 empirical n_s within factor 2 of model and nondecreasing", within and monotone, detail)


# 6. Noisy OneMax sweep


@pytest.fixture(scope="module")
def noisy_rows():
    return rumble(SweepSpec("onemax", [50, 100, 200], noise_ratios=[1.0], trials=TRIALS, base_seed=SEED))


@pytest.mark.slow
def test_c6_noisy_band(noisy_rows, report):
    ok = all(abs(r.eta_observed / r.eta_predicted - 1) <= 0.35 for r in noisy_rows)
    assert report("6a noisy OneMax speed-up within 35% of prediction", ok, _band_detail(noisy_rows))


@pytest.mark.slow
def test_c6_noisy_crossover_wins(noisy_rows, report):
    ok = all(r.eta_observed > 1 for r in noisy_rows)
    assert report("6b noisy OneMax speed-up above 1", ok,
                  ", ".join(f"m={r.m}: {r.eta_observed:.3f}" for r in noisy_rows))


# 7. Property suites


def _random_separable(m, k, rng):
    tables = tuple(SubfunctionTable(k, tuple(rng.permutation(1 << k).astype(float))) for _ in range(m))
    return DecomposableFitness(BlockStructure.from_permutation(m, k, rng.permutation(m * k)), tables)


def test_c7_properties(report):
    rng = np.random.default_rng(SEED)
    failures = []

    blocks = BlockStructure.from_permutation(6, 3, rng.permutation(18))
    stream = RngStream(SEED, 7)
    parents = random_population(2 * 10 ** 4, blocks, stream)
    children = crossover_population(parents, blocks, stream)
    pp = np.sort(block_patterns(parents, blocks).reshape(-1, 2, 6), axis=1)
    cp = np.sort(block_patterns(children, blocks).reshape(-1, 2, 6), axis=1)
    if not np.array_equal(pp, cp):
        failures.append("crossover multiset")

    for t in range(20):
        f = make_trap_problem(3, 8) if t % 2 else make_onemax(30)
        initial = None
        seen = []

        def observer(g, members, f=f, seen=seen):
            pats = block_patterns(members, f.blocks)
            if not seen:
                seen.append([set(pats[:, j]) for j in range(f.m)])
            elif any(not set(pats[:, j]) <= seen[0][j] for j in range(f.m)):
                failures.append(f"closed pattern run {t}")

        cfg = GaConfig.for_problem(f)
        r = run_ga(f, cfg, RngStream(SEED, 100 + t), initial, observer)
        if r.evaluations != cfg.population_size * (r.generations + 1):
            failures.append(f"accounting run {t}")

    checked = 0
    for m in range(1, 5):
        for k in range(1, 5):
            for _ in range(10):
                f = _random_separable(m, k, rng)
                best, _ = brute_force_optimum(f)
                if run_bbma(f, BbmaConfig(), RngStream(SEED, checked)).best_fitness != best:
                    failures.append(f"bbma optimum m={m} k={k}")
                checked += 1
    ok = not failures
    assert report("7 property suites", ok, f"{checked} BBMA instances up to l=16; failures {failures[:5]}")


# 8. Reproducibility


def test_c8_reproducible(report, tmp_path, capsys):
    argv = ["rumble", "--problem", "trap", "--k", "3", "--m", "6", "--m", "10",
            "--noise-var", "0", "--noise-var", "1", "--trials", "20", "--seed", str(SEED)]
    outs = []
    for i, threads in enumerate((1, 1, 2)):
        path = tmp_path / f"run{i}.csv"
        assert cli_main(argv + ["--threads", str(threads), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    assert report("8 byte-identical sweep CSV across reruns and thread counts", ok)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
