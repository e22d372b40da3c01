"""Command-line front end.

    rumble predict --problem onemax --m 100 --noise-var 25
    rumble run bbma --problem trap --k 4 --m 10 --seed 7
    rumble rumble --problem onemax --m 50 --m 100 --trials 300 --out onemax.csv
    rumble samples --problem onemax --m 20 --noise-var 0.5 --noise-var 1 --out samples.csv

Exit status: 0 on success, 2 on usage errors, 3 on I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from rumble.bbma import BbmaConfig, run_bbma
from rumble.core import MASK64, RngStream
from rumble.experiments import (
    SweepSpec,
    check_writable,
    make_problem,
    rumble,
    samples_csv,
    speedup_csv,
    sweep_metadata,
    to_csv,
    verify_sample_size,
    write_atomic,
)
from rumble.functions import fitness_variance, load_table
from rumble.ga import GaConfig, RunRecord, run_ga
from rumble.models import (
    ModelParams,
    default_generation_cap,
    pop_size,
    predict,
    round_population,
    sample_size,
    speedup_deterministic,
    speedup_noisy,
)

EXIT_USAGE = 2
EXIT_IO = 3

log = logging.getLogger("rumble")

PREDICT_COLUMNS = [
    "problem", "k", "m", "sigma_n_sq", "r", "alpha", "sigma_bb", "d",
    "n", "n_rounded", "t_c", "ga_cost", "bbma_cost", "n_s", "n_s_rounded", "c",
    "eta_predicted", "eta_cost_ratio",
]

RUN_COLUMNS = [
    "algorithm", "problem", "k", "m", "sigma_n_sq", "population_size", "samples",
    "evaluations", "generations", "success", "correct_bbs", "best_fitness",
    "fixated", "base_seed", "stream_id",
]

REPEATABLE = {"m", "noise_var", "noise_ratio"}


class UsageError(Exception):
    pass


def _nonneg_float(text: str) -> float:
    value = float(text)
    if not (value >= 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"expected a finite value >= 0, got {text}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value <= MASK64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file pre-populating flags; flags win")
    p.add_argument("--problem", default="onemax", help="onemax | trap | table:<path>")
    p.add_argument("--k", type=_positive_int, help="block size for trap problems")
    p.add_argument("--m", type=_positive_int, action="append", help="number of blocks (repeatable)")
    p.add_argument("--noise-var", type=_nonneg_float, action="append",
                   help="noise variance sigma_N^2 (repeatable)")
    p.add_argument("--noise-ratio", type=_nonneg_float, action="append",
                   help="noise as a multiple of the fitness variance (repeatable)")
    p.add_argument("--trials", type=_positive_int, default=300)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--alpha", type=float, help="failure probability (default 1/m)")
    p.add_argument("--threshold", type=int, help="correct blocks needed for success (default m-1)")
    p.add_argument("--out", help="output CSV path (default: standard output)")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker processes")
    p.add_argument("--tournament-replacement", action="store_true",
                   help="draw tournament contestants with replacement")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rumble", description="Crossover versus BB-wise mutation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="model predictions")
    _shared(p)

    p = sub.add_parser("run", help="one seeded run")
    p.add_argument("algorithm", choices=["ga", "bbma"])
    _shared(p)
    p.add_argument("--pop", type=_positive_int, help="GA population size (default: model, rounded even)")
    p.add_argument("--samples", type=_positive_int, help="BBMA samples per evaluation (default: model)")
    p.add_argument("--max-gen", type=_positive_int, help="GA generation cap (default: 3 t_c)")
    p.add_argument("--stream", type=_seed, default=0, help="stream id (trial index)")

    p = sub.add_parser("rumble", help="GA versus BBMA sweep")
    _shared(p)

    p = sub.add_parser("samples", help="sample-size verification")
    _shared(p)
    p.add_argument("--decisions", type=_positive_int, default=20000)
    return parser


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; repeatable keys take comma-separated lists."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"bad config line: {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = read_config(args.config)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    # Replay the config as flags placed before the command line so explicit flags win.
    prefix = []
    for key, value in cfg.items():
        if not hasattr(args, key):
            raise UsageError(f"unknown config key {key!r}")
        flag = "--" + key.replace("_", "-")
        if key in REPEATABLE:
            if getattr(args, key) is None:
                for item in value.split(","):
                    prefix += [flag, item.strip()]
        elif isinstance(getattr(args, key), bool):
            if value.lower() in ("1", "true", "yes"):
                prefix.append(flag)
        else:
            prefix += [flag, value]
    command = argv[0]
    rest = argv[1:]
    if command == "run":
        rest = [rest[0]] + prefix + rest[1:]
    else:
        rest = prefix + rest
    return parser.parse_args([command] + rest)


def _validate(args) -> None:
    problem = args.problem
    if problem == "trap":
        if args.k is None or args.k < 2:
            raise UsageError("--problem trap needs --k >= 2")
    elif problem.startswith("table:"):
        try:
            args.table = load_table(problem[len("table:"):])
        except OSError as exc:
            raise UsageError(f"cannot read table file: {exc}") from exc
        except ValueError as exc:
            raise UsageError(f"bad table file: {exc}") from exc
    elif problem != "onemax":
        raise UsageError(f"unknown problem {problem!r}")
    if not args.m:
        raise UsageError("at least one --m is required")
    if args.noise_var and args.noise_ratio:
        raise UsageError("--noise-var and --noise-ratio are mutually exclusive")
    if args.alpha is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if args.threshold is not None and not 0 <= args.threshold <= min(args.m):
        raise UsageError("--threshold must lie in [0, m]")
    if args.command in ("predict", "rumble") and min(args.m) < 2:
        raise UsageError("the models need m >= 2")
    if args.command == "run" and len(args.m) > 1:
        raise UsageError("run takes a single --m")
    if args.command == "samples" and len(args.m) > 1:
        raise UsageError("samples takes a single --m")
    if args.out:
        try:
            check_writable(args.out)
        except OSError as exc:
            raise IOError(str(exc)) from exc


def _noise_levels(args, f_for_m) -> list[float]:
    """Absolute noise variances for one m."""
    if args.noise_ratio:
        var_f = fitness_variance(f_for_m)
        return [r * var_f for r in args.noise_ratio]
    return list(args.noise_var or [0.0])


def _emit(args, text: str) -> None:
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def cmd_predict(args) -> int:
    table = getattr(args, "table", None)
    rows = []
    for m in args.m:
        base = make_problem(args.problem, m, args.k, 0.0, table)
        for var in _noise_levels(args, base):
            f = base.with_noise(var)
            p = ModelParams.from_fitness(f, alpha=args.alpha)
            noisy = var > 0
            pred = predict(p, noisy)
            ratio = speedup_noisy(p) if noisy else speedup_deterministic(p)
            rows.append([f.name, f.k, m, var, p.noise_ratio, p.alpha, p.sigma_bb, p.d,
                         pred.population_size, pred.population_size_rounded, pred.convergence_time,
                         pred.ga_cost, pred.bbma_cost, pred.sample_size, pred.sample_size_rounded,
                         pred.c, pred.speedup, ratio])
    _emit(args, to_csv(PREDICT_COLUMNS, rows))
    return 0


def cmd_run(args) -> int:
    m = args.m[0]
    base = make_problem(args.problem, m, args.k, 0.0, getattr(args, "table", None))
    levels = _noise_levels(args, base)
    if len(levels) != 1:
        raise UsageError("run takes a single noise level")
    f = base.with_noise(levels[0])
    noisy = f.noise_variance > 0
    threshold = max(m - 1, 0) if args.threshold is None else args.threshold
    rng = RngStream(args.seed, args.stream)
    needs_model = (args.algorithm == "ga" and args.pop is None) or (
        args.algorithm == "bbma" and args.samples is None and noisy)
    if needs_model and m < 2:
        raise UsageError("model defaults need m >= 2; pass --pop/--samples explicitly")
    params = ModelParams.from_fitness(f, alpha=args.alpha) if needs_model else None
    if args.algorithm == "ga":
        n = args.pop if args.pop is not None else round_population(pop_size(params, noisy))
        if n % 2:
            raise UsageError("--pop must be even")
        ratio = f.noise_variance / fitness_variance(f)
        cap = args.max_gen or default_generation_cap(f.blocks.length, ratio if noisy else 0.0)
        cfg = GaConfig(n, cap, threshold, noisy=noisy, tournament_replacement=args.tournament_replacement)
        record = run_ga(f, cfg, rng)
    else:
        ns = args.samples if args.samples is not None else (sample_size(params) if noisy else 1)
        record = run_bbma(f, BbmaConfig(samples=ns, success_threshold=threshold), rng)
    _emit(args, to_csv(RUN_COLUMNS, [_run_row(record, f)]))
    return 0


def _run_row(r: RunRecord, f) -> list:
    return [r.algorithm, f.name, f.k, f.m, f.noise_variance, r.population_size, r.samples,
            r.evaluations, r.generations, r.success, r.correct_bbs, r.best_fitness,
            r.fixated, r.base_seed, r.stream_id]


def cmd_rumble(args) -> int:
    try:
        spec = SweepSpec(
            problem=args.problem, m_values=args.m, noise_variances=args.noise_var or [0.0],
            noise_ratios=args.noise_ratio, trials=args.trials, base_seed=args.seed, k=args.k,
            alpha=args.alpha, success_threshold=args.threshold, threads=args.threads,
            tournament_replacement=args.tournament_replacement,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rows = rumble(spec)
    _emit(args, speedup_csv(rows))
    if args.out:
        write_atomic(args.out + ".meta.json", sweep_metadata(spec))
    return 0


def cmd_samples(args) -> int:
    if args.noise_ratio:
        raise UsageError("samples takes absolute --noise-var values")
    try:
        rows = verify_sample_size(args.problem, args.m[0], args.noise_var or [0.0], k=args.k,
                                  alpha=args.alpha, decisions=args.decisions, base_seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _emit(args, samples_csv(rows))
    return 0


COMMANDS = {"predict": cmd_predict, "run": cmd_run, "rumble": cmd_rumble, "samples": cmd_samples}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        _validate(args)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code not in (None, 0) else 0
    except (UsageError, ValueError) as exc:
        print(f"rumble: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rumble: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
