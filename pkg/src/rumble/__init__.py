"""Crossover versus building-block-wise mutation on additively separable problems."""

from rumble.bbma import BbmaConfig, block_decision_accuracy, run_bbma
from rumble.core import BlockStructure, RngStream, get_block, random_genome, set_block
from rumble.functions import (
    DecomposableFitness,
    SubfunctionTable,
    block_stats,
    evaluate,
    evaluate_noisy,
    fitness_variance,
    load_table,
    make_onemax,
    make_trap,
    make_trap_problem,
)
from rumble.ga import GaConfig, RunRecord, run_ga
from rumble.models import ModelParams, predict

__version__ = "0.1.0"
