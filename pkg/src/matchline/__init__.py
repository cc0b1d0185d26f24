"""matchline: a simulation and verification lab for online matching on a line.

Servers sit at the integers 1..n of the segment [0, n+1] with n = 2**i - 1.
A randomized request sequence arrives over i rounds; round r splits the
segment into (n+1)/2**r cells and draws one request uniformly in each cell.
The package provides the request generator, online matching algorithms, the
exact offline optimum, and exact/statistical checkers for the distribution's
cost guarantees, including the competitive-ratio floor sqrt(log2(n+1))/12.
"""

from matchline.adversary import GenParams, Instance, generate
from matchline.algorithms import ALGORITHM_KINDS, AlgorithmSpec, RunStats, run
from matchline.experiments import ExperimentConfig, SuiteResult, run_prefix_known, run_suite
from matchline.geometry import Coord, Segment, abs_distance, coord_from_integer, snap_to_grid
from matchline.lemma_checks import (
    LemmaReport,
    RoundConfig,
    config_lower_bound,
    lemma1_distance_mc,
    lemma1_exact,
    lemma2_config_property,
    lemma2_empirical,
    offline_cost_mc,
    render_reports,
    theorem_ratio,
)
from matchline.offline import Assignment, brute_force_min_cost, sorted_matching_cost
from matchline.oracle import exact_round_game_value, oracle_report, worst_config_search

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_KINDS",
    "AlgorithmSpec",
    "Assignment",
    "Coord",
    "ExperimentConfig",
    "GenParams",
    "Instance",
    "LemmaReport",
    "RoundConfig",
    "RunStats",
    "Segment",
    "SuiteResult",
    "abs_distance",
    "brute_force_min_cost",
    "config_lower_bound",
    "coord_from_integer",
    "exact_round_game_value",
    "generate",
    "lemma1_distance_mc",
    "lemma1_exact",
    "lemma2_config_property",
    "lemma2_empirical",
    "offline_cost_mc",
    "oracle_report",
    "render_reports",
    "run",
    "run_prefix_known",
    "run_suite",
    "sorted_matching_cost",
    "theorem_ratio",
    "worst_config_search",
    "__version__",
]
