"""Batch experiment driver: trial fan-out, aggregation, CSV/JSONL emission.

A suite runs every (n, algorithm) pair over a block of trials, attaches the
per-round floor report and the aggregate ratio report to each pair, and
optionally writes four files into an output directory:

  trials.jsonl   one record per trial, preceded by a header record
  summary.csv    one row per (n, algorithm)
  rounds.csv     one row per (n, algorithm, online round)
  reports.json   the checker reports plus the configuration

Outputs are byte-deterministic for a given configuration and seed: trials
fan out to workers but are aggregated in a fixed order, exact integer cost
sums happen before any float conversion, and the worker count never appears
in a file.  Floats serialize via Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from matchline.adversary import ORDER_LEFT_TO_RIGHT, REQUEST_ORDERS, rounds_for
from matchline.algorithms import ALGORITHM_KINDS, RunStats, run_single_trial
from matchline.lemma_checks import (
    LemmaReport,
    empirical_report_from_stats,
    ratio_report_from_stats,
)

SCHEMA_VERSION = 1

SUMMARY_COLUMNS = (
    "schema_version",
    "n",
    "algorithm",
    "trials",
    "grid_k",
    "request_order",
    "prefix_rounds",
    "mean_online",
    "se_online",
    "mean_offline",
    "se_offline",
    "aggregate_ratio",
    "ratio_bound",
    "lemma2_pass",
    "theorem_pass",
)

ROUNDS_COLUMNS = (
    "schema_version",
    "n",
    "algorithm",
    "round",
    "trials",
    "mean_cost",
    "se_cost",
    "floor",
    "pass",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One suite: sizes x algorithms x trials, plus output options.

    prefix_known_rounds > 0 switches every run to advance-knowledge mode:
    that many leading rounds are served as one optimal batch and only the
    remaining rounds are played online.
    """

    n_list: tuple[int, ...]
    algorithms: tuple[str, ...] = ALGORITHM_KINDS
    trials: int = 100
    seed: int = 0
    grid_k: int | None = None
    request_order: str = ORDER_LEFT_TO_RIGHT
    prefix_known_rounds: int = 0
    out_dir: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.n_list:
            raise ValueError("n_list must not be empty")
        for n in self.n_list:
            i = rounds_for(n)
            if self.prefix_known_rounds > i:
                raise ValueError(
                    f"prefix_known_rounds={self.prefix_known_rounds} exceeds the {i} rounds of n={n}"
                )
        if not self.algorithms:
            raise ValueError("algorithms must not be empty")
        for kind in self.algorithms:
            if kind not in ALGORITHM_KINDS:
                raise ValueError(f"unknown algorithm {kind!r}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError("duplicate algorithm in list")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.request_order not in REQUEST_ORDERS:
            raise ValueError(f"unknown request order {self.request_order!r}")
        if self.prefix_known_rounds < 0:
            raise ValueError("prefix_known_rounds must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def to_json_dict(self) -> dict:
        # workers and out_dir are execution details, not part of the result
        return {
            "n_list": list(self.n_list),
            "algorithms": list(self.algorithms),
            "trials": self.trials,
            "seed": self.seed,
            "grid_k": self.grid_k,
            "request_order": self.request_order,
            "prefix_known_rounds": self.prefix_known_rounds,
        }


@dataclass(frozen=True)
class SuiteResult:
    config: ExperimentConfig
    stats: dict[tuple[int, str], list[RunStats]]
    summary_rows: list[dict] = field(default_factory=list)
    round_rows: list[dict] = field(default_factory=list)
    reports: list[LemmaReport] = field(default_factory=list)


def _trial_task(args: tuple) -> RunStats:
    n, kind, trial, seed, grid_k, order, prefix = args
    return run_single_trial(
        n, kind, trial, seed, grid_k=grid_k, request_order=order, prefix_rounds=prefix
    )


def _collect_stats(config: ExperimentConfig) -> dict[tuple[int, str], list[RunStats]]:
    tasks = [
        (n, kind, t, config.seed, config.grid_k, config.request_order,
         config.prefix_known_rounds)
        for n in config.n_list
        for kind in config.algorithms
        for t in range(config.trials)
    ]
    if config.workers == 1:
        results = [_trial_task(task) for task in tasks]
    else:
        chunk = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            # map preserves task order, so scheduling cannot reorder results
            results = list(pool.map(_trial_task, tasks, chunksize=chunk))
    stats: dict[tuple[int, str], list[RunStats]] = {}
    for task, st in zip(tasks, results):
        stats.setdefault((task[0], task[1]), []).append(st)
    return stats


def _pair_summary(
    runs: list[RunStats], reports: tuple[LemmaReport, LemmaReport], config: ExperimentConfig
) -> dict:
    lemma2_rep, ratio_rep = reports
    first = runs[0]
    k = first.grid_k
    t = len(runs)
    # exact integer sums first, float conversion last
    sum_on = sum(s.online_total.at_scale(k) for s in runs)
    sum_off = sum(s.offline_total.at_scale(k) for s in runs)
    if sum_off == 0:
        agg = 1.0 if sum_on == 0 else float("inf")
    else:
        agg = float(Fraction(sum_on, sum_off))
    return {
        "schema_version": SCHEMA_VERSION,
        "n": first.n,
        "algorithm": first.algorithm,
        "trials": t,
        "grid_k": k,
        "request_order": config.request_order,
        "prefix_rounds": first.prefix_rounds,
        "mean_online": float(Fraction(sum_on, t << k)),
        "se_online": ratio_rep.details["se_online"],
        "mean_offline": float(Fraction(sum_off, t << k)),
        "se_offline": ratio_rep.details["se_offline"],
        "aggregate_ratio": agg,
        "ratio_bound": ratio_rep.bound,
        "lemma2_pass": lemma2_rep.passed,
        "theorem_pass": ratio_rep.passed,
    }


def _pair_round_rows(lemma2_rep: LemmaReport) -> list[dict]:
    rows = []
    for row in lemma2_rep.details["per_round"]:
        rows.append(
            {
                "schema_version": SCHEMA_VERSION,
                "n": lemma2_rep.n,
                "algorithm": lemma2_rep.details["algorithm"],
                "round": row["round"],
                "trials": lemma2_rep.trials,
                "mean_cost": row["mean"],
                "se_cost": row["se"],
                "floor": lemma2_rep.bound,
                "pass": row["pass"],
            }
        )
    return rows


def run_suite(config: ExperimentConfig) -> SuiteResult:
    """Run the whole suite; write output files when out_dir is set."""
    stats = _collect_stats(config)
    summary_rows: list[dict] = []
    round_rows: list[dict] = []
    reports: list[LemmaReport] = []
    for n in config.n_list:
        for kind in config.algorithms:
            runs = stats[(n, kind)]
            lemma2_rep = empirical_report_from_stats(runs, config.seed)
            ratio_rep = ratio_report_from_stats(runs, config.seed)
            reports.extend((lemma2_rep, ratio_rep))
            summary_rows.append(_pair_summary(runs, (lemma2_rep, ratio_rep), config))
            round_rows.extend(_pair_round_rows(lemma2_rep))
    result = SuiteResult(
        config=config,
        stats=stats,
        summary_rows=summary_rows,
        round_rows=round_rows,
        reports=reports,
    )
    if config.out_dir is not None:
        write_outputs(result, config.out_dir)
    return result


def run_prefix_known(config: ExperimentConfig) -> SuiteResult:
    """Advance-knowledge mode; prefix 0 is the plain suite."""
    return run_suite(config)


def _json_line(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    return str(v)


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_cell(row[c]) for c in columns])


def write_outputs(result: SuiteResult, out_dir: str | Path) -> list[Path]:
    """Write trials.jsonl, summary.csv, rounds.csv, reports.json; return paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = result.config

    trials_path = out / "trials.jsonl"
    with trials_path.open("w", encoding="utf-8") as fh:
        header = {
            "record": "header",
            "schema_version": SCHEMA_VERSION,
            "config": config.to_json_dict(),
        }
        fh.write(_json_line(header))
        for n in config.n_list:
            for kind in config.algorithms:
                for st in result.stats[(n, kind)]:
                    rec = {"record": "trial"}
                    rec.update(st.to_json_dict())
                    fh.write(_json_line(rec))

    summary_path = out / "summary.csv"
    _write_csv(summary_path, SUMMARY_COLUMNS, result.summary_rows)

    rounds_path = out / "rounds.csv"
    _write_csv(rounds_path, ROUNDS_COLUMNS, result.round_rows)

    reports_path = out / "reports.json"
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_json_dict(),
        "reports": [rep.to_json_dict() for rep in result.reports],
    }
    with reports_path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
        fh.write("\n")

    return [trials_path, summary_path, rounds_path, reports_path]
