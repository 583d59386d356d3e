"""Comparison metrics: hit rate, MRR/NDCG of a selected response, pairwise
accuracy, and win-rate aggregation from offline labels.

All metrics consume only rankings, so any strictly increasing transform of
the RM scores leaves them unchanged.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dataset import BenchmarkDataset, RmScoreTable, _iter_jsonl, _req_str
from .errors import (
    EmptyGroundTruth,
    EmptyLabels,
    InvalidConfig,
    MalformedRecord,
    NoComparablePairs,
)
from .ranking import RankedResponses, eta_parts, rank_by_oracle, rank_by_table

OUTCOMES = ("win", "draw", "loss")
_OUTCOME_VALUE = {"win": 1.0, "draw": 0.0, "loss": -1.0}


@dataclass
class MetricReport:
    """One RM's comparison metrics (hit rates keyed by cutoff K)."""

    rm_name: str
    hit_rate: dict[int, float]
    mrr: float
    ndcg: float
    selection_rank_j: int
    pairwise_accuracy: float
    win_rate: float | None = None


def hit_rate(ranked_rm: RankedResponses, ranked_oracle: RankedResponses,
             eta: float, k: int) -> float:
    """Percent of the oracle's top floor(eta*N) found in the RM's top K.

    The denominator is the ground-truth size floor(eta*N), so K above that
    size can reach 100 even though the RM's top K contains extras.
    """
    n = len(ranked_rm)
    if len(ranked_oracle) != n or set(ranked_rm.response_ids) != set(ranked_oracle.response_ids):
        raise InvalidConfig("rankings must cover the same response set")
    if not 0.0 < eta < 1.0:
        raise InvalidConfig(f"eta must be in (0, 1), got {eta}")
    if not 1 <= k <= n:
        raise InvalidConfig(f"K={k} outside [1, {n}]")
    gt_size, _ = eta_parts(eta, n)
    if gt_size == 0:
        raise EmptyGroundTruth(f"floor(eta*N) = 0 for eta={eta}, N={n}")
    ground_truth = set(ranked_oracle.response_ids[:gt_size])
    hits = sum(1 for rid in ranked_rm.response_ids[:k] if rid in ground_truth)
    return 100.0 * hits / gt_size


def _selection_oracle_rank(ranked_rm: RankedResponses, ranked_oracle: RankedResponses,
                           j: int) -> int:
    selected = ranked_rm.response_ids[j - 1]
    return ranked_oracle.response_ids.index(selected) + 1


def mrr_at_selection(dataset: BenchmarkDataset, table: RmScoreTable, j: int = 1) -> float:
    """Mean reciprocal oracle rank of the RM's j-th ranked response."""
    if j < 1:
        raise InvalidConfig(f"selection rank must be >= 1, got {j}")
    reciprocal = []
    for prompt_id in dataset.prompt_ids():
        rm = rank_by_table(dataset, table, prompt_id)
        if j > len(rm):
            raise InvalidConfig(f"selection rank {j} exceeds pool size {len(rm)}")
        oracle = rank_by_oracle(dataset, prompt_id)
        reciprocal.append(1.0 / _selection_oracle_rank(rm, oracle, j))
    return math.fsum(reciprocal) / len(reciprocal)


def ndcg_at_selection(dataset: BenchmarkDataset, table: RmScoreTable, j: int = 1) -> float:
    """Positional gain of the RM's j-th pick against the ideal pick at rank j.

    A selection at oracle rank r scores 1/log2(1+r), normalized by
    1/log2(1+j); for j = 1 this lies in [0, 1] with 1.0 for a perfect model.
    """
    if j < 1:
        raise InvalidConfig(f"selection rank must be >= 1, got {j}")
    ideal = 1.0 / math.log2(1 + j)
    gains = []
    for prompt_id in dataset.prompt_ids():
        rm = rank_by_table(dataset, table, prompt_id)
        if j > len(rm):
            raise InvalidConfig(f"selection rank {j} exceeds pool size {len(rm)}")
        oracle = rank_by_oracle(dataset, prompt_id)
        rank = _selection_oracle_rank(rm, oracle, j)
        gains.append((1.0 / math.log2(1 + rank)) / ideal)
    return math.fsum(gains) / len(gains)


def pairwise_accuracy(table: RmScoreTable, dataset: BenchmarkDataset) -> float:
    """Percent of response pairs the RM orders like the oracle.

    Pairs with equal oracle scores are excluded; pairs the RM scores
    equally count half.
    """
    per_prompt = []
    for prompt_id in dataset.prompt_ids():
        responses = dataset.responses[prompt_id]
        oracle = np.asarray([r.oracle_score for r in responses])
        rm = np.asarray([table.score(prompt_id, r.response_id) for r in responses])
        oracle_sign = np.sign(oracle[:, None] - oracle[None, :])
        rm_sign = np.sign(rm[:, None] - rm[None, :])
        upper = np.triu(np.ones_like(oracle_sign, dtype=bool), k=1)
        comparable = upper & (oracle_sign != 0)
        num_comparable = int(comparable.sum())
        if num_comparable == 0:
            raise NoComparablePairs(f"prompt {prompt_id!r}: all oracle scores equal")
        agree = int((comparable & (rm_sign == oracle_sign)).sum())
        rm_ties = int((comparable & (rm_sign == 0)).sum())
        per_prompt.append(100.0 * (agree + 0.5 * rm_ties) / num_comparable)
    return math.fsum(per_prompt) / len(per_prompt)


def win_rate_aggregate(labels: Sequence[str]) -> tuple[float, float]:
    """(win percent, mean of the {1, 0, -1} encoding) over outcome labels."""
    if not labels:
        raise EmptyLabels("no outcome labels")
    for label in labels:
        if label not in _OUTCOME_VALUE:
            raise InvalidConfig(f"unknown outcome {label!r}, expected one of {OUTCOMES}")
    wins = sum(1 for label in labels if label == "win")
    mean = math.fsum(_OUTCOME_VALUE[label] for label in labels) / len(labels)
    return 100.0 * wins / len(labels), mean


def load_win_labels(path: str | Path) -> list[str]:
    """Read win/draw/loss outcomes from a JSONL labels file."""
    labels = []
    source = Path(path).name
    for line_no, obj in _iter_jsonl(Path(path)):
        _req_str(obj, "prompt_id", source, line_no)
        _req_str(obj, "response_id", source, line_no)
        outcome = _req_str(obj, "outcome", source, line_no)
        if outcome not in _OUTCOME_VALUE:
            raise MalformedRecord(source, line_no, "outcome",
                                  f"must be one of {OUTCOMES}, got {outcome!r}")
        labels.append(outcome)
    if not labels:
        raise EmptyLabels(f"{source}: no label records")
    return labels


def default_hit_rate_cutoffs(num_responses: int) -> list[int]:
    """Cutoffs at N/8, N/4, and N/2 (deduplicated, at least 1)."""
    cutoffs = sorted({max(1, num_responses // 8), max(1, num_responses // 4),
                      max(1, num_responses // 2)})
    return cutoffs


def metric_report(dataset: BenchmarkDataset, table: RmScoreTable, *,
                  eta: float = 0.25,
                  hit_rate_cutoffs: Sequence[int] | None = None,
                  selection_rank: int = 1,
                  win_labels: Sequence[str] | None = None) -> MetricReport:
    """All comparison metrics for one RM, averaged across prompts."""
    cutoffs = (list(hit_rate_cutoffs) if hit_rate_cutoffs is not None
               else default_hit_rate_cutoffs(dataset.responses_per_prompt))
    hit_rates: dict[int, float] = {}
    for k in cutoffs:
        per_prompt = []
        for prompt_id in dataset.prompt_ids():
            rm = rank_by_table(dataset, table, prompt_id)
            oracle = rank_by_oracle(dataset, prompt_id)
            per_prompt.append(hit_rate(rm, oracle, eta, k))
        hit_rates[k] = math.fsum(per_prompt) / len(per_prompt)
    win = win_rate_aggregate(win_labels)[0] if win_labels is not None else None
    return MetricReport(
        rm_name=table.rm_name,
        hit_rate=hit_rates,
        mrr=mrr_at_selection(dataset, table, selection_rank),
        ndcg=ndcg_at_selection(dataset, table, selection_rank),
        selection_rank_j=selection_rank,
        pairwise_accuracy=pairwise_accuracy(table, dataset),
        win_rate=win,
    )


def write_metrics_csv(reports: Iterable[MetricReport], path: str | Path,
                      header_comment: str | None = None) -> None:
    """One CSV row per RM: hit rates per cutoff, NDCG, MRR, pairwise, win rate."""
    reports = list(reports)
    if not reports:
        raise InvalidConfig("no metric reports to write")
    cutoffs = sorted(reports[0].hit_rate)
    for report in reports:
        if sorted(report.hit_rate) != cutoffs:
            raise InvalidConfig("metric reports use different hit-rate cutoffs")
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["rm_name"] + [f"hit_rate_at_{k}" for k in cutoffs]
            + ["ndcg", "mrr", "selection_rank", "pairwise_accuracy", "win_rate"])
        for report in reports:
            writer.writerow(
                [report.rm_name]
                + [repr(report.hit_rate[k]) for k in cutoffs]
                + [repr(report.ndcg), repr(report.mrr), report.selection_rank_j,
                   repr(report.pairwise_accuracy),
                   "" if report.win_rate is None else repr(report.win_rate)])
