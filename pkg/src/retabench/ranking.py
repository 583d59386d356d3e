"""Deterministic response rankings shared by all estimators and metrics.

Responses are ordered by reward-model score descending; exact score ties
are broken by ascending response id so that every ranking is a stable,
reproducible permutation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BenchmarkDataset, RmScoreTable
from .errors import EmptySelection, InvalidConfig

# eta*n computed in floats can land a few ulp away from an exact integer
# (e.g. (1/3)*3 == 0.999...); snap within this tolerance before flooring.
_INTEGER_SNAP_TOL = 1e-9


def eta_parts(eta: float, n: int) -> tuple[int, float]:
    """Split eta*n into (floor, fractional part), snapping float noise."""
    x = eta * n
    nearest = round(x)
    if abs(x - nearest) <= _INTEGER_SNAP_TOL:
        x = float(nearest)
    floor = int(math.floor(x))
    return floor, x - floor


@dataclass(frozen=True)
class RankedResponses:
    """One prompt's responses sorted by RM score descending.

    ``order[j]`` is the index (into the dataset's response list) of the
    response at rank j+1; ``rm_scores`` / ``oracle_scores`` /
    ``response_ids`` are aligned to that order.
    """

    prompt_id: str
    order: np.ndarray
    rm_scores: np.ndarray
    oracle_scores: np.ndarray
    response_ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.order)

    @property
    def size(self) -> int:
        return len(self.order)


def _build_ranking(prompt_id: str, response_ids: list[str],
                   rm_scores: list[float], oracle_scores: list[float]) -> RankedResponses:
    order = sorted(range(len(response_ids)),
                   key=lambda i: (-rm_scores[i], response_ids[i]))
    return RankedResponses(
        prompt_id=prompt_id,
        order=np.asarray(order, dtype=np.intp),
        rm_scores=np.asarray([rm_scores[i] for i in order], dtype=np.float64),
        oracle_scores=np.asarray([oracle_scores[i] for i in order], dtype=np.float64),
        response_ids=tuple(response_ids[i] for i in order),
    )


def rank_by_table(dataset: BenchmarkDataset, table: RmScoreTable,
                  prompt_id: str) -> RankedResponses:
    """Rank one prompt's responses by the given score table."""
    responses = dataset.responses[prompt_id]
    ids = [r.response_id for r in responses]
    rm = [table.score(prompt_id, r.response_id) for r in responses]
    oracle = [r.oracle_score for r in responses]
    return _build_ranking(prompt_id, ids, rm, oracle)


def rank_by_oracle(dataset: BenchmarkDataset, prompt_id: str) -> RankedResponses:
    """Rank one prompt's responses by their oracle scores."""
    responses = dataset.responses[prompt_id]
    ids = [r.response_id for r in responses]
    oracle = [r.oracle_score for r in responses]
    return _build_ranking(prompt_id, ids, oracle, oracle)


def beta_subset(ranked: RankedResponses, eta: float, subset_size: int) -> list[int]:
    """Indices of the top floor(eta*n) responses by RM score.

    ``subset_size`` must equal the number of ranked entries; ties are
    already resolved by the ranking's stable id order.
    """
    n = len(ranked)
    if subset_size != n:
        raise InvalidConfig(f"subset_size {subset_size} != ranked size {n}")
    if not 0.0 < eta <= 1.0:
        raise InvalidConfig(f"eta must be in (0, 1], got {eta}")
    count, _ = eta_parts(eta, n)
    if count == 0:
        raise EmptySelection(f"floor(eta*n) = 0 for eta={eta}, n={n}")
    return [int(i) for i in ranked.order[:count]]
