"""Reliability-at-eta estimation.

The headline quantity is the expected oracle quality of the responses a
reward model places in its top ``eta`` fraction, divided by the average
oracle quality of the whole response pool, so 1.0 is the random-selection
baseline. Per prompt it is estimated by drawing size-``n`` response
subsets without replacement, summing oracle scores over the model's top
``floor(eta*n)`` picks within each subset (with a fractional-rank
correction that keeps the estimate continuous when ``eta*n`` is not an
integer), rescaling by ``N/(eta*n)``, and normalizing by the total oracle
score. Estimates are averaged over a grid of subset sizes proportional to
``N**(2/3)`` to balance quantile bias against resampling variance.

All randomness is counter-based: the draws for a given (seed, prompt, n)
are a pure function of those values, so results do not depend on thread
scheduling or evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dataset import BenchmarkDataset, RmScoreTable
from .errors import (
    DegenerateDenominator,
    EmptyNRange,
    InvalidConfig,
    TooManySubsets,
)
from .ranking import RankedResponses, eta_parts, rank_by_table

MAX_ENUMERATED_SUBSETS = 1_000_000

# c * N**e computed in floats can land a hair off an exact integer; snap
# before ceil/floor so grid endpoints are stable (e.g. 5 * 64**(2/3) -> 80).
_GRID_SNAP_TOL = 1e-9


@dataclass(frozen=True)
class RetaConfig:
    """Estimation parameters.

    ``exhaustive=True`` replaces Monte Carlo draws with full enumeration of
    all n-subsets (only feasible for small N; intended for verification).
    """

    resamples: int = 200
    n_range_low_coeff: float = 3.0
    n_range_high_coeff: float = 5.0
    n_exponent: float = 2.0 / 3.0
    seed: int = 0
    normalize: bool = True
    exhaustive: bool = False

    def __post_init__(self) -> None:
        if self.resamples < 1:
            raise InvalidConfig(f"resamples must be positive, got {self.resamples}")
        if self.n_range_low_coeff <= 0 or self.n_range_high_coeff <= 0:
            raise InvalidConfig("n-range coefficients must be positive")
        if self.n_range_low_coeff > self.n_range_high_coeff:
            raise InvalidConfig("n_range_low_coeff must not exceed n_range_high_coeff")
        if not 0.0 < self.n_exponent <= 1.0:
            raise InvalidConfig(f"n_exponent must be in (0, 1], got {self.n_exponent}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")


@dataclass
class RetaEstimate:
    """Point estimate at one eta with per-prompt breakdown."""

    eta: float
    value: float
    per_prompt: dict[str, float]
    std_error: float
    n_values_used: list[int]


@dataclass
class RetaCurve:
    rm_name: str
    points: list[RetaEstimate]

    def etas(self) -> list[float]:
        return [p.eta for p in self.points]


def default_eta_grid(points: int = 15, max_log2: float = 7.0) -> list[float]:
    """Log-uniform eta grid from 1 down to 2**-max_log2 (15 points by default)."""
    ts = np.linspace(0.0, max_log2, points)
    return [float(2.0 ** -t) for t in ts]


def _snap(x: float) -> float:
    nearest = round(x)
    if abs(x - nearest) <= _GRID_SNAP_TOL * max(1.0, abs(x)):
        return float(nearest)
    return x


def resample_sizes(num_responses: int, config: RetaConfig) -> list[int]:
    """Integer subset-size grid: ceil(c_lo*N^e) .. floor(c_hi*N^e), clipped to [1, N]."""
    scale = num_responses ** config.n_exponent
    low = max(1, math.ceil(_snap(config.n_range_low_coeff * scale)))
    high = min(num_responses, math.floor(_snap(config.n_range_high_coeff * scale)))
    if low > high:
        raise EmptyNRange(
            f"no subset sizes in [{config.n_range_low_coeff}, {config.n_range_high_coeff}] "
            f"* N^{config.n_exponent} for N={num_responses}")
    return list(range(low, high + 1))


def _prompt_stream(seed: int, prompt_id: str, n: int) -> np.random.Generator:
    # Counter-based stream keyed by (seed, prompt, n); resample r consumes
    # row r of one batched draw, so results are schedule-independent.
    digest = hashlib.blake2b(prompt_id.encode("utf-8"), digest_size=8).digest()
    prompt_key = int.from_bytes(digest, "big")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, prompt_key, n])))


def _draw_subsets(rng: np.random.Generator, total: int, n: int, count: int) -> np.ndarray:
    """``count`` uniform n-subsets of range(total), as (count, n) rank indices."""
    if n == total:
        return np.broadcast_to(np.arange(total, dtype=np.intp), (count, total))
    keys = rng.random((count, total))
    return np.argpartition(keys, n - 1, axis=1)[:, :n]


def _enumerate_subsets(total: int, n: int) -> np.ndarray:
    size = math.comb(total, n)
    if size > MAX_ENUMERATED_SUBSETS:
        raise TooManySubsets(f"C({total},{n}) = {size} exceeds {MAX_ENUMERATED_SUBSETS}")
    combos = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(total), n)),
        dtype=np.intp, count=size * n)
    return combos.reshape(size, n)


def _subset_bodies(oracle_ranked: np.ndarray, subsets: np.ndarray,
                   count: int, delta: float) -> np.ndarray:
    """Per-subset selection totals.

    ``subsets`` holds global rank indices (0 = best by RM); a subset's own
    ranking is just its indices in ascending order. The total is the sum of
    oracle scores over the best ``count`` ranks plus, when ``delta > 0``,
    the fractional-rank terms at ranks ``count`` and ``count + 1``. A rank-0
    term (when ``count`` is 0) does not exist and contributes nothing.
    """
    n = subsets.shape[1]
    if count == 0:
        best = subsets.min(axis=1)
        return (delta * delta) * oracle_ranked[best]
    if count >= n:
        return oracle_ranked[subsets].sum(axis=1)
    if delta == 0.0:
        top = np.partition(subsets, count - 1, axis=1)[:, :count]
        return oracle_ranked[top].sum(axis=1)
    part = np.partition(subsets, count, axis=1)
    top = part[:, :count]
    main = oracle_ranked[top].sum(axis=1)
    rank_c = top.max(axis=1)        # rank ``count`` within the subset
    rank_c1 = part[:, count]        # rank ``count + 1``
    return main + delta * (delta * oracle_ranked[rank_c1]
                           + (1.0 - delta) * oracle_ranked[rank_c])


def reta_point_estimate(ranked_all: RankedResponses, eta: float, n: int,
                        config: RetaConfig) -> float:
    """Estimate at a single (eta, n) for one prompt's full ranked pool.

    At eta == 1 the subset expectation collapses algebraically (every
    subset is fully selected and a uniform n-subset's expected total is
    n/N of the pool total), so the exact value is returned directly: 1.0
    when normalizing, the pool's mean oracle score otherwise.
    """
    total_responses = len(ranked_all)
    if not 1 <= n <= total_responses:
        raise InvalidConfig(f"n={n} outside [1, {total_responses}]")
    if not 0.0 < eta <= 1.0:
        raise InvalidConfig(f"eta must be in (0, 1], got {eta}")
    oracle = ranked_all.oracle_scores
    pool_total = float(oracle.sum())
    if pool_total <= 0.0:
        raise DegenerateDenominator(f"prompt {ranked_all.prompt_id!r} has zero total oracle score")
    mean_score = pool_total / total_responses
    if eta == 1.0:
        return mean_score / mean_score if config.normalize else mean_score

    count, delta = eta_parts(eta, n)
    if count == 0 and delta == 0.0:
        return 0.0
    if config.exhaustive:
        subsets = _enumerate_subsets(total_responses, n)
    else:
        rng = _prompt_stream(config.seed, ranked_all.prompt_id, n)
        subsets = _draw_subsets(rng, total_responses, n, config.resamples)
    bodies = _subset_bodies(oracle, subsets, count, delta)
    mean_body = float(bodies.mean())
    scaled = count + delta  # eta * n with float noise snapped off
    if config.normalize:
        return total_responses * mean_body / (scaled * pool_total)
    return mean_body / scaled


def exhaustive_reta(ranked_all: RankedResponses, eta: float, n: int) -> float:
    """Reference value by direct enumeration of every n-subset.

    Deliberately naive (plain loops, exact summation); kept independent of
    the vectorized estimator so the two can cross-check each other.
    """
    total = len(ranked_all)
    if not 1 <= n <= total:
        raise InvalidConfig(f"n={n} outside [1, {total}]")
    if not 0.0 < eta <= 1.0:
        raise InvalidConfig(f"eta must be in (0, 1], got {eta}")
    num_subsets = math.comb(total, n)
    if num_subsets > MAX_ENUMERATED_SUBSETS:
        raise TooManySubsets(f"C({total},{n}) = {num_subsets} exceeds {MAX_ENUMERATED_SUBSETS}")
    scores = [float(v) for v in ranked_all.oracle_scores]
    pool_total = math.fsum(scores)
    if pool_total <= 0.0:
        raise DegenerateDenominator(f"prompt {ranked_all.prompt_id!r} has zero total oracle score")
    count, delta = eta_parts(eta, n)
    if count == 0 and delta == 0.0:
        return 0.0
    bodies = []
    for combo in itertools.combinations(range(total), n):
        body = math.fsum(scores[combo[j]] for j in range(min(count, n)))
        if delta > 0.0:
            body += delta * delta * scores[combo[count]]
            if count >= 1:
                body += delta * (1.0 - delta) * scores[combo[count - 1]]
        bodies.append(body)
    expectation = math.fsum(bodies) / num_subsets
    return total * expectation / ((count + delta) * pool_total)


def _map_prompts(func: Callable[[str], float], prompt_ids: Sequence[str],
                 threads: int) -> list[float]:
    if threads <= 1:
        return [func(pid) for pid in prompt_ids]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, prompt_ids))


def _spread(values: Sequence[float]) -> float:
    """Standard error across prompts: sample stddev / sqrt(k); 0 for k == 1."""
    k = len(values)
    if k <= 1:
        return 0.0
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=1)) / math.sqrt(k)


def reta_estimate(dataset: BenchmarkDataset, table: RmScoreTable, eta: float,
                  config: RetaConfig | None = None, *, threads: int = 1) -> RetaEstimate:
    """Full estimate at one eta: averaged over the n grid and all prompts."""
    config = config or RetaConfig()
    grid = resample_sizes(dataset.responses_per_prompt, config)

    def one_prompt(prompt_id: str) -> float:
        ranked = rank_by_table(dataset, table, prompt_id)
        values = [reta_point_estimate(ranked, eta, n, config) for n in grid]
        return math.fsum(values) / len(values)

    prompt_ids = dataset.prompt_ids()
    values = _map_prompts(one_prompt, prompt_ids, threads)
    per_prompt = dict(zip(prompt_ids, values))
    return RetaEstimate(
        eta=eta,
        value=math.fsum(values) / len(values),
        per_prompt=per_prompt,
        std_error=_spread(values),
        n_values_used=list(grid),
    )


def reta_curve(dataset: BenchmarkDataset, table: RmScoreTable,
               eta_grid: Sequence[float] | None = None,
               config: RetaConfig | None = None, *, threads: int = 1) -> RetaCurve:
    """One estimate per eta over a strictly decreasing grid in (0, 1]."""
    etas = list(eta_grid) if eta_grid is not None else default_eta_grid()
    if not etas:
        raise InvalidConfig("eta grid is empty")
    for eta in etas:
        if not 0.0 < eta <= 1.0:
            raise InvalidConfig(f"eta {eta} outside (0, 1]")
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise InvalidConfig("eta grid must be strictly decreasing")
    points = [reta_estimate(dataset, table, eta, config, threads=threads) for eta in etas]
    return RetaCurve(rm_name=table.rm_name, points=points)


def write_curve_csv(curve: RetaCurve, path: str | Path,
                    header_comment: str | None = None) -> None:
    """Curve export: rm_name, eta, value, std_error, n_low, n_high."""
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rm_name", "eta", "value", "std_error", "n_low", "n_high"])
        for point in curve.points:
            writer.writerow([
                curve.rm_name, repr(point.eta), repr(point.value),
                repr(point.std_error),
                min(point.n_values_used), max(point.n_values_used),
            ])


def write_per_prompt_csv(curve: RetaCurve, dataset: BenchmarkDataset, path: str | Path,
                         header_comment: str | None = None) -> None:
    """Per-prompt export (metric vs. prompt perplexity): prompt_id, eta, value, perplexity."""
    perplexity = {p.prompt_id: p.perplexity for p in dataset.prompts}
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["prompt_id", "eta", "value", "perplexity"])
        for point in curve.points:
            for prompt_id, value in point.per_prompt.items():
                ppl = perplexity.get(prompt_id)
                writer.writerow([
                    prompt_id, repr(point.eta), repr(value),
                    "" if ppl is None else repr(ppl),
                ])
