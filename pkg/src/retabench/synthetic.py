"""Synthetic joint distributions of (RM score, oracle score) with known
large-pool limits.

Each distribution kind has a closed-form value for the limiting
reliability at quantile eta, so the full estimation pipeline can be
validated end to end without any external model: generate a dataset, run
the estimator, and compare against ``analytic_reta``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .dataset import (
    BenchmarkDataset,
    PromptRecord,
    ResponseRecord,
    RmScoreTable,
)
from .errors import InvalidConfig, NonPositiveOracleDraw, UnsupportedSpec
from .reta import RetaConfig, reta_estimate

KINDS = ("deterministic_uniform", "independent", "noisy_gaussian", "custom_table")

# Offset >= 6 keeps P(J <= 0) below 1e-9, so the closed-form limit (which
# ignores truncation) is accurate to well under 1e-6.
_MIN_GAUSSIAN_OFFSET = 6.0
_PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class DistSpec:
    """A joint distribution of (rm score Y, oracle score J), J > 0."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise UnsupportedSpec(f"unknown distribution kind {self.kind!r}")
        p = self.params
        if self.kind in ("deterministic_uniform", "independent"):
            low, high = p.get("low"), p.get("high")
            if low is None or high is None or not (0.0 <= low < high):
                raise InvalidConfig(
                    f"{self.kind} requires 0 <= low < high, got low={low}, high={high}")
        elif self.kind == "noisy_gaussian":
            rho, offset = p.get("rho"), p.get("offset")
            if rho is None or not -1.0 <= rho <= 1.0:
                raise InvalidConfig(f"noisy_gaussian requires rho in [-1, 1], got {rho}")
            if offset is None or offset < _MIN_GAUSSIAN_OFFSET:
                raise InvalidConfig(
                    f"noisy_gaussian requires offset >= {_MIN_GAUSSIAN_OFFSET}, got {offset}")
        else:  # custom_table
            atoms = p.get("atoms")
            if not atoms:
                raise InvalidConfig("custom_table requires a non-empty atom list")
            total = 0.0
            for atom in atoms:
                if len(atom) != 3:
                    raise InvalidConfig("each atom must be (rm_score, oracle_score, prob)")
                y, j, prob = atom
                if not math.isfinite(y):
                    raise InvalidConfig(f"atom rm score must be finite, got {y}")
                if not (math.isfinite(j) and j > 0):
                    raise InvalidConfig(f"atom oracle score must be positive, got {j}")
                if not (math.isfinite(prob) and prob > 0):
                    raise InvalidConfig(f"atom probability must be positive, got {prob}")
                total += prob
            if abs(total - 1.0) > _PROB_SUM_TOL:
                raise InvalidConfig(f"atom probabilities sum to {total!r}, expected 1")

    # -- constructors ----------------------------------------------------------

    @classmethod
    def deterministic_uniform(cls, low: float, high: float) -> DistSpec:
        """Y = J with J uniform on (low, high): a perfectly reliable model."""
        return cls("deterministic_uniform", {"low": float(low), "high": float(high)})

    @classmethod
    def independent(cls, low: float, high: float) -> DistSpec:
        """Y independent of J (J uniform on (low, high)): the random baseline."""
        return cls("independent", {"low": float(low), "high": float(high)})

    @classmethod
    def noisy_gaussian(cls, rho: float, offset: float = 7.0) -> DistSpec:
        """J = offset + Z, Y correlated with Z at level rho (Z, noise standard normal)."""
        return cls("noisy_gaussian", {"rho": float(rho), "offset": float(offset)})

    @classmethod
    def custom_table(cls, atoms: Sequence[tuple[float, float, float]]) -> DistSpec:
        """Finite discrete joint: atoms of (rm_score, oracle_score, probability)."""
        return cls("custom_table", {"atoms": [tuple(map(float, a)) for a in atoms]})

    # -- serialization ---------------------------------------------------------

    @classmethod
    def from_json(cls, text: str) -> DistSpec:
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise InvalidConfig("spec file must hold a JSON object")
        unknown = set(obj) - {"kind", "params"}
        if unknown:
            raise InvalidConfig(f"unknown spec keys: {sorted(unknown)}")
        kind = obj.get("kind")
        params = obj.get("params", {})
        if kind == "custom_table" and "atoms" in params:
            params = dict(params, atoms=[tuple(a) for a in params["atoms"]])
        return cls(kind, params)

    def to_json(self) -> str:
        params = dict(self.params)
        if self.kind == "custom_table":
            params["atoms"] = [list(a) for a in params["atoms"]]
        return json.dumps({"kind": self.kind, "params": params}, sort_keys=True)


def _draw_pairs(spec: DistSpec, rng: np.random.Generator,
                count: int) -> tuple[np.ndarray, np.ndarray]:
    """(rm scores, oracle scores), oracle strictly positive."""
    p = spec.params
    if spec.kind == "deterministic_uniform":
        j = rng.uniform(p["low"], p["high"], size=count)
        while np.any(j <= 0.0):
            bad = j <= 0.0
            j[bad] = rng.uniform(p["low"], p["high"], size=int(bad.sum()))
        return j.copy(), j
    if spec.kind == "independent":
        j = rng.uniform(p["low"], p["high"], size=count)
        while np.any(j <= 0.0):
            bad = j <= 0.0
            j[bad] = rng.uniform(p["low"], p["high"], size=int(bad.sum()))
        y = rng.standard_normal(count)
        return y, j
    if spec.kind == "noisy_gaussian":
        rho = p["rho"]
        z = rng.standard_normal(count)
        eps = rng.standard_normal(count)
        j = p["offset"] + z
        while np.any(j <= 0.0):
            bad = j <= 0.0
            z[bad] = rng.standard_normal(int(bad.sum()))
            eps[bad] = rng.standard_normal(int(bad.sum()))
            j = p["offset"] + z
        y = rho * z + math.sqrt(1.0 - rho * rho) * eps
        return y, j
    atoms = p["atoms"]
    probs = np.asarray([a[2] for a in atoms], dtype=np.float64)
    probs = probs / probs.sum()
    picks = rng.choice(len(atoms), size=count, p=probs)
    y = np.asarray([atoms[i][0] for i in picks], dtype=np.float64)
    j = np.asarray([atoms[i][1] for i in picks], dtype=np.float64)
    return y, j


def gen_synthetic(spec: DistSpec, num_prompts: int, responses_per_prompt: int,
                  seed: int, *, name: str | None = None,
                  rm_name: str = "synthetic-rm") -> tuple[BenchmarkDataset, RmScoreTable]:
    """Draw a benchmark dataset plus matching score table from a spec.

    Deterministic: each prompt gets its own counter-based stream keyed by
    (seed, prompt index), so generation order cannot change the data.
    """
    if num_prompts < 1:
        raise InvalidConfig(f"num_prompts must be positive, got {num_prompts}")
    if responses_per_prompt < 2:
        raise InvalidConfig(
            f"responses_per_prompt must be at least 2, got {responses_per_prompt}")
    prompt_width = max(4, len(str(num_prompts - 1)))
    response_width = max(3, len(str(responses_per_prompt - 1)))
    prompts = []
    responses: dict[str, list[ResponseRecord]] = {}
    scores: dict[tuple[str, str], float] = {}
    for p_idx in range(num_prompts):
        prompt_id = f"p{p_idx:0{prompt_width}d}"
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, p_idx])))
        y, j = _draw_pairs(spec, rng, responses_per_prompt)
        if np.any(j <= 0.0):
            raise NonPositiveOracleDraw(f"prompt {prompt_id}: non-positive oracle draw")
        prompts.append(PromptRecord(prompt_id, f"synthetic prompt {p_idx}"))
        row = []
        for r_idx in range(responses_per_prompt):
            response_id = f"r{r_idx:0{response_width}d}"
            row.append(ResponseRecord(prompt_id, response_id, float(j[r_idx])))
            scores[(prompt_id, response_id)] = float(y[r_idx])
        responses[prompt_id] = row
    dataset = BenchmarkDataset(
        name=name or f"synthetic-{spec.kind}",
        prompts=prompts,
        responses=responses,
        responses_per_prompt=responses_per_prompt,
    )
    return dataset, RmScoreTable(rm_name=rm_name, scores=scores)


def analytic_reta(spec: DistSpec, eta: float) -> float:
    """Closed-form limiting reliability at eta: E[J | Y >= theta(eta)] / E[J]."""
    if not 0.0 < eta < 1.0:
        raise InvalidConfig(f"eta must be in (0, 1), got {eta}")
    p = spec.params
    if spec.kind == "deterministic_uniform":
        low, high = p["low"], p["high"]
        return (high - eta * (high - low) / 2.0) / ((low + high) / 2.0)
    if spec.kind == "independent":
        return 1.0
    if spec.kind == "noisy_gaussian":
        # Y is standard normal; E[Z | Y >= z_eta] = rho * pdf(z_eta) / eta.
        z_eta = norm.isf(eta)
        return (p["offset"] + p["rho"] * norm.pdf(z_eta) / eta) / p["offset"]
    if spec.kind == "custom_table":
        # Top-eta tail expectation: walk rm-score levels from the top and,
        # when eta lands inside a level, draw from it proportionally. This
        # is what the top-fraction selection converges to; it agrees with
        # E[J | Y >= threshold] whenever the threshold carries no mass.
        atoms = p["atoms"]
        total = math.fsum(a[2] for a in atoms)
        levels: dict[float, list[float]] = {}
        for y, j, prob in atoms:
            mass_j = levels.setdefault(y, [0.0, 0.0])
            mass_j[0] += prob / total
            mass_j[1] += j * prob / total
        remaining = eta
        numerator = 0.0
        for y in sorted(levels, reverse=True):
            mass, j_mass = levels[y]
            taken = min(remaining, mass)
            numerator += j_mass * (taken / mass)
            remaining -= taken
            if remaining <= 1e-15:
                break
        mean = math.fsum(j * prob for _, j, prob in atoms) / total
        return (numerator / eta) / mean
    raise UnsupportedSpec(f"no analytic value for kind {spec.kind!r}")


@dataclass
class ConvergencePoint:
    responses_per_prompt: int
    eta: float
    estimate: float
    analytic: float
    abs_error: float
    std_error: float
    seed: int


def convergence_experiment(spec: DistSpec, eta: float, n_list: Sequence[int],
                           num_prompts: int,
                           config: RetaConfig | None = None, *,
                           threads: int = 1) -> list[ConvergencePoint]:
    """Estimate at each pool size N and report the gap to the analytic limit."""
    config = config or RetaConfig()
    limit = analytic_reta(spec, eta)
    points = []
    for pool_size in n_list:
        dataset_seed = config.seed + pool_size  # distinct data per pool size
        dataset, table = gen_synthetic(spec, num_prompts, pool_size, dataset_seed)
        estimate = reta_estimate(dataset, table, eta, config, threads=threads)
        points.append(ConvergencePoint(
            responses_per_prompt=pool_size,
            eta=eta,
            estimate=estimate.value,
            analytic=limit,
            abs_error=abs(estimate.value - limit),
            std_error=estimate.std_error,
            seed=dataset_seed,
        ))
    return points


def write_convergence_csv(points: Sequence[ConvergencePoint], path: str | Path,
                          header_comment: str | None = None) -> None:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["N", "eta", "estimate", "analytic", "abs_error",
                         "std_error", "seed"])
        for point in points:
            writer.writerow([
                point.responses_per_prompt, repr(point.eta), repr(point.estimate),
                repr(point.analytic), repr(point.abs_error), repr(point.std_error),
                point.seed,
            ])
