"""Diverse prompt selection via fixed-size determinantal point processes.

The kernel is a scaled Gram matrix of candidate embeddings, with the scale
chosen so all eigenvalues stay below 1. Size-k subsets are sampled with a
swap Markov chain: propose replacing one member with one outsider and
accept with probability min(1, det(K_new)/det(K_old)). Determinant ratios
are evaluated in O(k^2) per step through Cholesky row deletion/insertion,
with a periodic from-scratch refactorization to bound numerical drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import PromptRecord
from .errors import (
    DegenerateInit,
    InvalidConfig,
    MissingEmbedding,
    NumericalBreakdown,
    ZeroMatrix,
)

_EIGENVALUE_CEILING = 0.99
_SINGULAR_REL_TOL = 1e-12
_REFACTOR_EVERY = 1000
_INIT_ATTEMPTS = 100


@dataclass
class DppModel:
    """Candidate embeddings with the derived kernel ``lam * E @ E.T``."""

    embeddings: np.ndarray  # (num_candidates, dim)
    lam: float
    kernel: np.ndarray      # (num_candidates, num_candidates)

    @property
    def num_candidates(self) -> int:
        return self.embeddings.shape[0]


@dataclass(frozen=True)
class DppSampleConfig:
    k: int
    seed: int = 0
    epsilon: float = 0.01
    max_steps: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidConfig(f"k must be positive, got {self.k}")
        if not 0.0 < self.epsilon < 1.0:
            raise InvalidConfig(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.max_steps is not None and self.max_steps < 0:
            raise InvalidConfig("max_steps must be non-negative")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidConfig("seed must fit in 64 unsigned bits")


def default_chain_steps(num_candidates: int, k: int, epsilon: float) -> int:
    """Swap-chain length for an epsilon-approximate sample."""
    return math.ceil(num_candidates * k * math.log(1.0 / epsilon))


def build_dpp(prompts: Sequence[PromptRecord]) -> DppModel:
    """Kernel from candidate embeddings, scaled so eigenvalues stay below 1.

    The scale is 0.99 / s_max^2 with s_max the largest singular value of
    the embedding matrix, which makes the kernel invariant to a common
    rescaling of all embeddings.
    """
    if not prompts:
        raise InvalidConfig("no candidate prompts")
    dim = None
    rows = []
    for prompt in prompts:
        if prompt.embedding is None:
            raise MissingEmbedding(prompt.prompt_id)
        if dim is None:
            dim = len(prompt.embedding)
        elif len(prompt.embedding) != dim:
            raise InvalidConfig(
                f"embedding dimension mismatch at prompt {prompt.prompt_id!r}")
        rows.append(prompt.embedding)
    embeddings = np.asarray(rows, dtype=np.float64)
    s_max = float(np.linalg.svd(embeddings, compute_uv=False)[0])
    if s_max == 0.0:
        raise ZeroMatrix("all candidate embeddings are zero")
    lam = _EIGENVALUE_CEILING / (s_max * s_max)
    kernel = lam * (embeddings @ embeddings.T)
    return DppModel(embeddings=embeddings, lam=lam, kernel=kernel)


def subset_log_det(model: DppModel, subset: Sequence[int]) -> float:
    """log det of the kernel restricted to ``subset``; -inf if singular."""
    idx = np.asarray(sorted(subset), dtype=np.intp)
    sign, logdet = np.linalg.slogdet(model.kernel[np.ix_(idx, idx)])
    if sign <= 0:
        return -math.inf
    return float(logdet)


def _chol_delete(factor: np.ndarray, position: int) -> np.ndarray:
    """Cholesky factor of K with row/column ``position`` removed, O(k^2).

    Deleting a row of L leaves one superdiagonal entry per trailing row;
    Givens rotations applied to column pairs restore lower-triangular form
    without changing L @ L.T.
    """
    k = factor.shape[0]
    work = np.delete(factor, position, axis=0)
    for col in range(position, k - 1):
        a = work[col, col]
        b = work[col, col + 1]
        r = math.hypot(a, b)
        if r == 0.0:
            continue
        c, s = a / r, b / r
        left = c * work[:, col] + s * work[:, col + 1]
        right = -s * work[:, col] + c * work[:, col + 1]
        work[:, col] = left
        work[:, col + 1] = right
    return np.ascontiguousarray(work[:, : k - 1])


def _schur_complement(factor_rest: np.ndarray, cross: np.ndarray, diag: float) -> float:
    """diag - cross^T K_rest^{-1} cross given the Cholesky factor of K_rest."""
    if factor_rest.shape[0] == 0:
        return diag
    solved = solve_triangular(factor_rest, cross, lower=True, check_finite=False)
    return diag - float(solved @ solved)


def _chol_insert(factor_rest: np.ndarray, cross: np.ndarray, diag: float) -> np.ndarray:
    """Cholesky factor after appending one index with kernel column ``cross``."""
    size = factor_rest.shape[0]
    out = np.zeros((size + 1, size + 1))
    out[:size, :size] = factor_rest
    if size:
        solved = solve_triangular(factor_rest, cross, lower=True, check_finite=False)
        out[size, :size] = solved
        rem = diag - float(solved @ solved)
    else:
        rem = diag
    if rem <= 0.0:
        raise np.linalg.LinAlgError("subset kernel not positive definite")
    out[size, size] = math.sqrt(rem)
    return out


def swap_log_ratio(model: DppModel, subset: Sequence[int], position: int,
                   candidate: int, factor: np.ndarray | None = None) -> float:
    """log of det(K with subset[position] -> candidate) / det(K of subset).

    Computed incrementally from the subset's Cholesky factor (built here if
    not supplied) as the ratio of two Schur complements against the shared
    remainder. Returns -inf when the swapped-in subset is singular.
    """
    subset = list(subset)
    kernel = model.kernel
    idx = np.asarray(subset, dtype=np.intp)
    if factor is None:
        factor = np.linalg.cholesky(kernel[np.ix_(idx, idx)])
    rest_factor = _chol_delete(factor, position)
    rest = np.delete(idx, position)
    removed = subset[position]
    s_out = _schur_complement(rest_factor, kernel[rest, removed], kernel[removed, removed])
    s_in = _schur_complement(rest_factor, kernel[rest, candidate],
                             kernel[candidate, candidate])
    if not (math.isfinite(s_out) and math.isfinite(s_in)) or s_out <= 0.0:
        raise NumericalBreakdown(
            f"non-finite determinant ratio at swap {removed} -> {candidate}")
    if s_in <= _SINGULAR_REL_TOL * max(kernel[candidate, candidate], 1e-300):
        return -math.inf
    return math.log(s_in) - math.log(s_out)


def sample_kdpp(model: DppModel, config: DppSampleConfig) -> list[int]:
    """An epsilon-approximate size-k sample; sorted candidate indices.

    Deterministic for a given (model, config). Subsets with linearly
    dependent embeddings have zero determinant and are never emitted.
    """
    total = model.num_candidates
    k = config.k
    if k > total:
        raise InvalidConfig(f"k={k} exceeds candidate count {total}")
    if k > np.linalg.matrix_rank(model.embeddings):
        raise DegenerateInit(f"embedding rank below k={k}")
    if k == total:
        return list(range(total))

    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.seed])))
    kernel = model.kernel

    factor = None
    subset: list[int] = []
    for _ in range(_INIT_ATTEMPTS):
        attempt = [int(i) for i in rng.choice(total, size=k, replace=False)]
        idx = np.asarray(attempt, dtype=np.intp)
        try:
            factor = np.linalg.cholesky(kernel[np.ix_(idx, idx)])
        except np.linalg.LinAlgError:
            continue
        scale = float(np.max(np.diag(kernel)))
        if float(np.min(np.diag(factor))) ** 2 <= _SINGULAR_REL_TOL * max(scale, 1e-300):
            factor = None
            continue
        subset = attempt
        break
    if factor is None:
        raise DegenerateInit(f"no non-singular initial subset found in {_INIT_ATTEMPTS} tries")

    steps = (config.max_steps if config.max_steps is not None
             else default_chain_steps(total, k, config.epsilon))
    in_subset = np.zeros(total, dtype=bool)
    in_subset[subset] = True
    outside = [i for i in range(total) if not in_subset[i]]

    for step in range(steps):
        position = int(rng.integers(k))
        candidate = outside[int(rng.integers(len(outside)))]
        rest_factor = _chol_delete(factor, position)
        rest = np.asarray([subset[i] for i in range(k) if i != position], dtype=np.intp)
        removed = subset[position]
        s_out = _schur_complement(rest_factor, kernel[rest, removed],
                                  kernel[removed, removed])
        s_in = _schur_complement(rest_factor, kernel[rest, candidate],
                                 kernel[candidate, candidate])
        if not (math.isfinite(s_out) and math.isfinite(s_in)) or s_out <= 0.0:
            # refactorize once before giving up; drift can poison the factor
            idx = np.asarray(subset, dtype=np.intp)
            factor = np.linalg.cholesky(kernel[np.ix_(idx, idx)])
            rest_factor = _chol_delete(factor, position)
            s_out = _schur_complement(rest_factor, kernel[rest, removed],
                                      kernel[removed, removed])
            s_in = _schur_complement(rest_factor, kernel[rest, candidate],
                                     kernel[candidate, candidate])
            if not (math.isfinite(s_out) and math.isfinite(s_in)) or s_out <= 0.0:
                raise NumericalBreakdown(
                    f"determinant ratio not finite at step {step}")
        u = rng.random()
        # u * s_out < s_in is u < min(1, det ratio); singular targets never pass
        accept = (s_in > _SINGULAR_REL_TOL * max(kernel[candidate, candidate], 1e-300)
                  and u * s_out < s_in)
        if accept:
            outside[outside.index(candidate)] = removed
            subset = [subset[i] for i in range(k) if i != position] + [candidate]
            factor = _chol_insert(rest_factor, kernel[rest, candidate],
                                  kernel[candidate, candidate])
        if (step + 1) % _REFACTOR_EVERY == 0:
            idx = np.asarray(subset, dtype=np.intp)
            factor = np.linalg.cholesky(kernel[np.ix_(idx, idx)])
    return sorted(subset)


def diversity_score(model: DppModel, subset: Sequence[int]) -> float:
    """Mean absolute cosine similarity over distinct pairs (0 for a singleton)."""
    if len(subset) == 0:
        raise InvalidConfig("subset must be non-empty")
    if len(subset) == 1:
        return 0.0
    vectors = model.embeddings[np.asarray(sorted(subset), dtype=np.intp)]
    norms = np.linalg.norm(vectors, axis=1)
    norms[norms == 0.0] = 1.0  # zero vectors contribute zero similarity
    unit = vectors / norms[:, None]
    cosine = np.abs(unit @ unit.T)
    upper = np.triu_indices(len(subset), k=1)
    return float(cosine[upper].mean())
