"""Kernel construction and swap-chain sampling."""

from __future__ import annotations

import math

import numpy as np
import pytest

from retabench import (
    DppSampleConfig,
    PromptRecord,
    build_dpp,
    default_chain_steps,
    diversity_score,
    sample_kdpp,
    subset_log_det,
    swap_log_ratio,
)
from retabench.errors import DegenerateInit, InvalidConfig, MissingEmbedding, ZeroMatrix


def records(matrix) -> list[PromptRecord]:
    return [PromptRecord(f"c{i:03d}", "text", tuple(float(v) for v in row))
            for i, row in enumerate(matrix)]


def test_build_orthonormal():
    model = build_dpp(records(np.eye(3)))
    assert model.lam == pytest.approx(0.99, abs=1e-12)
    assert np.allclose(model.kernel, 0.99 * np.eye(3), atol=1e-12)


def test_build_scale_cancellation():
    base = build_dpp(records(np.eye(3)))
    scaled = build_dpp(records(2.0 * np.eye(3)))
    assert scaled.lam == pytest.approx(base.lam / 4.0, abs=1e-12)
    assert np.allclose(scaled.kernel, base.kernel, atol=1e-12)


def test_build_missing_embedding():
    prompts = records(np.eye(2)) + [PromptRecord("c999", "text", None)]
    with pytest.raises(MissingEmbedding):
        build_dpp(prompts)


def test_build_zero_matrix():
    with pytest.raises(ZeroMatrix):
        build_dpp(records(np.zeros((3, 4))))


def test_full_set_shortcut():
    model = build_dpp(records(np.eye(4)))
    assert sample_kdpp(model, DppSampleConfig(k=4, seed=0)) == [0, 1, 2, 3]


def test_rank_deficiency_raises():
    rng = np.random.default_rng(0)
    low_rank = rng.standard_normal((10, 3)) @ rng.standard_normal((3, 6))
    model = build_dpp(records(low_rank))
    with pytest.raises(DegenerateInit):
        sample_kdpp(model, DppSampleConfig(k=5, seed=0))


def test_duplicate_pair_never_sampled():
    matrix = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    model = build_dpp(records(matrix))
    for seed in range(100):
        subset = sample_kdpp(model, DppSampleConfig(k=2, seed=seed))
        assert subset != [0, 1], f"seed {seed} returned the duplicate pair"


def test_seed_determinism():
    rng = np.random.default_rng(9)
    model = build_dpp(records(rng.standard_normal((15, 6))))
    config = DppSampleConfig(k=4, seed=1234)
    assert sample_kdpp(model, config) == sample_kdpp(model, config)
    other = sample_kdpp(model, DppSampleConfig(k=4, seed=5678))
    assert isinstance(other, list) and len(other) == 4


def test_incremental_ratio_matches_direct_determinants():
    rng = np.random.default_rng(3)
    model = build_dpp(records(rng.standard_normal((12, 7))))
    subset = [0, 2, 5, 7, 9]
    worst = 0.0
    for position in range(5):
        for candidate in (1, 3, 4, 6, 8, 10, 11):
            incremental = swap_log_ratio(model, subset, position, candidate)
            swapped = [s for i, s in enumerate(subset) if i != position] + [candidate]
            direct = subset_log_det(model, swapped) - subset_log_det(model, subset)
            worst = max(worst, abs(incremental - direct))
    assert worst <= 1e-9


def test_swap_ratio_into_singular_subset_is_zero_probability():
    matrix = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    model = build_dpp(records(matrix))
    # replacing member 2 of {0, 2} with duplicate 1 gives a singular kernel
    assert swap_log_ratio(model, [0, 2], 1, 1) == -math.inf


def test_chain_steps_default():
    assert default_chain_steps(100, 10, 0.01) == math.ceil(1000 * math.log(100.0))
    config = DppSampleConfig(k=3, seed=0)
    assert config.max_steps is None
    with pytest.raises(InvalidConfig):
        DppSampleConfig(k=0, seed=0)
    with pytest.raises(InvalidConfig):
        DppSampleConfig(k=2, seed=0, epsilon=1.5)


def test_diversity_score_values():
    model = build_dpp(records(np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])))
    assert diversity_score(model, [0, 1]) == pytest.approx(0.0, abs=1e-12)
    assert diversity_score(model, [0, 2]) == pytest.approx(1.0, abs=1e-12)
    assert diversity_score(model, [1]) == 0.0
    with pytest.raises(InvalidConfig):
        diversity_score(model, [])


def test_sampled_subsets_are_valid():
    rng = np.random.default_rng(11)
    model = build_dpp(records(rng.standard_normal((20, 8))))
    for seed in range(20):
        subset = sample_kdpp(model, DppSampleConfig(k=6, seed=seed))
        assert len(set(subset)) == 6
        assert subset == sorted(subset)
        assert subset_log_det(model, subset) > -math.inf
