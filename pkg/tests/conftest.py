"""Shared fixtures: tiny in-memory datasets and on-disk JSONL builders."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from retabench import BenchmarkDataset, PromptRecord, ResponseRecord, RmScoreTable


def build_dataset(oracle_by_prompt: dict[str, list[float]],
                  name: str = "test") -> BenchmarkDataset:
    """Dataset from prompt_id -> oracle scores; ids r000, r001, ..."""
    prompts = [PromptRecord(pid, f"prompt {pid}") for pid in sorted(oracle_by_prompt)]
    responses = {
        pid: [
            ResponseRecord(pid, f"r{i:03d}", float(score))
            for i, score in enumerate(oracle_by_prompt[pid])
        ]
        for pid in sorted(oracle_by_prompt)
    }
    sizes = {len(v) for v in responses.values()}
    assert len(sizes) == 1
    return BenchmarkDataset(name=name, prompts=prompts, responses=responses,
                            responses_per_prompt=sizes.pop())


def build_table(scores_by_prompt: dict[str, list[float]],
                rm_name: str = "rm") -> RmScoreTable:
    """Score table aligned with build_dataset's response ids."""
    scores = {
        (pid, f"r{i:03d}"): float(score)
        for pid in sorted(scores_by_prompt)
        for i, score in enumerate(scores_by_prompt[pid])
    }
    return RmScoreTable(rm_name=rm_name, scores=scores)


def write_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def write_dataset_dir(directory: Path,
                      prompts: list[dict],
                      responses: list[dict]) -> Path:
    directory.mkdir(parents=True, exist_ok=True)
    write_jsonl(directory / "prompts.jsonl", prompts)
    write_jsonl(directory / "responses.jsonl", responses)
    return directory


@pytest.fixture
def tiny_dataset_dir(tmp_path: Path) -> Path:
    """2 prompts x 3 responses, oracle scores in (0, 10]."""
    prompts = [
        {"prompt_id": "p1", "text": "first prompt"},
        {"prompt_id": "p2", "text": "second prompt"},
    ]
    responses = [
        {"prompt_id": "p1", "response_id": "a", "oracle_score": 4.0, "text": "r"},
        {"prompt_id": "p1", "response_id": "b", "oracle_score": 2.5},
        {"prompt_id": "p1", "response_id": "c", "oracle_score": 7.0},
        {"prompt_id": "p2", "response_id": "a", "oracle_score": 1.0},
        {"prompt_id": "p2", "response_id": "b", "oracle_score": 9.5},
        {"prompt_id": "p2", "response_id": "c", "oracle_score": 3.0},
    ]
    return write_dataset_dir(tmp_path / "tiny", prompts, responses)


def scores_records(dataset_pairs: list[tuple[str, str]], values: list[float],
                   rm_name: str = "rm") -> list[dict]:
    return [
        {"prompt_id": pid, "response_id": rid, "rm_name": rm_name, "score": value}
        for (pid, rid), value in zip(dataset_pairs, values)
    ]


def random_ranked(rng: np.random.Generator, size: int, prompt_id: str = "p0"):
    """A RankedResponses over distinct random oracle scores, scrambled RM order."""
    from retabench import rank_by_table
    oracle = rng.uniform(0.5, 9.5, size=size)
    rm = rng.standard_normal(size)
    dataset = build_dataset({prompt_id: list(oracle)})
    table = build_table({prompt_id: list(rm)})
    return rank_by_table(dataset, table, prompt_id)
