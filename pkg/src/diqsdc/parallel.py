"""Deterministic block-parallel sampling.

Every block of work draws from its own stream keyed by ``(seed, stage,
block index)``, so results do not depend on how many threads run them.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

BLOCK_SIZE = 1 << 16


def stage_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


def default_threads() -> int:
    return os.cpu_count() or 1


def map_blocks(
    n: int,
    seed: int,
    stage: int,
    fn: Callable[[slice, np.random.Generator], object],
    threads: int | None = 1,
    block_size: int = BLOCK_SIZE,
) -> list:
    """Apply ``fn(block_slice, rng)`` over ``range(n)`` in fixed-size blocks.

    Results come back in block order.
    """
    slices = [slice(lo, min(lo + block_size, n)) for lo in range(0, n, block_size)]
    jobs = [(sl, stage_rng(seed, stage, i)) for i, sl in enumerate(slices)]
    threads = default_threads() if threads is None else threads
    if threads <= 1 or len(jobs) <= 1:
        return [fn(sl, rng) for sl, rng in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def concat(parts: Sequence[np.ndarray], dtype=None) -> np.ndarray:
    if not parts:
        return np.empty(0, dtype=dtype)
    return np.concatenate(parts)


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One draw per row of a row-stochastic matrix."""
    probs = np.asarray(probs)
    u = rng.random(probs.shape[0])
    cum = np.cumsum(probs, axis=1)
    return np.minimum((u[:, None] >= cum[:, :-1]).sum(axis=1), probs.shape[1] - 1)
