"""Seeded perceived-cost sampling for probit route choice.

Streams are numpy ``PCG64`` generators. Normal variates use the inverse-CDF
method on one uniform double per variate, so a stream advances by exactly one
draw per link per sample and batched draws reproduce sequential ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

RNG_ALGORITHM = f"numpy.random.PCG64 (numpy {np.__version__}); inverse-CDF normals"

TRUNCATION_FRACTION = 0.01

_BATCH_ROWS = 1 << 16


def make_rng(seed: int) -> np.random.Generator:
    """Pinned generator for a 64-bit unsigned seed."""
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


def worker_rng(seed: int, worker: int) -> np.random.Generator:
    """Independent stream for worker ``worker`` derived from a master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(worker)])))


@dataclass(frozen=True)
class PerceivedCostDraw:
    sampled_cost: np.ndarray
    truncated: int


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")


def sample_perceived_costs(
    mean_costs, free_flow_costs, gamma: float, rng: np.random.Generator
) -> PerceivedCostDraw:
    """One realisation of T_a ~ Normal(t_a, variance gamma * t0_a) per link.

    Samples below ``0.01 * t0_a`` are raised to that floor; the number of
    floored entries is reported in ``truncated``.
    """
    mean = np.asarray(mean_costs, dtype=float)
    t0 = np.asarray(free_flow_costs, dtype=float)
    if mean.shape != t0.shape or mean.ndim != 1:
        raise ValueError("mean_costs and free_flow_costs must be aligned 1-d arrays")
    _check_gamma(gamma)
    z = ndtri(rng.random(mean.shape[0]))
    sample = mean + np.sqrt(gamma * t0) * z
    floor = TRUNCATION_FRACTION * t0
    low = sample < floor
    if low.any():
        sample[low] = floor[low]
    return PerceivedCostDraw(sample, int(low.sum()))


def iter_sample_batches(mean_costs, free_flow_costs, gamma: float, rng, draws: int, batch_rows: int = _BATCH_ROWS):
    """Yield ``(samples, truncated)`` blocks totalling ``draws`` rows.

    Row ``k`` equals what the k-th call to ``sample_perceived_costs`` on the
    same stream would return.
    """
    mean = np.asarray(mean_costs, dtype=float)
    t0 = np.asarray(free_flow_costs, dtype=float)
    if mean.shape != t0.shape or mean.ndim != 1:
        raise ValueError("mean_costs and free_flow_costs must be aligned 1-d arrays")
    _check_gamma(gamma)
    scale = np.sqrt(gamma * t0)
    floor = TRUNCATION_FRACTION * t0
    remaining = int(draws)
    while remaining > 0:
        rows = min(remaining, batch_rows)
        block = mean + scale * ndtri(rng.random((rows, mean.shape[0])))
        low = block < floor
        n_low = int(low.sum())
        if n_low:
            block = np.where(low, floor, block)
        yield block, n_low
        remaining -= rows


def sample_perceived_costs_batch(mean_costs, free_flow_costs, gamma: float, rng, draws: int):
    """All ``draws`` realisations as a (draws, n_links) array plus truncation count."""
    blocks, total = [], 0
    for block, n_low in iter_sample_batches(mean_costs, free_flow_costs, gamma, rng, draws):
        blocks.append(block)
        total += n_low
    if not blocks:
        return np.empty((0, np.asarray(mean_costs).shape[0])), 0
    return np.vstack(blocks), total


def two_link_choice_probability(t1: float, t2: float, t01: float, t02: float, gamma: float) -> float:
    """Probability that route 1 is perceived cheaper than a disjoint route 2."""
    _check_gamma(gamma)
    return float(ndtr((t2 - t1) / math.sqrt(gamma * (t01 + t02))))
