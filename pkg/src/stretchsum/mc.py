"""
Monte Carlo estimators of P(sum_i a_i X_i > x) over a truncated support.

Two estimators are provided:

* :func:`naive_mc` -- indicator of the event, one full draw per replication.
* :func:`largest_jump_mc` -- conditional Monte Carlo that integrates out the
  largest term analytically. Partitioning the event by which index carries
  the largest weighted term (ties have probability zero) gives, per draw,

      Z = sum_i tail( max(M_{-i}, x - S_{-i}) / a_i ),

  where S_{-i} is the sum without term i and M_{-i} the largest other term.
  E[Z] equals the target probability exactly, and Z stays informative when
  the event itself is far too rare to be observed.

Reproducibility: samples are cut into fixed-size blocks, each with its own
counter-based Philox stream keyed by (seed, block index). Workers only decide
which blocks they run; block statistics are merged in block order, so results
are bit-identical for every worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dist import StretchedExpParams, sample
from .errors import DomainError
from .weights import WeightVector

BLOCK_SIZE = 4096
CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class Block:
    index: int
    start: int
    stop: int

    @property
    def size(self):
        return self.stop - self.start


@dataclass(frozen=True)
class StreamPlan:
    seed: int
    samples: int
    blocks: tuple
    assignments: tuple  # per worker: tuple of block indices

    def generator(self, block_index: int) -> np.random.Generator:
        return block_generator(self.seed, block_index)


def block_generator(seed: int, block_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=(int(block_index),))
    return np.random.Generator(np.random.Philox(ss))


def stream_plan(seed: int, workers: int, samples: int, block_size: int = BLOCK_SIZE) -> StreamPlan:
    """Cut ``samples`` into contiguous blocks and hand contiguous runs of blocks to workers."""
    if workers < 1:
        raise DomainError("workers must be >= 1")
    if samples < 1:
        raise DomainError("samples must be >= 1")
    n_blocks = -(-samples // block_size)
    blocks = tuple(
        Block(b, b * block_size, min(samples, (b + 1) * block_size)) for b in range(n_blocks)
    )
    workers = min(workers, n_blocks)
    bounds = [n_blocks * w // workers for w in range(workers + 1)]
    assignments = tuple(tuple(range(bounds[w], bounds[w + 1])) for w in range(workers))
    return StreamPlan(int(seed), samples, blocks, assignments)


@dataclass(frozen=True)
class RareEventEstimate:
    """Probability estimate plus the normalised rate a_max**r * log(p_hat)."""

    p_hat: float
    stderr: float
    samples: int
    log_p_hat: float
    normalized_rate: float
    relative_error: float
    elapsed_seconds: float
    estimator: str = ""
    upper_confidence: float | None = None  # one-sided 95% bound when p_hat == 0
    truncated_mass: float = 0.0

    @classmethod
    def build(cls, p_hat, stderr, samples, a_max, r, elapsed, estimator, truncated_mass=0.0):
        p_hat = min(max(float(p_hat), 0.0), 1.0)
        log_p = math.log(p_hat) if p_hat > 0 else -math.inf
        upper = None
        if p_hat == 0.0:
            # exact binomial bound for zero successes: (1 - p)**N = alpha
            upper = -math.expm1(math.log(0.05) / samples)
        rel = stderr / p_hat if p_hat > 0 else math.inf
        return cls(p_hat, float(stderr), int(samples), log_p, a_max**r * log_p, rel,
                   float(elapsed), estimator, upper, float(truncated_mass))


def _merge(stats):
    """Pairwise (Chan et al.) merge of (count, mean, M2) triples in fixed order."""
    if len(stats) == 1:
        return stats[0]
    mid = len(stats) // 2
    na, ma, qa = _merge(stats[:mid])
    nb, mb, qb = _merge(stats[mid:])
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), qa + qb + delta * delta * (na * nb / n)


def _block_stats(values: np.ndarray):
    if values.min() == values.max():
        return values.size, float(values[0]), 0.0
    m = float(np.mean(values))
    d = values - m
    return values.size, m, float(np.dot(d, d))


def _rows_per_chunk(T: int) -> int:
    return max(1, CHUNK_ELEMENTS // T)


def _naive_block(a, x, params, rng, size):
    T = a.size
    step = _rows_per_chunk(T)
    out = np.empty(size)
    for lo in range(0, size, step):
        hi = min(size, lo + step)
        X = sample(params, rng, (hi - lo, T))
        X *= a
        out[lo:hi] = X.sum(axis=1) > x
    return out


def _largest_jump_block(a, x, params, rng, size):
    T = a.size
    kappa, r = params.kappa, params.r
    if x <= 0:
        # the event is certain for non-negative summands
        return np.ones(size)
    if T == 1:
        # one term: the conditional probability is deterministic
        return np.full(size, math.exp(-kappa * (x / a[0]) ** r))
    step = _rows_per_chunk(T)
    out = np.empty(size)
    inv_a = 1.0 / a
    for lo in range(0, size, step):
        hi = min(size, lo + step)
        rows = np.arange(hi - lo)
        Y = sample(params, rng, (hi - lo, T))
        Y *= a
        S = Y.sum(axis=1)
        i1 = Y.argmax(axis=1)
        y1 = Y[rows, i1]
        Y[rows, i1] = -1.0
        m2 = Y.max(axis=1)
        Y[rows, i1] = y1
        # threshold for term i: max(M_{-i}, x - S_{-i}); M_{-i} = y1 except at i1
        thr = Y
        thr += (x - S)[:, None]
        np.maximum(thr, y1[:, None], out=thr)
        thr[rows, i1] = np.maximum(x - S + y1, m2)
        thr *= inv_a
        if r == 0.5:
            np.sqrt(thr, out=thr)
        else:
            np.power(thr, r, out=thr)
        thr *= -kappa
        np.exp(thr, out=thr)
        out[lo:hi] = thr.sum(axis=1)
    return out


def _run(kernel, weight_vec, x, params, samples, seed, workers):
    a = np.ascontiguousarray(weight_vec.positive, dtype=float)
    plan = stream_plan(seed, workers, samples)

    def work(block_ids):
        res = []
        for b in block_ids:
            blk = plan.blocks[b]
            vals = kernel(a, float(x), params, plan.generator(b), blk.size)
            res.append((b, _block_stats(vals)))
        return res

    if len(plan.assignments) == 1:
        results = work(plan.assignments[0])
    else:
        with ThreadPoolExecutor(max_workers=len(plan.assignments)) as pool:
            results = [r for chunk in pool.map(work, plan.assignments) for r in chunk]
    results.sort(key=lambda t: t[0])
    return _merge([s for _, s in results])


def naive_mc(weight_vec: WeightVector, x: float, params: StretchedExpParams, samples: int,
             seed: int, workers: int = 1) -> RareEventEstimate:
    """Crude Monte Carlo with binomial standard error sqrt(p(1-p)/N)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    t0 = time.perf_counter()
    n, mean, _ = _run(_naive_block, weight_vec, x, params, samples, seed, workers)
    se = math.sqrt(max(mean * (1.0 - mean), 0.0) / n)
    return RareEventEstimate.build(mean, se, n, weight_vec.a_max, params.r,
                                   time.perf_counter() - t0, "naive", weight_vec.tail_sum_bound)


def largest_jump_mc(weight_vec: WeightVector, x: float, params: StretchedExpParams,
                    samples: int, seed: int, workers: int = 1) -> RareEventEstimate:
    """Conditional largest-jump estimator; cost O(len(support)) per replication."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    t0 = time.perf_counter()
    n, mean, m2 = _run(_largest_jump_block, weight_vec, x, params, samples, seed, workers)
    var = m2 / (n - 1) if n > 1 else 0.0
    se = math.sqrt(max(var, 0.0) / n)
    return RareEventEstimate.build(mean, se, n, weight_vec.a_max, params.r,
                                   time.perf_counter() - t0, "largest_jump",
                                   weight_vec.tail_sum_bound)


ESTIMATORS = {"naive": naive_mc, "largest_jump": largest_jump_mc}
