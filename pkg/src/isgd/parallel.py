"""Data-parallel forward-backward over contiguous sub-batches.

Workers are in-process threads.  Each one reads the same weight snapshot
and computes un-normalized cross-entropy terms on its shard; the caller's
thread then reduces them in rank order, normalizes by the batch size and
adds weight decay once.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import DivergenceError, WorkerError


@dataclass(frozen=True)
class ShardPlan:
    bounds: tuple[tuple[int, int], ...]

    @property
    def worker_count(self) -> int:
        return len(self.bounds)

    def sizes(self) -> list[int]:
        return [b - a for a, b in self.bounds]


def shard(n_b: int, workers: int) -> ShardPlan:
    """Balanced contiguous split; the first ``n_b % workers`` shards get one extra."""
    if workers < 1:
        raise ValueError("need at least one worker")
    if workers > n_b:
        raise ValueError(f"{workers} workers for a batch of {n_b}")
    base, extra = divmod(n_b, workers)
    bounds = []
    start = 0
    for r in range(workers):
        stop = start + base + (r < extra)
        bounds.append((start, stop))
        start = stop
    return ShardPlan(tuple(bounds))


class ParallelEvaluator:
    """Owns the worker pool for one training run.

    Use as a context manager or call :meth:`close`.  With one worker no
    pool is created and the pass runs inline.
    """

    def __init__(self, spec: nn.NetworkSpec, workers: int = 1):
        if workers < 1:
            raise ValueError("need at least one worker")
        self.spec = spec
        self.workers = workers
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __call__(self, w: np.ndarray, batch) -> nn.LossAndGrad:
        X, y = nn._xy(batch)
        plan = shard(len(y), self.workers)
        snapshot = w.copy()
        snapshot.setflags(write=False)
        if self._pool is None:
            parts = [nn.data_terms(snapshot, X[a:b], y[a:b], self.spec) for a, b in plan.bounds]
        else:
            futures = [self._pool.submit(nn.data_terms, snapshot, X[a:b], y[a:b], self.spec)
                       for a, b in plan.bounds]
            parts = []
            for rank, fut in enumerate(futures):
                try:
                    parts.append(fut.result())
                except DivergenceError:
                    raise
                except Exception as exc:
                    raise WorkerError(f"worker {rank} failed: {exc}") from exc
        return reduce_parts(snapshot, parts, self.spec.weight_decay)


def reduce_parts(w: np.ndarray, parts, weight_decay: float) -> nn.LossAndGrad:
    ce = np.concatenate([p[0] for p in parts])
    grad = parts[0][1].copy()
    for _, g in parts[1:]:
        grad += g
    return nn.finalize(w, ce, grad, weight_decay)


def parallel_forward_backward(w: np.ndarray, batch, spec: nn.NetworkSpec,
                              workers: int = 1) -> nn.LossAndGrad:
    with ParallelEvaluator(spec, workers) as ev:
        return ev(w, batch)
