"""Non-learned schedulers: first-come-first-served and greedy buffer overlap."""
from __future__ import annotations

import numpy as np

from .bufferpool import BufferPool, snapshot
from .catalog import Catalog, QuerySpec, access_matrix, flatten
from .errors import ValidationError


def _require_nonempty(queue):
    if len(queue) == 0:
        raise ValidationError("cannot pick from an empty queue")


def fcfs_next(queue) -> int:
    _require_nonempty(queue)
    return 0


def greedy_score(buffer_snapshot, query_access) -> float:
    """Expected block hits: sum over blocks of occupancy times access probability."""
    if len(buffer_snapshot) != len(query_access):
        raise ValidationError("snapshot and access matrix have different row counts")
    total = 0.0
    for s, a in zip(buffer_snapshot, query_access):
        s = np.asarray(s, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64)
        if s.shape != a.shape:
            raise ValidationError(f"row shape mismatch {s.shape} vs {a.shape}")
        total += float(s @ a)
    return total


def greedy_pick(scores) -> int:
    # np.argmax returns the first maximum, i.e. FCFS among ties
    return int(np.argmax(np.asarray(scores)))


def greedy_next(pool: BufferPool, queue, catalog: Catalog) -> int:
    """Index of the queued query with the highest expected hit count.

    ``queue`` holds QuerySpecs or precomputed full-resolution access matrices.
    """
    _require_nonempty(queue)
    if pool.catalog is not None:
        occ = pool.snapshot_flat()
    else:
        occ = flatten(snapshot(pool, catalog))
    scores = []
    for q in queue:
        acc = access_matrix(q, catalog) if isinstance(q, QuerySpec) else q
        scores.append(float(occ @ flatten(acc)))
    return greedy_pick(scores)


class FCFSScheduler:
    name = "fcfs"

    def reset(self, queue, catalog):
        pass

    def pick(self, pool, remaining) -> int:
        return fcfs_next(remaining)


class GreedyScheduler:
    """Stateful greedy that caches flat access vectors for a whole episode."""

    name = "greedy"

    def reset(self, queue, catalog):
        self._acc = np.stack([flatten(access_matrix(q, catalog)) for q in queue])

    def pick(self, pool, remaining) -> int:
        _require_nonempty(remaining)
        scores = self._acc[remaining] @ pool.snapshot_flat()
        return greedy_pick(scores)
