"""Block-granular buffer pool with LRU eviction."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

import numpy as np

from .catalog import Catalog
from .errors import CatalogError, ValidationError

HIT = "hit"
MISS = "miss"


class BlockRef(NamedTuple):
    relation_id: int
    block_index: int


@dataclass
class ExecutionStats:
    hits: int = 0
    misses: int = 0

    @property
    def requests(self) -> int:
        return self.hits + self.misses

    def __add__(self, other: "ExecutionStats") -> "ExecutionStats":
        return ExecutionStats(self.hits + other.hits, self.misses + other.misses)


class BufferPool:
    """Fixed-capacity resident block set; recency order is oldest first.

    When constructed with a catalog, block references are validated and a flat
    occupancy vector is kept in sync so snapshots are O(total blocks).
    """

    def __init__(self, capacity: int, catalog: Optional[Catalog] = None):
        if int(capacity) < 1:
            raise ValidationError(f"capacity must be >= 1, got {capacity!r}")
        self.capacity = int(capacity)
        self.catalog = catalog
        self._lru: OrderedDict = OrderedDict()
        self._occ = np.zeros(catalog.total_blocks) if catalog is not None else None

    def __len__(self):
        return len(self._lru)

    def __contains__(self, block):
        return tuple(block) in self._lru

    @property
    def resident(self) -> set:
        return {BlockRef(*b) for b in self._lru}

    @property
    def recency(self) -> list:
        return [BlockRef(*b) for b in self._lru]

    def _flat(self, block) -> int:
        cat = self.catalog
        row = cat.row(block[0])
        n = cat.relations[row].block_count
        if not 0 <= block[1] < n:
            raise ValidationError(f"block index {block[1]} out of range for relation {block[0]} ({n} blocks)")
        return int(cat.offsets[row]) + int(block[1])

    def access_block(self, block) -> str:
        key = (block[0], block[1])
        lru = self._lru
        if key in lru:
            lru.move_to_end(key)
            return HIT
        if self._occ is not None:
            try:
                pos = self._flat(key)
            except CatalogError as exc:
                raise ValidationError(str(exc)) from None
        elif key[1] < 0:
            raise ValidationError(f"negative block index in {key}")
        if len(lru) >= self.capacity:
            victim, _ = lru.popitem(last=False)
            if self._occ is not None:
                self._occ[self._flat(victim)] = 0.0
        lru[key] = None
        if self._occ is not None:
            self._occ[pos] = 1.0
        return MISS

    def execute_query(self, reads: Iterable) -> ExecutionStats:
        stats = ExecutionStats()
        for b in reads:
            if self.access_block(b) == HIT:
                stats.hits += 1
            else:
                stats.misses += 1
        return stats

    def snapshot_flat(self) -> np.ndarray:
        if self._occ is None:
            raise ValidationError("snapshot requires a pool constructed with a catalog")
        return self._occ.copy()

    def copy(self) -> "BufferPool":
        other = BufferPool.__new__(BufferPool)
        other.capacity = self.capacity
        other.catalog = self.catalog
        other._lru = self._lru.copy()
        other._occ = None if self._occ is None else self._occ.copy()
        return other

    def reset(self) -> None:
        self._lru.clear()
        if self._occ is not None:
            self._occ[:] = 0.0


def execute_query(pool: BufferPool, reads: Iterable) -> ExecutionStats:
    return pool.execute_query(reads)


def hit_ratio_reward(stats: ExecutionStats) -> float:
    """Fraction of block requests served from the pool; 0 for an empty query."""
    if stats.requests == 0:
        return 0.0
    return stats.hits / stats.requests


def snapshot(pool: BufferPool, catalog: Catalog) -> list[np.ndarray]:
    """Full-resolution 0/1 occupancy matrix, rows in catalog order."""
    rows = catalog.zeros()
    for rel_id, blk in pool._lru:
        rows[catalog.row(rel_id)][blk] = 1.0
    return rows
