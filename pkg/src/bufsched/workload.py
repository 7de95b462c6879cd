"""Seeded synthetic catalogs, query templates and query instances.

Templates are join trees over a few base relations. Indexed relations are
read through index scans (selectivity drawn per instance from the
template's range); unindexed ones are sequentially scanned. Queries from the
same template therefore overlap heavily in the blocks they touch, which is
the reuse a cache-aware scheduler can exploit.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import NamedTuple, Optional

import numpy as np

from .bufferpool import BlockRef
from .catalog import (AccessDescriptor, AccessMode, Catalog, IndexScan, NestedLoop, PlanNode,
                      QuerySpec, RelationKind, RelationMeta, SeqScan, parse_plan)
from .errors import ValidationError

SAMPLE = "sample"
EXPECTED = "expected"


@dataclass
class WorkloadSpec:
    relation_count: int = 12
    block_range: tuple = (64, 512)
    index_ratio: float = 1 / 3
    template_count: int = 40
    fanout_range: tuple = (1, 3)
    selectivity_range: tuple = (0.05, 0.5)
    selectivity_spread: float = 0.2
    nested_loop_prob: float = 0.2
    loop_range: tuple = (2, 4)
    query_count: int = 400
    test_fraction: float = 0.2
    seed: int = 0

    def validate(self) -> None:
        def rng_ok(r, lo=None):
            return len(r) == 2 and r[0] <= r[1] and (lo is None or r[0] >= lo)

        if self.relation_count < 1:
            raise ValidationError("relation_count must be >= 1")
        if not rng_ok(self.block_range, 1):
            raise ValidationError(f"bad block_range {self.block_range}")
        if not rng_ok(self.fanout_range, 1):
            raise ValidationError(f"bad fanout_range {self.fanout_range}")
        if not rng_ok(self.loop_range, 1):
            raise ValidationError(f"bad loop_range {self.loop_range}")
        if not rng_ok(self.selectivity_range, 0.0) or self.selectivity_range[1] > 1.0:
            raise ValidationError(f"bad selectivity_range {self.selectivity_range}")
        for name in ("index_ratio", "test_fraction", "nested_loop_prob", "selectivity_spread"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.template_count < 1 or self.query_count < 0:
            raise ValidationError("template_count must be >= 1 and query_count >= 0")
        n_index = self.index_count
        n_base = self.relation_count - n_index
        if n_base < 1 or n_index > n_base:
            raise ValidationError("index_ratio leaves no room for base relations to index")
        if self.fanout_range[1] > n_base:
            raise ValidationError(
                f"template fan-out {self.fanout_range[1]} exceeds base relation count {n_base}")

    @property
    def index_count(self) -> int:
        return int(round(self.index_ratio * self.relation_count))

    @classmethod
    def from_dict(cls, d: dict) -> "WorkloadSpec":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        for k, v in known.items():
            if isinstance(v, list):
                known[k] = tuple(v)
        return cls(**known)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class ScanSkeleton:
    relation: int
    index: Optional[int] = None
    selectivity_range: tuple = (1.0, 1.0)
    loop_count: int = 1


@dataclass
class Template:
    template_id: int
    scans: list = field(default_factory=list)

    @property
    def profile(self) -> dict:
        """relation id -> (mode, lo, hi) with loop adaptation applied."""
        out = {}
        for s in self.scans:
            if s.index is None:
                out[s.relation] = (AccessMode.FULL_SCAN, 1.0, 1.0)
            else:
                lo, hi = (min(1.0, x * s.loop_count) for x in s.selectivity_range)
                out[s.relation] = out[s.index] = (AccessMode.SELECTIVE, lo, hi)
        return out

    def instantiate(self, query_id: int, catalog: Catalog, rng: np.random.Generator) -> QuerySpec:
        nodes = []
        for s in self.scans:
            if s.index is None:
                nodes.append((SeqScan(s.relation), 1))
            else:
                lo, hi = s.selectivity_range
                nodes.append((IndexScan(s.relation, s.index, float(rng.uniform(lo, hi))), s.loop_count))
        root: PlanNode = nodes[0][0]
        for node, loops in nodes[1:]:
            root = NestedLoop(root, node, loops)
        return parse_plan(root, catalog, query_id, self.template_id)


class Partition(NamedTuple):
    train_templates: frozenset
    test_templates: frozenset


class Workload(NamedTuple):
    catalog: Catalog
    templates: list
    queries: list
    partition: Partition


def _make_catalog(spec: WorkloadSpec, rng) -> tuple[Catalog, dict]:
    n_index = spec.index_count
    n_base = spec.relation_count - n_index
    lo, hi = spec.block_range
    sizes = np.exp(rng.uniform(np.log(lo), np.log(hi + 1), size=n_base)).astype(int).clip(lo, hi)
    # the largest base relations get the indexes
    indexed = sorted(np.argsort(-sizes, kind="stable")[:n_index].tolist())
    rels = [RelationMeta(i, f"rel_{i}", RelationKind.BASE, int(sizes[i])) for i in range(n_base)]
    index_of = {}
    for k, base in enumerate(indexed):
        rid = n_base + k
        blocks = int(max(lo, sizes[base] // 4))
        rels.append(RelationMeta(rid, f"idx_{k}_on_rel_{base}", RelationKind.INDEX, blocks))
        index_of[base] = rid
    return Catalog(rels), index_of


def _make_template(tid, spec, index_of, n_base, rng) -> Template:
    k = int(rng.integers(spec.fanout_range[0], spec.fanout_range[1] + 1))
    chosen = sorted(rng.choice(n_base, size=k, replace=False).tolist())
    scans = []
    for j, rel in enumerate(chosen):
        if rel in index_of:
            c = rng.uniform(*spec.selectivity_range)
            rng_lo = max(0.0, c * (1.0 - spec.selectivity_spread))
            rng_hi = min(1.0, c * (1.0 + spec.selectivity_spread))
            loops = 1
            if j > 0 and rng.random() < spec.nested_loop_prob:
                loops = int(rng.integers(spec.loop_range[0], spec.loop_range[1] + 1))
            scans.append(ScanSkeleton(rel, index_of[rel], (float(rng_lo), float(rng_hi)), loops))
        else:
            scans.append(ScanSkeleton(rel))
    return Template(tid, scans)


def generate_workload(spec: WorkloadSpec) -> Workload:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    catalog, index_of = _make_catalog(spec, rng)
    n_base = spec.relation_count - spec.index_count
    templates = [_make_template(t, spec, index_of, n_base, rng) for t in range(spec.template_count)]

    n_test = int(round(spec.test_fraction * spec.template_count))
    if spec.test_fraction > 0 and n_test == 0:
        n_test = 1
    n_test = min(n_test, spec.template_count - 1) if spec.template_count > 1 else 0
    perm = rng.permutation(spec.template_count)
    test = frozenset(int(t) for t in perm[:n_test])
    train = frozenset(int(t) for t in perm[n_test:])

    picks = rng.integers(0, spec.template_count, size=spec.query_count)
    queries = [templates[int(t)].instantiate(q, catalog, rng) for q, t in enumerate(picks)]
    return Workload(catalog, templates, queries, Partition(train, test))


def split_queries(queries, partition: Partition) -> tuple[list, list]:
    train = [q for q in queries if q.template_id in partition.train_templates]
    test = [q for q in queries if q.template_id in partition.test_templates]
    return train, test


@lru_cache(maxsize=4096)
def _block_thresholds(relation_id: int, block_count: int) -> np.ndarray:
    # fixed per-block field; selective(p) in expected mode reads blocks below p
    return np.random.default_rng([relation_id, block_count, 0x5EED]).random(block_count)


def materialize_reads(spec: QuerySpec, catalog: Catalog, rng: Optional[np.random.Generator] = None,
                      mode: str = SAMPLE) -> list:
    """Resolve a probabilistic profile into an ordered list of concrete block reads.

    ``sample`` draws an independent Bernoulli per block from ``rng``.
    ``expected`` needs no rng: each block carries a fixed pseudo-random
    threshold and is read iff the threshold is below the selectivity, so the
    result is reproducible and queries on one relation read nested sets.
    """
    if mode not in (SAMPLE, EXPECTED):
        raise ValidationError(f"unknown read mode {mode!r}")
    if mode == SAMPLE and rng is None:
        raise ValidationError("sample mode needs an rng")
    spec.validate(catalog)
    reads = []
    for rel in catalog.relations:
        desc: AccessDescriptor = spec.descriptor(rel.id)
        n = rel.block_count
        if desc.mode is AccessMode.NONE:
            continue
        if desc.mode is AccessMode.FULL_SCAN or desc.probability >= 1.0:
            idx = range(n)
        elif mode == SAMPLE:
            idx = np.flatnonzero(rng.random(n) < desc.probability).tolist()
        else:
            idx = np.flatnonzero(_block_thresholds(rel.id, n) < desc.probability).tolist()
        reads.extend(BlockRef(rel.id, int(b)) for b in idx)
    return reads
