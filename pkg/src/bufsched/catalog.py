"""Relations, per-query access profiles, and plan-tree conversion.

A *full-resolution matrix* throughout the package is a list of 1-D float
arrays, one per relation in catalog order, where row ``i`` has exactly
``block_count`` entries. Rows are ragged, so a plain list is used rather
than a 2-D array.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Union

import numpy as np

from .errors import CatalogError, ValidationError


class RelationKind(str, Enum):
    BASE = "base"
    INDEX = "index"


class AccessMode(str, Enum):
    NONE = "none"
    FULL_SCAN = "full_scan"
    SELECTIVE = "selective"


@dataclass(frozen=True)
class RelationMeta:
    id: int
    name: str
    kind: RelationKind
    block_count: int

    def __post_init__(self):
        if self.block_count < 1:
            raise ValidationError(f"relation {self.name!r}: block_count must be >= 1")
        object.__setattr__(self, "kind", RelationKind(self.kind))


class Catalog:
    """Ordered relation universe. Row order of every matrix follows ``relations``."""

    def __init__(self, relations: Iterable[RelationMeta]):
        self.relations = list(relations)
        if not self.relations:
            raise ValidationError("catalog must contain at least one relation")
        self._row = {}
        for i, rel in enumerate(self.relations):
            if rel.id in self._row:
                raise ValidationError(f"duplicate relation id {rel.id}")
            self._row[rel.id] = i
        self._by_name = {rel.name: rel.id for rel in self.relations}
        self.offsets = np.concatenate(
            [[0], np.cumsum([r.block_count for r in self.relations])]
        ).astype(np.int64)

    def __len__(self):
        return len(self.relations)

    def __eq__(self, other):
        return isinstance(other, Catalog) and self.relations == other.relations

    def __contains__(self, rel_id):
        return rel_id in self._row

    def row(self, rel_id: int) -> int:
        try:
            return self._row[rel_id]
        except KeyError:
            raise CatalogError(f"unknown relation id {rel_id!r}") from None

    def get(self, rel_id: int) -> RelationMeta:
        return self.relations[self.row(rel_id)]

    def block_count(self, rel_id: int) -> int:
        return self.get(rel_id).block_count

    def resolve(self, ref: Union[int, str]) -> int:
        """Map a relation reference (id or name) to its id."""
        if isinstance(ref, str) and not ref.lstrip("-").isdigit():
            if ref not in self._by_name:
                raise CatalogError(f"unknown relation name {ref!r}")
            return self._by_name[ref]
        rel_id = int(ref)
        self.row(rel_id)
        return rel_id

    @property
    def total_blocks(self) -> int:
        return int(self.offsets[-1])

    def zeros(self) -> list[np.ndarray]:
        return [np.zeros(r.block_count) for r in self.relations]

    def to_records(self) -> list[dict]:
        return [
            {"id": r.id, "name": r.name, "kind": r.kind.value, "block_count": r.block_count}
            for r in self.relations
        ]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "Catalog":
        return cls(
            RelationMeta(int(d["id"]), str(d["name"]), RelationKind(d["kind"]), int(d["block_count"]))
            for d in records
        )


@dataclass(frozen=True)
class AccessDescriptor:
    mode: AccessMode = AccessMode.NONE
    selectivity: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", AccessMode(self.mode))
        if self.mode is AccessMode.SELECTIVE:
            _check_fraction(self.selectivity, "selectivity")

    @property
    def probability(self) -> float:
        if self.mode is AccessMode.FULL_SCAN:
            return 1.0
        if self.mode is AccessMode.NONE:
            return 0.0
        return float(self.selectivity)

    @classmethod
    def full(cls) -> "AccessDescriptor":
        return cls(AccessMode.FULL_SCAN, 1.0)

    @classmethod
    def selective(cls, p: float) -> "AccessDescriptor":
        return cls(AccessMode.SELECTIVE, float(p))


NO_ACCESS = AccessDescriptor()


def union(a: AccessDescriptor, b: AccessDescriptor) -> AccessDescriptor:
    """Combine two reads of the same relation as independent per-block events."""
    if AccessMode.FULL_SCAN in (a.mode, b.mode):
        return AccessDescriptor.full()
    if a.mode is AccessMode.NONE:
        return b
    if b.mode is AccessMode.NONE:
        return a
    p = 1.0 - (1.0 - a.probability) * (1.0 - b.probability)
    return AccessDescriptor.selective(min(1.0, max(0.0, p)))


@dataclass(frozen=True)
class QuerySpec:
    query_id: int
    template_id: int
    profile: dict = field(default_factory=dict)
    plan: Optional["PlanNode"] = field(default=None, compare=False, repr=False)

    def validate(self, catalog: Catalog) -> None:
        for rel_id in self.profile:
            catalog.row(rel_id)

    def descriptor(self, rel_id: int) -> AccessDescriptor:
        return self.profile.get(rel_id, NO_ACCESS)


# -- plan trees ---------------------------------------------------------------


@dataclass(frozen=True)
class SeqScan:
    relation: int


@dataclass(frozen=True)
class IndexScan:
    relation: int
    index: int
    selectivity: float


@dataclass(frozen=True)
class NestedLoop:
    outer: "PlanNode"
    inner: "PlanNode"
    loop_count: int = 1


PlanNode = Union[SeqScan, IndexScan, NestedLoop]


def _check_fraction(x, what):
    if not (isinstance(x, (int, float, np.floating)) and math.isfinite(x) and 0.0 <= x <= 1.0):
        raise ValidationError(f"{what} must lie in [0, 1], got {x!r}")


def _collect(node, catalog, loops, out):
    if isinstance(node, SeqScan):
        rel = catalog.resolve(node.relation)
        out.append((rel, AccessDescriptor.full()))
    elif isinstance(node, IndexScan):
        _check_fraction(node.selectivity, "selectivity")
        rel = catalog.resolve(node.relation)
        idx = catalog.resolve(node.index)
        p = min(1.0, node.selectivity * loops)
        out.append((rel, AccessDescriptor.selective(p)))
        out.append((idx, AccessDescriptor.selective(p)))
    elif isinstance(node, NestedLoop):
        if int(node.loop_count) < 1:
            raise ValidationError(f"loop_count must be >= 1, got {node.loop_count!r}")
        _collect(node.outer, catalog, loops, out)
        _collect(node.inner, catalog, loops * int(node.loop_count), out)
    else:
        raise ValidationError(f"unsupported plan node {node!r}")


def parse_plan(plan: PlanNode, catalog: Catalog, query_id: int = 0, template_id: int = 0) -> QuerySpec:
    """Convert a plan tree into per-relation access descriptors.

    Index scans under the inner side of a nested loop have their selectivity
    scaled by the product of enclosing loop counts, capped at 1. Repeated
    reads of one relation combine by probability union.
    """
    reads: list = []
    _collect(plan, catalog, 1, reads)
    profile: dict = {}
    for rel, desc in reads:
        profile[rel] = union(profile.get(rel, NO_ACCESS), desc)
    # canonical (catalog) key order keeps specs from equal plans identical
    profile = {r.id: profile[r.id] for r in catalog.relations if r.id in profile}
    return QuerySpec(query_id, template_id, profile, plan)


def access_matrix(spec: QuerySpec, catalog: Catalog) -> list[np.ndarray]:
    spec.validate(catalog)
    return [np.full(r.block_count, spec.descriptor(r.id).probability) for r in catalog.relations]


def flatten(matrix: list[np.ndarray]) -> np.ndarray:
    return np.concatenate(matrix) if matrix else np.zeros(0)


# -- documents ----------------------------------------------------------------


def plan_from_dict(d: dict) -> PlanNode:
    kind = d.get("kind")
    if kind == "seq_scan":
        return SeqScan(d["relation"])
    if kind == "index_scan":
        return IndexScan(d["relation"], d["index"], float(d["selectivity"]))
    if kind == "nested_loop":
        children = d.get("children", [])
        if len(children) != 2:
            raise ValidationError("nested_loop needs exactly two children [outer, inner]")
        return NestedLoop(plan_from_dict(children[0]), plan_from_dict(children[1]), int(d.get("loop_count", 1)))
    raise ValidationError(f"unknown plan node kind {kind!r}")


def plan_to_dict(node: PlanNode) -> dict:
    if isinstance(node, SeqScan):
        return {"kind": "seq_scan", "relation": node.relation}
    if isinstance(node, IndexScan):
        return {"kind": "index_scan", "relation": node.relation, "index": node.index,
                "selectivity": node.selectivity}
    return {"kind": "nested_loop", "loop_count": node.loop_count,
            "children": [plan_to_dict(node.outer), plan_to_dict(node.inner)]}


def load_catalog(path) -> Catalog:
    return Catalog.from_records(json.loads(Path(path).read_text()))


def save_catalog(catalog: Catalog, path) -> None:
    Path(path).write_text(json.dumps(catalog.to_records(), indent=2) + "\n")


def load_plan_document(path, catalog: Catalog) -> QuerySpec:
    doc = json.loads(Path(path).read_text())
    return parse_plan(plan_from_dict(doc["root"]), catalog, int(doc["query_id"]), int(doc["template_id"]))


def save_plan_document(path, query_id: int, template_id: int, root: PlanNode) -> None:
    doc = {"query_id": query_id, "template_id": template_id, "root": plan_to_dict(root)}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
