import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bufsched.catalog import AccessDescriptor, AccessMode, Catalog, QuerySpec, RelationMeta, parse_plan
from bufsched.errors import ValidationError
from bufsched.workload import (EXPECTED, SAMPLE, WorkloadSpec, generate_workload, materialize_reads,
                               split_queries)


def test_same_seed_same_workload():
    a, b = generate_workload(WorkloadSpec(seed=11)), generate_workload(WorkloadSpec(seed=11))
    assert a.catalog == b.catalog
    assert a.queries == b.queries
    assert a.partition == b.partition
    assert [t.scans for t in a.templates] == [t.scans for t in b.templates]
    assert a.queries != generate_workload(WorkloadSpec(seed=12)).queries


def test_defaults_and_counts():
    wl = generate_workload(WorkloadSpec(seed=0))
    assert len(wl.catalog) == 12
    assert sum(r.kind.value == "index" for r in wl.catalog.relations) == 4
    assert all(64 <= r.block_count <= 512 for r in wl.catalog.relations)
    assert len(wl.templates) == 40
    assert len(wl.queries) == 400
    assert len(wl.partition.test_templates) == 8
    assert not wl.partition.test_templates & wl.partition.train_templates


def test_impossible_spec():
    with pytest.raises(ValidationError):
        generate_workload(WorkloadSpec(relation_count=3, fanout_range=(1, 5)))
    with pytest.raises(ValidationError):
        generate_workload(WorkloadSpec(block_range=(10, 5)))
    with pytest.raises(ValidationError):
        generate_workload(WorkloadSpec(test_fraction=1.5))


specs = st.builds(
    WorkloadSpec,
    relation_count=st.integers(3, 10),
    block_range=st.tuples(st.integers(1, 20), st.integers(20, 60)),
    index_ratio=st.floats(0.0, 0.3),  # keeps index count <= base count and fan-out feasible
    template_count=st.integers(1, 10),
    fanout_range=st.just((1, 1)) | st.just((1, 2)),
    selectivity_range=st.tuples(st.floats(0.0, 0.3), st.floats(0.3, 1.0)),
    query_count=st.integers(0, 40),
    test_fraction=st.floats(0.0, 0.5),
    seed=st.integers(0, 2**31),
)


@settings(max_examples=60, deadline=None)
@given(specs)
def test_instances_respect_template_ranges(spec):
    wl = generate_workload(spec)
    assert len(wl.queries) == spec.query_count
    by_id = {t.template_id: t for t in wl.templates}
    for q in wl.queries:
        prof = by_id[q.template_id].profile
        assert set(q.profile) == set(prof)
        for rel, desc in q.profile.items():
            mode, lo, hi = prof[rel]
            assert desc.mode is mode
            assert lo - 1e-12 <= desc.probability <= hi + 1e-12
        # exported plan re-parses to the same spec
        assert parse_plan(q.plan, wl.catalog, q.query_id, q.template_id) == q
    train, test = split_queries(wl.queries, wl.partition)
    assert len(train) + len(test) == len(wl.queries)
    assert not {q.template_id for q in test} & wl.partition.train_templates


def _cat(n):
    return Catalog([RelationMeta(0, "R", "base", n)])


def test_full_scan_reads_everything_in_order():
    q = QuerySpec(0, 0, {0: AccessDescriptor.full()})
    reads = materialize_reads(q, _cat(4), np.random.default_rng(0))
    assert [b.block_index for b in reads] == [0, 1, 2, 3]


@pytest.mark.parametrize("mode", [SAMPLE, EXPECTED])
def test_selectivity_one_reads_everything(mode):
    q = QuerySpec(0, 0, {0: AccessDescriptor.selective(1.0)})
    assert len(materialize_reads(q, _cat(7), np.random.default_rng(0), mode)) == 7


@pytest.mark.parametrize("seed", range(5))
def test_bernoulli_count_in_binomial_interval(seed):
    # Binomial(10000, 0.5): sd = 50, so [4700, 5300] is +/- 6 sd
    q = QuerySpec(0, 0, {0: AccessDescriptor.selective(0.5)})
    n = len(materialize_reads(q, _cat(10_000), np.random.default_rng(seed)))
    assert 4700 <= n <= 5300


def test_expected_mode_is_reproducible_and_nested():
    cat = _cat(500)
    lo = materialize_reads(QuerySpec(0, 0, {0: AccessDescriptor.selective(0.2)}), cat, mode=EXPECTED)
    hi = materialize_reads(QuerySpec(1, 0, {0: AccessDescriptor.selective(0.4)}), cat, mode=EXPECTED)
    assert lo == materialize_reads(QuerySpec(0, 0, {0: AccessDescriptor.selective(0.2)}), cat, mode=EXPECTED)
    assert set(lo) <= set(hi)
    assert 60 <= len(lo) <= 140


def test_mode_validation():
    q = QuerySpec(0, 0, {0: AccessDescriptor.selective(0.2)})
    with pytest.raises(ValidationError):
        materialize_reads(q, _cat(4), None, SAMPLE)
    with pytest.raises(ValidationError):
        materialize_reads(q, _cat(4), np.random.default_rng(0), "bogus")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([SAMPLE, EXPECTED]))
def test_reads_sorted_unique_and_deterministic(seed, mode):
    wl = generate_workload(WorkloadSpec(query_count=5, seed=seed))
    order = {r.id: i for i, r in enumerate(wl.catalog.relations)}
    for q in wl.queries:
        a = materialize_reads(q, wl.catalog, np.random.default_rng(seed), mode)
        b = materialize_reads(q, wl.catalog, np.random.default_rng(seed), mode)
        assert a == b
        keys = [(order[r], i) for r, i in a]
        assert keys == sorted(set(keys))
