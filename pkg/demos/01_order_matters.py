"""
Why execution order matters to a buffer pool
============================================

Three queries over five one-block relations, with a pool that holds two
blocks. Running them as they arrived thrashes the pool. Running the query
that shares a block with the resident set next saves one disk read.
"""
from bufsched import (AccessDescriptor, BufferPool, Catalog, FCFSScheduler, GreedyScheduler, QuerySpec,
                      RelationMeta, brute_force_oracle, materialize_reads, run_baseline)

cat = Catalog([RelationMeta(i, f"b{i}", "base", 1) for i in range(1, 6)])
full = AccessDescriptor.full()
queries = [
    QuerySpec(1, 1, {1: full, 2: full}),
    QuerySpec(2, 2, {4: full, 5: full}),
    QuerySpec(3, 3, {2: full, 3: full}),
]
reads = [materialize_reads(q, cat, mode="expected") for q in queries]

# arrival order: every block is a miss
order, stats = run_baseline(FCFSScheduler(), cat, 2, queries, reads)
print("fcfs   ", [queries[i].query_id for i in order], "misses:", sum(s.misses for s in stats))

# greedy looks at what is resident and picks the query with most overlap
order, stats = run_baseline(GreedyScheduler(), cat, 2, queries, reads)
print("greedy ", [queries[i].query_id for i in order], "misses:", sum(s.misses for s in stats))

# exhaustive search confirms 5 is the best possible
order, misses = brute_force_oracle(2, queries, cat, reads)
print("oracle ", [queries[i].query_id for i in order], "misses:", misses)

# the pool itself is a plain LRU over (relation, block) pairs
pool = BufferPool(2, cat)
for r in reads[0] + reads[2]:
    print(r, pool.access_block(r))
