"""
Synthetic workloads and the fixed-width features the agent sees
===============================================================

A seeded generator builds a catalog, join templates and query instances.
Each queued query becomes a relation x block matrix of read probabilities;
the pool becomes a 0/1 occupancy matrix of the same shape. Both are squeezed
to a fixed width by window averaging so the network input size does not
depend on relation sizes.
"""
import numpy as np

from bufsched import (BufferPool, WorkloadSpec, access_matrix, encode_buffer_state, encode_query_action,
                      generate_workload, materialize_reads, snapshot)

wl = generate_workload(WorkloadSpec(query_count=20, seed=4))
for rel in wl.catalog.relations:
    print(f"{rel.name:18s} {rel.kind.value:5s} {rel.block_count:4d} blocks")

q = wl.queries[0]
print("\nquery", q.query_id, "template", q.template_id)
for rel_id, desc in q.profile.items():
    print(f"  relation {rel_id}: {desc.mode.value} p={desc.probability:.3f}")

# deterministic reads: a fixed per-block threshold field, so reruns agree
reads = materialize_reads(q, wl.catalog, mode="expected")
print("block reads:", len(reads))

pool = BufferPool(256, wl.catalog)
pool.execute_query(reads)
state = encode_buffer_state(snapshot(pool, wl.catalog), 32)
action = encode_query_action(access_matrix(wl.queries[1], wl.catalog), 32)
print("\nstate features", state.shape, "occupied fraction per relation:")
print(np.round(state.mean(axis=1), 3))
print("action features", action.shape, "row means:")
print(np.round(action.mean(axis=1), 3))
