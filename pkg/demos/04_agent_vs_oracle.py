"""
How close does a trained agent get to the best possible order?
==============================================================

On a seven-query queue the oracle can enumerate every order. We train the
agent on that one queue for a while and compare total misses.
"""
from bufsched import (AgentConfig, BufferPool, DQNAgent, FCFSScheduler, GreedyScheduler, WorkloadSpec,
                      brute_force_oracle, generate_workload, materialize_reads, run_baseline, schedule_queue)

cap, width, episodes = 32, 8, 150
wl = generate_workload(WorkloadSpec(relation_count=6, block_range=(8, 32), template_count=5,
                                    fanout_range=(1, 2), query_count=7, test_fraction=0.0, seed=1002))
reads = [materialize_reads(q, wl.catalog, mode="expected") for q in wl.queries]

order, best = brute_force_oracle(cap, wl.queries, wl.catalog, reads)
print("oracle ", order, best)
for sched in (FCFSScheduler(), GreedyScheduler()):
    o, stats = run_baseline(sched, wl.catalog, cap, wl.queries, reads)
    print(f"{sched.name:7s}", o, sum(s.misses for s in stats))

agent = DQNAgent(wl.catalog, width, AgentConfig(epsilon_decay_steps=episodes * 7 // 2,
                                                 min_replay_before_training=32, target_sync_period=100))
for ep in range(episodes):
    schedule_queue(agent, BufferPool(cap, wl.catalog), wl.queries, "train", reads)
    if ep % 50 == 49:
        res = schedule_queue(agent, BufferPool(cap, wl.catalog), wl.queries, "evaluate", reads)
        print(f"agent after {ep + 1:3d} episodes", res.order, sum(s.misses for s in res.stats))
