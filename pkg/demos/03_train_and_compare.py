"""
Training the scheduling agent against the baselines
===================================================

A reduced version of the default comparison: 120 queries, two training
passes, a checkpoint every 60 decisions. The agent is evaluated greedily
(no exploration) at each checkpoint; the CSVs land in ./demo_results.
"""
from bufsched import AgentConfig, ExperimentConfig, WorkloadSpec, run_experiment

cfg = ExperimentConfig(
    workload=WorkloadSpec(query_count=120, seed=2),
    agent=AgentConfig(seed=2),
    epochs=2,
    checkpoint_every=60,
    out_dir="demo_results",
)
res = run_experiment(cfg)

print("checkpoint  avg hit ratio")
for row in res["summary"]:
    if row.scheduler == "agent":
        print(f"{row.checkpoint:10d}  {row.avg_hit_ratio:.4f}")

print()
for name in cfg.schedulers:
    rows = res["metrics"][name]
    avg = sum(r.hit_ratio for r in rows) / len(rows)
    print(f"{name:7s} avg hit ratio {avg:.4f}  total cost {rows[-1].cum_cost:.0f}")
print("\nwrote", ", ".join(str(p) for p in res["paths"].values()))
