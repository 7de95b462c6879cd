"""Command line entry point: ``python -m bufsched <subcommand>``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .agent import DQNAgent
from .baselines import FCFSScheduler, GreedyScheduler
from .catalog import save_catalog, save_plan_document
from .errors import GuardError, ValidationError
from .harness import (ExperimentConfig, average_hit_ratio, brute_force_oracle, emit_metrics,
                      emit_summary, evaluate_agent, prepare, rows_from, run_baseline,
                      run_experiment, SummaryRow, train_agent)
from .workload import generate_workload

log = logging.getLogger("bufsched")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.workload.seed = args.seed
        cfg.agent.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if getattr(args, "checkpoint_every", None) is not None:
        cfg.checkpoint_every = args.checkpoint_every
    if getattr(args, "schedulers", None):
        cfg.schedulers = tuple(s.strip() for s in args.schedulers.split(",") if s.strip())
    cfg.validate()
    return cfg


def _out(cfg) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_compare(cfg, args):
    res = run_experiment(cfg)
    final = {}
    for row in res["summary"]:
        final[row.scheduler] = row
    for name, row in final.items():
        print(f"{name:8s} avg_hit_ratio={row.avg_hit_ratio:.4f} total_cost={row.total_cost:.0f}")
    return 0


def cmd_train(cfg, args):
    out = _out(cfg)
    prepared = prepare(cfg)
    agent = DQNAgent(prepared.catalog, cfg.width, cfg.agent)
    curve = []

    def checkpoint(done):
        order, stats = evaluate_agent(agent, prepared.catalog, cfg.buffer_blocks,
                                      prepared.eval_queries, prepared.eval_reads)
        rows = rows_from("agent", prepared.eval_queries, order, stats, cfg.hit_cost, cfg.miss_cost)
        curve.append(SummaryRow("agent", done, average_hit_ratio(stats), rows[-1].cum_cost))
        print(f"checkpoint {done}: avg_hit_ratio={curve[-1].avg_hit_ratio:.4f}")

    train_agent(agent, prepared, cfg, checkpoint)
    agent.save(out / "agent.npz")
    emit_summary(curve, out / "summary.csv")
    print(f"saved {out / 'agent.npz'}")
    return 0


def cmd_evaluate(cfg, args):
    out = _out(cfg)
    prepared = prepare(cfg)
    agent = DQNAgent.load(args.agent, prepared.catalog)
    order, stats = evaluate_agent(agent, prepared.catalog, cfg.buffer_blocks,
                                  prepared.eval_queries, prepared.eval_reads)
    rows = rows_from("agent", prepared.eval_queries, order, stats, cfg.hit_cost, cfg.miss_cost)
    emit_metrics(rows, out / "agent.csv")
    print(f"agent avg_hit_ratio={average_hit_ratio(stats):.4f} total_cost={rows[-1].cum_cost:.0f}")
    return 0


def cmd_oracle(cfg, args):
    out = _out(cfg)
    prepared = prepare(cfg)
    queries = prepared.eval_queries[:args.limit]
    reads = prepared.eval_reads[:args.limit]
    cat, cap = prepared.catalog, cfg.buffer_blocks
    order, misses = brute_force_oracle(cap, queries, cat, reads)
    result = {"oracle": {"order": [queries[i].query_id for i in order], "misses": misses}}
    for name, sched in (("fcfs", FCFSScheduler()), ("greedy", GreedyScheduler())):
        o, stats = run_baseline(sched, cat, cap, queries, reads)
        result[name] = {"order": [queries[i].query_id for i in o], "misses": sum(s.misses for s in stats)}
    (out / "oracle.json").write_text(json.dumps(result, indent=2) + "\n")
    for name, r in result.items():
        print(f"{name:8s} misses={r['misses']} order={r['order']}")
    return 0


def cmd_gen_workload(cfg, args):
    out = _out(cfg)
    wl = generate_workload(cfg.workload)
    save_catalog(wl.catalog, out / "catalog.json")
    plans = out / "plans"
    plans.mkdir(exist_ok=True)
    for q in wl.queries:
        save_plan_document(plans / f"query_{q.query_id:05d}.json", q.query_id, q.template_id, q.plan)
    meta = {"workload": cfg.workload.to_dict(),
            "train_templates": sorted(wl.partition.train_templates),
            "test_templates": sorted(wl.partition.test_templates)}
    (out / "workload.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(wl.catalog)} relations and {len(wl.queries)} plan documents to {out}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "oracle": cmd_oracle,
    "gen-workload": cmd_gen_workload,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--seed", type=int, help="overrides workload and agent seeds")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="bufsched", description="Buffer-pool-aware query scheduling experiments")
    sub = p.add_subparsers(dest="command", required=True)
    t = sub.add_parser("train", parents=[common], help="train an agent and save a checkpoint")
    t.add_argument("--checkpoint-every", type=int, metavar="K")
    e = sub.add_parser("evaluate", parents=[common], help="evaluate a saved agent")
    e.add_argument("--agent", required=True, metavar="PATH", help="agent checkpoint (.npz)")
    c = sub.add_parser("compare", parents=[common], help="run schedulers head to head")
    c.add_argument("--checkpoint-every", type=int, metavar="K")
    c.add_argument("--schedulers", metavar="LIST", help="comma separated: fcfs,greedy,agent")
    o = sub.add_parser("oracle", parents=[common], help="brute-force optimal order for a short queue")
    o.add_argument("--limit", type=int, default=7, help="number of queued queries (<= 9)")
    sub.add_parser("gen-workload", parents=[common], help="export catalog and plan documents")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ValidationError, GuardError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
