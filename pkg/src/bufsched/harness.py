"""Experiment runner: head-to-head scheduler comparison, checkpointed agent
training, the brute-force ordering oracle, and CSV metrics."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .agent import EVALUATE, TRAIN, AgentConfig, DQNAgent, schedule_queue
from .baselines import FCFSScheduler, GreedyScheduler
from .bufferpool import BufferPool, hit_ratio_reward
from .catalog import Catalog, load_catalog, load_plan_document
from .encoding import DEFAULT_WIDTH
from .errors import GuardError, ValidationError
from .workload import EXPECTED, SAMPLE, WorkloadSpec, generate_workload, materialize_reads, split_queries

log = logging.getLogger(__name__)

METRICS_HEADER = ["scheduler", "step", "query_id", "hits", "misses", "hit_ratio", "cum_cost"]
SUMMARY_HEADER = ["scheduler", "checkpoint", "avg_hit_ratio", "total_cost"]
SCHEDULERS = ("fcfs", "greedy", "agent")
ORACLE_LIMIT = 9


@dataclass
class MetricsRow:
    scheduler: str
    step: int
    query_id: int
    hits: int
    misses: int
    hit_ratio: float
    cum_cost: float


@dataclass
class SummaryRow:
    scheduler: str
    checkpoint: int
    avg_hit_ratio: float
    total_cost: float


@dataclass
class ExperimentConfig:
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    buffer_blocks: int = 256
    width: int = DEFAULT_WIDTH
    agent: AgentConfig = field(default_factory=AgentConfig)
    schedulers: tuple = SCHEDULERS
    epochs: int = 3
    checkpoint_every: int = 120
    # train on training-template queries and evaluate on held-out ones
    split: bool = False
    read_mode: str = EXPECTED
    hit_cost: float = 1.0
    miss_cost: float = 100.0
    out_dir: str = "results"
    seed: Optional[int] = None
    # optional exported workload to use instead of generating one
    catalog_path: Optional[str] = None
    plans_dir: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.workload, dict):
            self.workload = WorkloadSpec.from_dict(self.workload)
        if isinstance(self.agent, dict):
            self.agent = AgentConfig.from_dict(self.agent)
        if isinstance(self.schedulers, str):
            self.schedulers = tuple(s.strip() for s in self.schedulers.split(",") if s.strip())
        self.schedulers = tuple(self.schedulers)
        if self.seed is not None:
            self.workload.seed = int(self.seed)
            self.agent.seed = int(self.seed)

    def validate(self) -> None:
        if not self.schedulers:
            raise ValidationError("at least one scheduler is required")
        unknown = set(self.schedulers) - set(SCHEDULERS)
        if unknown:
            raise ValidationError(f"unknown schedulers {sorted(unknown)}")
        if self.checkpoint_every < 1:
            raise ValidationError("checkpoint_every must be >= 1")
        if self.buffer_blocks < 1 or self.width < 1 or self.epochs < 0:
            raise ValidationError("buffer_blocks and width must be >= 1, epochs >= 0")
        if self.read_mode not in (EXPECTED, SAMPLE):
            raise ValidationError(f"unknown read_mode {self.read_mode!r}")
        if (self.catalog_path is None) != (self.plans_dir is None):
            raise ValidationError("catalog_path and plans_dir must be given together")
        self.workload.validate()
        self.agent.validate()

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["workload"] = self.workload.to_dict()
        d["agent"] = self.agent.to_dict()
        d["schedulers"] = list(self.schedulers)
        return d


# -- workload preparation -------------------------------------------------------


@dataclass
class PreparedWorkload:
    catalog: Catalog
    train_queries: list
    eval_queries: list
    train_reads: list
    eval_reads: list


def load_exported_queries(catalog_path, plans_dir) -> tuple[Catalog, list]:
    catalog = load_catalog(catalog_path)
    files = sorted(Path(plans_dir).glob("*.json"))
    queries = [load_plan_document(f, catalog) for f in files]
    queries.sort(key=lambda q: q.query_id)
    return catalog, queries


def prepare(cfg: ExperimentConfig) -> PreparedWorkload:
    """Build the workload and materialize every query's reads exactly once."""
    if cfg.catalog_path is not None:
        catalog, queries = load_exported_queries(cfg.catalog_path, cfg.plans_dir)
        train_q, eval_q = queries, queries
    else:
        wl = generate_workload(cfg.workload)
        catalog = wl.catalog
        if cfg.split:
            train_q, eval_q = split_queries(wl.queries, wl.partition)
        else:
            train_q, eval_q = wl.queries, wl.queries
    rng = np.random.default_rng([cfg.workload.seed, 0xB10C])
    cache: dict = {}

    def reads_for(q):
        if q.query_id not in cache:
            cache[q.query_id] = materialize_reads(q, catalog, rng, mode=cfg.read_mode)
        return cache[q.query_id]

    train_r = [reads_for(q) for q in train_q]
    eval_r = [reads_for(q) for q in eval_q]
    return PreparedWorkload(catalog, train_q, eval_q, train_r, eval_r)


# -- running schedulers -----------------------------------------------------------


def cost_of(hits: int, misses: int, hit_cost: float = 1.0, miss_cost: float = 100.0) -> float:
    return hits * hit_cost + misses * miss_cost


def rows_from(name: str, queries, order, stats, hit_cost=1.0, miss_cost=100.0) -> list:
    rows, cum = [], 0.0
    for step, (q, st) in enumerate(zip(order, stats)):
        cum += cost_of(st.hits, st.misses, hit_cost, miss_cost)
        rows.append(MetricsRow(name, step, queries[q].query_id, st.hits, st.misses,
                               hit_ratio_reward(st), cum))
    return rows


def run_baseline(scheduler, catalog: Catalog, capacity: int, queries, reads):
    """Execute ``queries`` from a cold pool in the order ``scheduler`` picks.

    Returns ``(order, stats)`` with ``order`` as positions in ``queries``.
    """
    pool = BufferPool(capacity, catalog)
    scheduler.reset(queries, catalog)
    remaining = list(range(len(queries)))
    order, stats = [], []
    while remaining:
        q = remaining.pop(scheduler.pick(pool, remaining))
        order.append(q)
        stats.append(pool.execute_query(reads[q]))
    return order, stats


def run_order(catalog: Catalog, capacity: int, reads, order) -> list:
    pool = BufferPool(capacity, catalog)
    return [pool.execute_query(reads[q]) for q in order]


def evaluate_agent(agent: DQNAgent, catalog, capacity, queries, reads):
    res = schedule_queue(agent, BufferPool(capacity, catalog), queries, EVALUATE, reads)
    return res.order, res.stats


def average_hit_ratio(stats) -> float:
    return float(np.mean([hit_ratio_reward(s) for s in stats])) if stats else 0.0


def train_agent(agent: DQNAgent, prepared: PreparedWorkload, cfg: ExperimentConfig, on_checkpoint=None) -> list:
    """Train for ``cfg.epochs`` passes over the training queue, each from a cold pool.

    ``on_checkpoint(decisions)`` runs before training, after every
    ``cfg.checkpoint_every`` training decisions, and at the end. Returns the
    checkpoint marks.
    """
    queue, reads = prepared.train_queries, prepared.train_reads
    total = cfg.epochs * len(queue)
    if agent.config.epsilon_decay_steps is None:
        agent.config.epsilon_decay_steps = max(1, total // 2)
    marks = sorted(set(range(0, total, cfg.checkpoint_every)) | {total})
    start = agent.decisions
    if on_checkpoint:
        on_checkpoint(0)

    def hook(decisions):
        done = decisions - start
        if done > 0 and done % cfg.checkpoint_every == 0 or done == total:
            if on_checkpoint:
                on_checkpoint(done)

    for _ in range(cfg.epochs):
        schedule_queue(agent, BufferPool(cfg.buffer_blocks, prepared.catalog), queue, TRAIN, reads,
                       on_decision=hook)
    return marks


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Compare the configured schedulers on one workload and write CSVs.

    Writes ``<scheduler>.csv`` (one row per decision of the final evaluation)
    and ``summary.csv`` (per scheduler, one row per training checkpoint).
    Baselines do not train, so their summary rows repeat one value. Returns
    ``{"metrics": {name: rows}, "summary": rows, "paths": {...}}``.
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prepared = prepare(cfg)
    cat, cap = prepared.catalog, cfg.buffer_blocks
    queries, reads = prepared.eval_queries, prepared.eval_reads
    costs = dict(hit_cost=cfg.hit_cost, miss_cost=cfg.miss_cost)

    metrics: dict = {}
    agent_curve = []
    if "agent" in cfg.schedulers:
        agent = DQNAgent(cat, cfg.width, cfg.agent)

        def checkpoint(done):
            order, stats = evaluate_agent(agent, cat, cap, queries, reads)
            rows = rows_from("agent", queries, order, stats, **costs)
            agent_curve.append((done, rows))
            log.info("checkpoint %d: avg hit ratio %.4f", done, average_hit_ratio(stats))

        marks = train_agent(agent, prepared, cfg, checkpoint)
        metrics["agent"] = agent_curve[-1][1]
    else:
        total = cfg.epochs * len(prepared.train_queries)
        marks = sorted(set(range(0, total, cfg.checkpoint_every)) | {total})

    for name, sched in (("fcfs", FCFSScheduler()), ("greedy", GreedyScheduler())):
        if name in cfg.schedulers:
            order, stats = run_baseline(sched, cat, cap, queries, reads)
            metrics[name] = rows_from(name, queries, order, stats, **costs)

    summary = []
    for name in cfg.schedulers:
        if name == "agent":
            curve = agent_curve
        else:
            curve = [(m, metrics[name]) for m in marks]
        for done, rows in curve:
            avg = float(np.mean([r.hit_ratio for r in rows])) if rows else 0.0
            summary.append(SummaryRow(name, done, avg, rows[-1].cum_cost if rows else 0.0))

    paths = {}
    for name in cfg.schedulers:
        paths[name] = out / f"{name}.csv"
        emit_metrics(metrics[name], paths[name])
    paths["summary"] = out / "summary.csv"
    emit_summary(summary, paths["summary"])
    return {"metrics": metrics, "summary": summary, "paths": paths}


# -- oracle -------------------------------------------------------------------------


def brute_force_oracle(capacity: int, queries, catalog: Catalog, reads=None):
    """Exhaustive search for the execution order with the fewest total misses.

    Depth-first over permutations in lexicographic order with pruning on the
    running miss count, so the first optimum found (the lexicographically
    smallest) is the one kept. Returns ``(order, misses)`` with ``order`` as
    positions in ``queries``.
    """
    n = len(queries)
    if n > ORACLE_LIMIT:
        raise GuardError(f"oracle refuses queues longer than {ORACLE_LIMIT} (got {n})")
    if n == 0:
        return [], 0
    if reads is None:
        reads = [materialize_reads(q, catalog, mode=EXPECTED) for q in queries]
    best = [math.inf, None]

    def dfs(pool, prefix, remaining, misses):
        if misses >= best[0]:
            return
        if not remaining:
            best[0], best[1] = misses, list(prefix)
            return
        for i, q in enumerate(remaining):
            p = pool.copy() if len(remaining) > 1 else pool
            st = p.execute_query(reads[q])
            prefix.append(q)
            dfs(p, prefix, remaining[:i] + remaining[i + 1:], misses + st.misses)
            prefix.pop()
            if len(remaining) == 1:
                break

    dfs(BufferPool(capacity), [], list(range(n)), 0)
    return best[1], int(best[0])


# -- CSV ----------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


def emit_metrics(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in METRICS_HEADER])
    return path


def emit_summary(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        for r in rows:
            w.writerow([_fmt(getattr(r, k)) for k in SUMMARY_HEADER])
    return path


def read_metrics(path) -> list:
    with Path(path).open(newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != METRICS_HEADER:
            raise ValidationError(f"unexpected metrics header {rd.fieldnames}")
        return [MetricsRow(d["scheduler"], int(d["step"]), int(d["query_id"]), int(d["hits"]),
                           int(d["misses"]), float(d["hit_ratio"]), float(d["cum_cost"])) for d in rd]


def read_summary(path) -> list:
    with Path(path).open(newline="") as fh:
        return [SummaryRow(d["scheduler"], int(d["checkpoint"]), float(d["avg_hit_ratio"]),
                           float(d["total_cost"])) for d in csv.DictReader(fh)]
