"""Deep Q-learning query scheduler.

State is the downsampled buffer occupancy, an action is the downsampled
access-probability matrix of one queued query, and the reward is the hit
ratio of the query once executed. The Q-network scores ``(state, action)``
pairs; the next query is the highest scoring one.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .bufferpool import BufferPool, ExecutionStats, hit_ratio_reward
from .catalog import Catalog, access_matrix, flatten
from .encoding import DEFAULT_WIDTH, Downsampler
from .errors import ValidationError
from .neuralnet import (MLP, AdamState, forward_split, init_network, load_checkpoint,
                        save_checkpoint, train_batch)
from .workload import EXPECTED, materialize_reads

TRAIN = "train"
EVALUATE = "evaluate"


@dataclass
class AgentConfig:
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # None: the caller sets it (harness uses half the planned training decisions)
    epsilon_decay_steps: Optional[int] = None
    replay_capacity: int = 10_000
    batch_size: int = 32
    min_replay_before_training: int = 64
    # 0 disables the target network (targets come from the online network)
    target_sync_period: int = 500
    # False trains on the newest transition only
    use_replay: bool = True
    updates_per_step: int = 1
    learning_rate: float = 1e-3
    hidden: tuple = (128, 128)
    seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValidationError(f"gamma must lie in [0, 1], got {self.gamma}")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.replay_capacity < 1 or self.batch_size < 1 or self.updates_per_step < 1:
            raise ValidationError("replay_capacity, batch_size and updates_per_step must be >= 1")
        if self.target_sync_period < 0 or self.min_replay_before_training < 0:
            raise ValidationError("target_sync_period and min_replay_before_training must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "AgentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        if "hidden" in known:
            known["hidden"] = tuple(known["hidden"])
        return cls(**known)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass(eq=False)
class Transition:
    """One scheduling decision.

    Candidate actions for the next state are held as row indices into a
    shared per-episode action table so a replay of thousands of transitions
    over a long queue stays small.
    """

    state_features: np.ndarray
    action_features: np.ndarray
    reward: float
    next_state_features: np.ndarray
    candidate_table: Optional[np.ndarray] = None
    candidate_rows: Optional[np.ndarray] = None
    terminal: bool = field(init=False)
    _target_cache: tuple = field(default=(-1, 0.0), init=False, repr=False)

    def __post_init__(self):
        if self.candidate_rows is None and self.candidate_table is not None:
            self.candidate_rows = np.arange(len(self.candidate_table))
        n = 0 if self.candidate_rows is None else len(self.candidate_rows)
        self.terminal = n == 0

    @classmethod
    def from_candidates(cls, state, action, reward, next_state, candidates) -> "Transition":
        cands = None if candidates is None or len(candidates) == 0 else np.asarray(candidates, dtype=np.float64)
        return cls(np.asarray(state, dtype=np.float64), np.asarray(action, dtype=np.float64),
                   float(reward), np.asarray(next_state, dtype=np.float64), cands)

    @property
    def next_candidate_actions(self) -> np.ndarray:
        if self.terminal:
            return np.zeros((0, len(self.action_features)))
        return self.candidate_table[self.candidate_rows]


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest is overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValidationError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self._items: list = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        # oldest first
        return iter(self._items[self._next:] + self._items[:self._next])

    def push(self, tr: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(tr)
        else:
            self._items[self._next] = tr
            self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        idx = rng.integers(0, len(self._items), size=batch_size)
        return [self._items[i] for i in idx]


def select_action(net: MLP, state, queue, epsilon: float, rng: Optional[np.random.Generator]) -> int:
    """Epsilon-greedy choice over queued action matrices; ties go to the lowest index."""
    n = len(queue)
    if n == 0:
        raise ValidationError("cannot select from an empty queue")
    if n == 1:
        return 0
    if epsilon > 0.0:
        if rng is None:
            raise ValidationError("epsilon > 0 needs an rng")
        if rng.random() < epsilon:
            return int(rng.integers(n))
    actions = np.asarray(queue, dtype=np.float64).reshape(n, -1)
    q = forward_split(net, np.asarray(state, dtype=np.float64).ravel(), actions)
    return int(np.argmax(q))


def max_next_q(tr: Transition, net: MLP) -> float:
    if tr.terminal:
        return 0.0
    return float(np.max(forward_split(net, tr.next_state_features, tr.next_candidate_actions)))


def bellman_target(tr: Transition, gamma: float, target_net: MLP) -> float:
    """Reward plus discounted best next-state value; just the reward when terminal."""
    if tr.terminal or gamma == 0.0:
        return float(tr.reward)
    return float(tr.reward) + gamma * max_next_q(tr, target_net)


class DQNAgent:
    def __init__(self, catalog: Catalog, width: int = DEFAULT_WIDTH, config: Optional[AgentConfig] = None):
        self.config = config or AgentConfig()
        self.config.validate()
        self.catalog = catalog
        self.width = int(width)
        self.encoder = Downsampler(catalog, self.width)
        self.feature_dim = len(catalog) * self.width
        self.net = init_network(2 * self.feature_dim, seed=self.config.seed, hidden=self.config.hidden)
        self.adam = AdamState.for_network(self.net, learning_rate=self.config.learning_rate)
        self.target_net = self.net.copy()
        self.target_version = 0
        self.replay = ReplayBuffer(self.config.replay_capacity)
        self.rng = np.random.default_rng(self.config.seed)
        self.decisions = 0
        self.learn_steps = 0

    def epsilon(self) -> float:
        c = self.config
        steps = c.epsilon_decay_steps
        if not steps:
            return c.epsilon_end
        frac = min(1.0, self.decisions / steps)
        return c.epsilon_start + frac * (c.epsilon_end - c.epsilon_start)

    def encode_state(self, pool: BufferPool) -> np.ndarray:
        if pool.catalog is None:
            raise ValidationError("agent scheduling needs a pool constructed with the catalog")
        return self.encoder.encode(pool.snapshot_flat()).ravel()

    def encode_actions(self, queue) -> np.ndarray:
        if not queue:
            return np.zeros((0, self.feature_dim))
        return np.stack([self.encoder.encode(flatten(access_matrix(q, self.catalog))).ravel() for q in queue])

    def _bootstrap_net(self) -> MLP:
        return self.target_net if self.config.target_sync_period > 0 else self.net

    def _target(self, tr: Transition) -> float:
        gamma = self.config.gamma
        if tr.terminal or gamma == 0.0:
            return float(tr.reward)
        if self.config.target_sync_period > 0:
            # the target network is frozen between syncs, so its max is cacheable
            version, value = tr._target_cache
            if version != self.target_version:
                value = max_next_q(tr, self.target_net)
                tr._target_cache = (self.target_version, value)
            return float(tr.reward) + gamma * value
        return bellman_target(tr, gamma, self.net)

    def sync_target(self) -> None:
        self.target_net.load_from(self.net)
        self.target_version += 1

    def train_on(self, batch: list) -> float:
        X = np.stack([np.concatenate([t.state_features, t.action_features]) for t in batch])
        y = np.array([self._target(t) for t in batch])
        return train_batch(self.net, self.adam, (X, y))

    def state_dict(self) -> dict:
        return {"config": self.config.to_dict(), "width": self.width, "decisions": self.decisions,
                "learn_steps": self.learn_steps, "target_version": self.target_version,
                "rng": self.rng.bit_generator.state}

    def save(self, path) -> None:
        """Write network, optimizer, target network and schedule position (replay is not saved)."""
        target = {f"target_{i}": p for i, p in enumerate(self.target_net.params())}
        save_checkpoint(path, self.net, self.adam, agent_state=json.dumps(self.state_dict()), **target)

    @classmethod
    def load(cls, path, catalog: Catalog) -> "DQNAgent":
        net, adam, extra = load_checkpoint(path)
        st = json.loads(str(extra["agent_state"]))
        agent = cls(catalog, st["width"], AgentConfig.from_dict(st["config"]))
        if net.layer_dims != agent.net.layer_dims:
            raise ValidationError("checkpoint network does not match catalog/width")
        agent.net = net
        agent.adam = adam
        agent.target_net = net.copy()
        for i, p in enumerate(agent.target_net.params()):
            p[...] = extra[f"target_{i}"]
        agent.decisions = st["decisions"]
        agent.learn_steps = st["learn_steps"]
        agent.target_version = st["target_version"]
        agent.rng.bit_generator.state = st["rng"]
        return agent


def observe_and_learn(agent: DQNAgent, tr: Transition) -> Optional[float]:
    """Store ``tr``; once the replay is warm, take gradient steps toward Bellman targets."""
    cfg = agent.config
    agent.replay.push(tr)
    agent.learn_steps += 1
    loss = None
    if len(agent.replay) >= max(1, cfg.min_replay_before_training):
        for _ in range(cfg.updates_per_step):
            if cfg.use_replay:
                batch = agent.replay.sample(cfg.batch_size, agent.rng)
            else:
                batch = [tr]
            loss = agent.train_on(batch)
    if cfg.target_sync_period > 0 and agent.learn_steps % cfg.target_sync_period == 0:
        agent.sync_target()
    return loss


@dataclass
class ScheduleResult:
    order: list
    stats: list
    rewards: list
    losses: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.order, self.stats, self.rewards))


def schedule_queue(agent: DQNAgent, pool: BufferPool, queue, mode: str = EVALUATE,
                   reads=None, on_decision=None) -> ScheduleResult:
    """Run the whole queue through ``pool`` in the order the agent picks.

    ``reads`` optionally supplies pre-materialized block reads per query
    (same order as ``queue``); otherwise reads are resolved in expected mode.
    ``order`` holds positions in ``queue``. In train mode ``on_decision`` is
    called with the agent's decision count after each learning step.
    """
    if mode not in (TRAIN, EVALUATE):
        raise ValidationError(f"unknown mode {mode!r}")
    if len(queue) == 0:
        raise ValidationError("cannot schedule an empty queue")
    for q in queue:
        q.validate(agent.catalog)
    if reads is None:
        reads = [materialize_reads(q, agent.catalog, mode=EXPECTED) for q in queue]
    actions = agent.encode_actions(queue)
    remaining = list(range(len(queue)))
    state = agent.encode_state(pool)
    out = ScheduleResult([], [], [])
    training = mode == TRAIN
    while remaining:
        eps = agent.epsilon() if training else 0.0
        k = select_action(agent.net, state, actions[remaining], eps, agent.rng)
        q = remaining.pop(k)
        stats: ExecutionStats = pool.execute_query(reads[q])
        reward = hit_ratio_reward(stats)
        next_state = agent.encode_state(pool)
        out.order.append(q)
        out.stats.append(stats)
        out.rewards.append(reward)
        if training:
            tr = Transition(state, actions[q], reward, next_state,
                            actions if remaining else None,
                            np.array(remaining, dtype=np.int64) if remaining else None)
            loss = observe_and_learn(agent, tr)
            if loss is not None:
                out.losses.append(loss)
            agent.decisions += 1
            if on_decision is not None:
                on_decision(agent.decisions)
        state = next_state
    return out


class TabularQ:
    """Lookup-table Q-function updated with the same Bellman target as the network agent."""

    def __init__(self, n_states: int, n_actions: int, alpha: float = 0.5, gamma: float = 0.9):
        self.q = np.zeros((n_states, n_actions))
        self.alpha = alpha
        self.gamma = gamma

    def update(self, s: int, a: int, reward: float, s_next: Optional[int], next_actions=None) -> float:
        if s_next is None:
            target = reward
        else:
            acts = range(self.q.shape[1]) if next_actions is None else next_actions
            target = reward + self.gamma * max(self.q[s_next, b] for b in acts)
        self.q[s, a] += self.alpha * (target - self.q[s, a])
        return self.q[s, a]
