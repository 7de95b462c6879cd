"""Buffer-pool-aware query scheduling: LRU simulation, bitmap encodings,
a deep Q-learning scheduler, FCFS/greedy baselines and an experiment harness."""

from .agent import AgentConfig, DQNAgent, ReplayBuffer, TabularQ, Transition, bellman_target, \
    observe_and_learn, schedule_queue, select_action
from .baselines import FCFSScheduler, GreedyScheduler, fcfs_next, greedy_next, greedy_score
from .bufferpool import BlockRef, BufferPool, ExecutionStats, execute_query, hit_ratio_reward, snapshot
from .catalog import (AccessDescriptor, AccessMode, Catalog, IndexScan, NestedLoop, QuerySpec, RelationKind,
                      RelationMeta, SeqScan, access_matrix, parse_plan)
from .encoding import downsample, encode_buffer_state, encode_query_action, feature_vector
from .errors import CatalogError, GuardError, ValidationError
from .harness import (ExperimentConfig, MetricsRow, SummaryRow, brute_force_oracle, emit_metrics, emit_summary,
                      run_baseline, run_experiment, run_order)
from .neuralnet import MLP, AdamState, forward, init_network, train_batch
from .workload import WorkloadSpec, generate_workload, materialize_reads

__version__ = "0.1.0"
