"""Sharded transaction verification with stake rewards and a trust-weighted oracle network."""

from .errors import ShardLedgerError
from .ledger import Block, Chain, Decided, Transaction, append_block, digest, validate_chain
from .oracles import Behavior, ClaimDecision, DataClaim, Oracle, Outcome, aggregate_verdict, trust_weight
from .rewards import RewardSchedule, StakeLedger, cluster_reward_share, node_reward, settle_round
from .shard import MasterCluster, SlaveDevice, aggregate_verification, partition_transaction, verify_transaction
from .sim import ClusterSpec, EventLog, OracleSpec, Scenario, metrics, run, validate_scenario

__version__ = "0.1.0"
