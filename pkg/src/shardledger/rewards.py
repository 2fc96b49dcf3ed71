"""Stake deposits, cluster reward shares, per-node rewards and penalties.

All amounts are :class:`fractions.Fraction`. The ledger is a value: every
operation returns a new ledger and leaves its input untouched.

Conservation bookkeeping: ``endowed`` is the stake handed out at set-up,
``minted`` what rewards created, ``burned`` what penalties destroyed. For
every reachable ledger::

    sum(balances) + sum(escrow) + burned - minted == endowed
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, FrozenSet, List, Mapping, NamedTuple, Sequence, Tuple

from .errors import (
    AlreadySettled,
    InsufficientBalance,
    InvalidSchedule,
    UnknownCluster,
    UnknownParticipant,
    ZeroDeposit,
    ZeroParticipants,
)
from .shard import TxVerification, Vote

ZERO = Fraction(0)


@dataclass(frozen=True)
class StakeLedger:
    balances: Mapping[str, Fraction] = field(default_factory=dict)
    escrow: Mapping[str, Fraction] = field(default_factory=dict)
    endowed: Fraction = ZERO
    minted: Fraction = ZERO
    burned: Fraction = ZERO
    settled: FrozenSet[Tuple[str, str]] = frozenset()

    def __post_init__(self):
        # private copies; operations never mutate them in place
        object.__setattr__(self, "balances", dict(self.balances))
        object.__setattr__(self, "escrow", dict(self.escrow))

    def balance(self, pid: str) -> Fraction:
        return self.balances.get(pid, ZERO)

    def escrowed(self, pid: str) -> Fraction:
        return self.escrow.get(pid, ZERO)

    def holdings(self, pid: str) -> Fraction:
        return self.balance(pid) + self.escrowed(pid)

    def knows(self, pid: str) -> bool:
        return pid in self.balances or pid in self.escrow

    @property
    def total_stake(self) -> Fraction:
        return sum(self.balances.values(), ZERO) + sum(self.escrow.values(), ZERO)

    @property
    def conservation_residual(self) -> Fraction:
        """Zero for every ledger produced by this module's operations."""
        return self.total_stake + self.burned - self.minted - self.endowed

    def _with(self, balances=None, escrow=None, **kw) -> "StakeLedger":
        return replace(
            self,
            balances=self.balances if balances is None else balances,
            escrow=self.escrow if escrow is None else escrow,
            **kw,
        )


def endow(ledger: StakeLedger, pid: str, amount) -> StakeLedger:
    """Credit an initial endowment (outside any reward or penalty)."""
    amount = Fraction(amount)
    if amount < 0:
        raise ValueError("endowment must be non-negative")
    balances = dict(ledger.balances)
    balances[pid] = balances.get(pid, ZERO) + amount
    escrow = dict(ledger.escrow)
    escrow.setdefault(pid, ZERO)
    return ledger._with(balances, escrow, endowed=ledger.endowed + amount)


def place_deposit(ledger: StakeLedger, pid: str, amount) -> StakeLedger:
    amount = Fraction(amount)
    if amount <= 0:
        raise ZeroDeposit("deposit must be positive")
    if ledger.balance(pid) < amount:
        raise InsufficientBalance(f"{pid} holds {ledger.balance(pid)}, cannot deposit {amount}")
    balances = dict(ledger.balances)
    escrow = dict(ledger.escrow)
    balances[pid] -= amount
    escrow[pid] = escrow.get(pid, ZERO) + amount
    return ledger._with(balances, escrow)


def release_escrow(ledger: StakeLedger, pid: str) -> StakeLedger:
    amount = ledger.escrowed(pid)
    if not amount:
        return ledger
    balances = dict(ledger.balances)
    escrow = dict(ledger.escrow)
    balances[pid] = balances.get(pid, ZERO) + amount
    escrow[pid] = ZERO
    return ledger._with(balances, escrow)


def apply_penalty(ledger: StakeLedger, pid: str, penalty_fraction) -> StakeLedger:
    """Burn ``penalty_fraction`` of the participant's escrowed deposit."""
    if not ledger.knows(pid):
        raise UnknownParticipant(pid)
    fraction = Fraction(penalty_fraction)
    if not 0 <= fraction <= 1:
        raise ValueError("penalty fraction must lie in [0, 1]")
    held = ledger.escrowed(pid)
    cut = min(held, fraction * held)
    if not cut:
        return ledger
    escrow = dict(ledger.escrow)
    escrow[pid] = held - cut
    return ledger._with(escrow=escrow, burned=ledger.burned + cut)


def credit_reward(ledger: StakeLedger, pid: str, amount) -> StakeLedger:
    """Mint ``amount`` of new stake straight into the participant's balance."""
    amount = Fraction(amount)
    if amount < 0:
        raise ValueError("reward must be non-negative")
    if not amount:
        return ledger
    balances = dict(ledger.balances)
    balances[pid] = balances.get(pid, ZERO) + amount
    return ledger._with(balances, minted=ledger.minted + amount)


def mark_settled(ledger: StakeLedger, key: Tuple[str, str]) -> StakeLedger:
    if key in ledger.settled:
        raise AlreadySettled(f"{key[0]} {key[1]} already settled")
    return replace(ledger, settled=ledger.settled | {key})


@dataclass(frozen=True)
class RewardSchedule:
    """Reward amounts per verified transaction.

    ``portion_rewards[j]`` is what cluster ``j`` earns for its portion;
    together they make up ``total_tx_reward``. ``reward_correct_only`` picks
    the equal-split base: correct voters only (default) or every participant.
    ``reward_invalid`` controls whether correctly rejected portions pay a
    share as well as returning the deposit.
    """

    total_tx_reward: Fraction
    portion_rewards: Tuple[Fraction, ...]
    penalty_fraction: Fraction = Fraction(1)
    oracle_reward: Fraction = Fraction(1)
    reward_correct_only: bool = True
    reward_invalid: bool = True

    def __post_init__(self):
        object.__setattr__(self, "total_tx_reward", Fraction(self.total_tx_reward))
        object.__setattr__(self, "portion_rewards", tuple(Fraction(r) for r in self.portion_rewards))
        object.__setattr__(self, "penalty_fraction", Fraction(self.penalty_fraction))
        object.__setattr__(self, "oracle_reward", Fraction(self.oracle_reward))
        problems = schedule_problems(self)
        if problems:
            raise InvalidSchedule("; ".join(problems))

    @classmethod
    def equal(cls, total, clusters: int, **kw) -> "RewardSchedule":
        total = Fraction(total)
        return cls(total, (total / clusters,) * clusters, **kw)


def schedule_problems(s: RewardSchedule) -> List[str]:
    out = []
    if not s.portion_rewards:
        out.append("reward schedule has no portions")
    if any(r < 0 for r in s.portion_rewards):
        out.append("portion rewards must be non-negative")
    if sum(s.portion_rewards, ZERO) != s.total_tx_reward:
        out.append("portion rewards must sum to total_tx_reward")
    if not 0 <= s.penalty_fraction <= 1:
        out.append("penalty_fraction must lie in [0, 1]")
    if s.oracle_reward < 0:
        out.append("oracle_reward must be non-negative")
    return out


def cluster_reward_share(schedule: RewardSchedule, cluster: int) -> Fraction:
    """Cluster ``j``'s fraction of the transaction reward: R(t_j) / R(T_total)."""
    if not 0 <= cluster < len(schedule.portion_rewards):
        raise UnknownCluster(cluster)
    if schedule.total_tx_reward == 0:
        return Fraction(1, len(schedule.portion_rewards))
    return schedule.portion_rewards[cluster] / schedule.total_tx_reward


def node_reward(cluster_reward, participants: int, deposit) -> Fraction:
    """Equal share of the cluster reward plus the returned deposit."""
    if participants < 1:
        raise ZeroParticipants("reward split needs at least one participant")
    return Fraction(cluster_reward) / participants + Fraction(deposit)


class LedgerEntry(NamedTuple):
    participant: str
    kind: str  # "reward" | "refund" | "penalty"
    amount: Fraction


@dataclass(frozen=True)
class SettlementReport:
    subject: str
    entries: Tuple[LedgerEntry, ...]

    @property
    def minted(self) -> Fraction:
        return sum((e.amount for e in self.entries if e.kind == "reward"), ZERO)

    @property
    def burned(self) -> Fraction:
        return sum((e.amount for e in self.entries if e.kind == "penalty"), ZERO)


def settle_round(
    ledger: StakeLedger,
    schedule: RewardSchedule,
    verification: TxVerification,
    votes: Sequence[Sequence[Vote]] = None,
) -> Tuple[StakeLedger, SettlementReport]:
    """Pay correct voters and penalise the rest for one verified transaction.

    A vote is correct when it agrees with its own cluster's portion verdict.
    Correct voters receive :func:`node_reward` (equal share plus their escrow
    back). Incorrect voters lose ``penalty_fraction`` of their escrow, get the
    remainder back, and take no share.
    """
    if votes is None:
        votes = verification.votes
    ledger = mark_settled(ledger, ("tx", verification.tx.hex()))
    entries: List[LedgerEntry] = []
    for result, cluster_votes in zip(verification.results, votes):
        expected = 1 if result.accepted else 0
        correct = [v for v in cluster_votes if v.bit == expected]
        wrong = [v for v in cluster_votes if v.bit != expected]
        cluster_units = cluster_reward_share(schedule, result.cluster_index) * schedule.total_tx_reward
        if not result.accepted and not schedule.reward_invalid:
            cluster_units = ZERO
        base = len(correct) if schedule.reward_correct_only else len(cluster_votes)
        for v in correct:
            held = ledger.escrowed(v.device)
            payout = node_reward(cluster_units, base, held)
            ledger = release_escrow(ledger, v.device)
            ledger = credit_reward(ledger, v.device, payout - held)
            if held:
                entries.append(LedgerEntry(v.device, "refund", held))
            if payout - held:
                entries.append(LedgerEntry(v.device, "reward", payout - held))
        for v in wrong:
            before = ledger.escrowed(v.device)
            ledger = apply_penalty(ledger, v.device, schedule.penalty_fraction)
            cut = before - ledger.escrowed(v.device)
            if cut:
                entries.append(LedgerEntry(v.device, "penalty", cut))
            rest = ledger.escrowed(v.device)
            ledger = release_escrow(ledger, v.device)
            if rest:
                entries.append(LedgerEntry(v.device, "refund", rest))
    return ledger, SettlementReport(verification.tx.hex(), tuple(entries))
