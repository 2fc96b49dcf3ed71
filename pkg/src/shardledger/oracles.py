"""Trust-weighted peer-to-peer oracle network.

Each claim is checked by a committee drawn from the staked oracles. Every
committee member submits a probability that the data is valid; submissions
are mapped to signed scores ``2s - 1`` in [-1, 1], weighted by the oracle's
running correctness ratio, and summed. The sign of the sum decides the claim.
A sum of exactly zero leaves the claim undefined and hands the call to the
most trusted submitter.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from .errors import (
    ClaimNotReady,
    CommitteeTooLarge,
    DeadlinePassed,
    NoEligibleOracles,
    NotSelected,
)
from .rewards import (
    LedgerEntry,
    RewardSchedule,
    SettlementReport,
    StakeLedger,
    apply_penalty,
    credit_reward,
    mark_settled,
)

COLD_START_WEIGHT = Fraction(1, 2)


class Behavior(enum.Enum):
    CALIBRATED = "calibrated"
    ADVERSARIAL = "adversarial"
    NOISY = "noisy"


@dataclass(frozen=True)
class Oracle:
    """An oracle and its track record.

    ``correct_count`` / ``total_count`` count settled, non-undefined claims
    the oracle took part in. ``deposit`` mirrors the oracle's escrow in the
    stake ledger.

    Behaviours: CALIBRATED submits ``accuracy`` on valid data and
    ``1 - accuracy`` on false data. ADVERSARIAL submits the reverse. NOISY
    judges the data correctly with probability ``accuracy`` (independently
    per claim) and then reports like a calibrated oracle on its judgement.
    """

    id: str
    accuracy: Fraction = Fraction(9, 10)
    behavior: Behavior = Behavior.CALIBRATED
    deposit: Fraction = Fraction(0)
    correct_count: int = 0
    total_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "accuracy", Fraction(self.accuracy))
        object.__setattr__(self, "deposit", Fraction(self.deposit))
        if not 0 <= self.accuracy <= 1:
            raise ValueError("accuracy must lie in [0, 1]")
        if not 0 <= self.correct_count <= self.total_count:
            raise ValueError("need 0 <= correct_count <= total_count")


def trust_weight(oracle: Oracle) -> Fraction:
    if oracle.total_count == 0:
        return COLD_START_WEIGHT
    return Fraction(oracle.correct_count, oracle.total_count)


def select_oracles(pool: Sequence[Oracle], n: int, rng: random.Random) -> List[Oracle]:
    """Uniform ``n``-subset of the staked oracles, in pool order."""
    eligible = [o for o in pool if o.deposit > 0]
    if n < 1:
        raise ValueError("committee size must be at least 1")
    if not eligible:
        raise NoEligibleOracles("no oracle holds a deposit")
    if n > len(eligible):
        raise CommitteeTooLarge(f"committee of {n} from {len(eligible)} eligible oracles")
    picked = sorted(rng.sample(range(len(eligible)), n))
    return [eligible[k] for k in picked]


@dataclass(frozen=True)
class DataClaim:
    id: str
    ground_truth: bool
    opened_at: int
    deadline: int
    committee: Tuple[str, ...]
    submissions: Mapping[str, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "submissions", dict(self.submissions))

    @property
    def complete(self) -> bool:
        return len(self.submissions) == len(self.committee)

    def ready(self, now: int) -> bool:
        return self.complete or now >= self.deadline


def open_claim(claim_id: str, ground_truth: bool, now: int, delta_t: int, committee: Sequence[Oracle]) -> DataClaim:
    return DataClaim(claim_id, ground_truth, now, now + delta_t, tuple(o.id for o in committee))


def submission_probability(q, data_valid: bool) -> Fraction:
    """The probability an oracle of accuracy ``q`` reports: q if valid, else 1 - q."""
    q = Fraction(q)
    return q if data_valid else 1 - q


def oracle_submit(oracle: Oracle, claim: DataClaim, rng: random.Random, now: Optional[int] = None) -> Fraction:
    if oracle.id not in claim.committee:
        raise NotSelected(f"oracle {oracle.id} is not on the committee for {claim.id}")
    if now is not None and now > claim.deadline:
        raise DeadlinePassed(f"claim {claim.id} closed at tick {claim.deadline}")
    truth = claim.ground_truth
    if oracle.behavior is Behavior.ADVERSARIAL:
        return submission_probability(oracle.accuracy, not truth)
    if oracle.behavior is Behavior.NOISY:
        judged = truth if rng.random() < oracle.accuracy else not truth
        return submission_probability(oracle.accuracy, judged)
    return submission_probability(oracle.accuracy, truth)


def record_submission(claim: DataClaim, oracle_id: str, s, now: int) -> DataClaim:
    if oracle_id not in claim.committee:
        raise NotSelected(oracle_id)
    if now > claim.deadline:
        raise DeadlinePassed(f"claim {claim.id} closed at tick {claim.deadline}")
    s = Fraction(s)
    if not 0 <= s <= 1:
        raise ValueError("submission must lie in [0, 1]")
    subs = dict(claim.submissions)
    subs[oracle_id] = s
    return replace(claim, submissions=subs)


def signed_score(s) -> Fraction:
    return 2 * Fraction(s) - 1


def _sign(x) -> int:
    return (x > 0) - (x < 0)


class Outcome(enum.Enum):
    VALID = "valid"
    FALSE = "false"
    UNDEFINED = "undefined"
    UNRESOLVABLE = "unresolvable"


@dataclass(frozen=True)
class ClaimDecision:
    """Decision on a claim.

    For UNDEFINED outcomes ``delegate`` is the most trusted submitter and
    ``delegated_verdict`` the sign of its own submission (None if that was
    exactly 1/2 too).
    """

    claim: str
    aggregate: Fraction
    outcome: Outcome
    delegate: Optional[str] = None
    delegated_verdict: Optional[bool] = None

    @property
    def verdict(self) -> Optional[bool]:
        """Final call on the data: the outcome itself, or the delegate's."""
        if self.outcome is Outcome.VALID:
            return True
        if self.outcome is Outcome.FALSE:
            return False
        return self.delegated_verdict


def aggregate_verdict(
    claim: DataClaim, oracles: Mapping[str, Oracle], now: Optional[int] = None
) -> ClaimDecision:
    """Trust-weighted signed sum of the submissions, decided by its sign.

    Weights are read from ``oracles`` at call time (decision time).
    """
    if now is not None and not claim.ready(now):
        raise ClaimNotReady(f"claim {claim.id} waits for submissions until tick {claim.deadline}")
    if not claim.submissions:
        return ClaimDecision(claim.id, Fraction(0), Outcome.UNRESOLVABLE)
    total = Fraction(0)
    for oid, s in claim.submissions.items():
        total += signed_score(s) * trust_weight(oracles[oid])
    if total > 0:
        return ClaimDecision(claim.id, total, Outcome.VALID)
    if total < 0:
        return ClaimDecision(claim.id, total, Outcome.FALSE)
    delegate = min(claim.submissions, key=lambda oid: (-trust_weight(oracles[oid]), oid))
    sign = _sign(signed_score(claim.submissions[delegate]))
    return ClaimDecision(claim.id, total, Outcome.UNDEFINED, delegate, None if sign == 0 else sign > 0)


class OracleUpdate(NamedTuple):
    oracle: str
    matched: bool
    correct_count: int
    total_count: int


@dataclass(frozen=True)
class ClaimSettlement:
    report: SettlementReport
    updates: Tuple[OracleUpdate, ...]


def settle_claim(
    decision: ClaimDecision,
    claim: DataClaim,
    oracles: Mapping[str, Oracle],
    ledger: StakeLedger,
    schedule: RewardSchedule,
) -> Tuple[Dict[str, Oracle], StakeLedger, ClaimSettlement]:
    """Reward submitters whose sign matches the outcome, penalise the rest.

    Undefined and unresolvable claims change nothing except marking the claim
    settled.
    """
    ledger = mark_settled(ledger, ("claim", claim.id))
    oracles = dict(oracles)
    if decision.outcome not in (Outcome.VALID, Outcome.FALSE):
        return oracles, ledger, ClaimSettlement(SettlementReport(claim.id, ()), ())
    want = 1 if decision.outcome is Outcome.VALID else -1
    entries = []
    updates = []
    for oid in sorted(claim.submissions):
        o = oracles[oid]
        matched = _sign(signed_score(claim.submissions[oid])) == want
        if matched:
            ledger = credit_reward(ledger, oid, schedule.oracle_reward)
            if schedule.oracle_reward:
                entries.append(LedgerEntry(oid, "reward", schedule.oracle_reward))
        else:
            before = ledger.escrowed(oid)
            ledger = apply_penalty(ledger, oid, schedule.penalty_fraction)
            cut = before - ledger.escrowed(oid)
            if cut:
                entries.append(LedgerEntry(oid, "penalty", cut))
        o = replace(
            o,
            correct_count=o.correct_count + matched,
            total_count=o.total_count + 1,
            deposit=ledger.escrowed(oid),
        )
        oracles[oid] = o
        updates.append(OracleUpdate(oid, matched, o.correct_count, o.total_count))
    return oracles, ledger, ClaimSettlement(SettlementReport(claim.id, tuple(entries)), tuple(updates))
