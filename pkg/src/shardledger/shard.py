"""Sharded transaction verification.

A transaction's payload is cut into ``n`` contiguous, disjoint portions, one
per master cluster. Every online device in a cluster casts a binary vote on
its cluster's portion and the cluster scores the portion as the exact mean of
those votes. A portion is accepted when the score reaches 2/3, the honest
fraction that remains when at most ``floor(n/3)`` members misbehave.
"""

from __future__ import annotations

import enum
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .errors import MixedTransactions, NoVotes, PartitionTooFine, WrongCluster, ZeroClusters
from .ledger import Transaction, digest
from .rng import derive_rng

ACCEPT_THRESHOLD = Fraction(2, 3)


@dataclass(frozen=True)
class Portion:
    tx: bytes
    cluster_index: int
    offset: int
    length: int
    segment_digest: bytes


def partition_transaction(tx: Transaction, n: int) -> List[Portion]:
    """Split the payload into ``n`` contiguous segments.

    Segment lengths differ by at most one byte; the first ``len % n``
    segments carry the extra byte. Payloads shorter than ``n`` bytes are
    rejected rather than padded.
    """
    if n < 1:
        raise ZeroClusters("a transaction needs at least one cluster")
    size = len(tx.payload)
    if size < n:
        raise PartitionTooFine(f"{size}-byte payload cannot be split into {n} portions")
    base, extra = divmod(size, n)
    portions = []
    offset = 0
    for j in range(n):
        length = base + (1 if j < extra else 0)
        segment = tx.payload[offset : offset + length]
        portions.append(Portion(tx.id, j, offset, length, digest(segment)))
        offset += length
    return portions


def segment_of(tx: Transaction, portion: Portion) -> bytes:
    return tx.payload[portion.offset : portion.offset + portion.length]


# Device behaviour policies


@dataclass(frozen=True)
class Honest:
    honest = True

    def flips(self, rng: random.Random) -> bool:
        return False


@dataclass(frozen=True)
class AlwaysFlip:
    honest = False

    def flips(self, rng: random.Random) -> bool:
        return True


@dataclass(frozen=True)
class RandomFlip:
    p: float

    honest = False

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("flip probability must lie in [0, 1]")

    def flips(self, rng: random.Random) -> bool:
        return rng.random() < self.p


@dataclass(frozen=True)
class SlaveDevice:
    id: str
    cluster: int
    behavior: object = Honest()
    deposit: Fraction = Fraction(0)
    online: bool = True

    def __post_init__(self):
        if self.deposit < 0:
            raise ValueError("deposit must be non-negative")


@dataclass(frozen=True)
class MasterCluster:
    index: int
    devices: Tuple[SlaveDevice, ...]

    @property
    def size(self) -> int:
        return len(self.devices)

    @property
    def byzantine_bound(self) -> int:
        return len(self.devices) // 3

    @property
    def dishonest_count(self) -> int:
        return sum(1 for d in self.devices if not d.behavior.honest)

    def within_bound(self) -> bool:
        return self.dishonest_count <= self.byzantine_bound


@dataclass(frozen=True)
class Vote:
    device: str
    tx: bytes
    cluster_index: int
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError("vote bit must be 0 or 1")


def cast_vote(device: SlaveDevice, portion: Portion, ground_truth: bool, rng: random.Random) -> Vote:
    if device.cluster != portion.cluster_index:
        raise WrongCluster(f"device {device.id} belongs to cluster {device.cluster}, not {portion.cluster_index}")
    bit = int(ground_truth)
    if device.behavior.flips(rng):
        bit = 1 - bit
    return Vote(device.id, portion.tx, portion.cluster_index, bit)


@dataclass(frozen=True)
class VerificationResult:
    """Outcome of one cluster's vote on one portion.

    The score is kept as the integer pair (yes, participants); ``score`` is
    the mean of the binary votes over the participating devices.
    """

    tx: bytes
    cluster_index: int
    yes: int
    participants: int
    accepted: bool

    @property
    def score(self) -> Fraction:
        return Fraction(self.yes, self.participants)


def meets_threshold(yes: int, m: int) -> bool:
    # yes/m >= 2/3 without leaving integers
    return 3 * yes >= 2 * m


def aggregate_verification(votes: Sequence[Vote], m: Optional[int] = None) -> VerificationResult:
    """Average the participants' binary votes on one portion (T = sum(bits) / m)."""
    if m is None:
        m = len(votes)
    if m == 0 or not votes:
        raise NoVotes("no participating devices")
    if m != len(votes):
        raise ValueError(f"participant count {m} does not match {len(votes)} votes")
    first = votes[0]
    target = (first.tx, first.cluster_index)
    for v in votes:
        if (v.tx, v.cluster_index) != target:
            raise MixedTransactions("votes reference different portions")
    yes = sum(v.bit for v in votes)
    return VerificationResult(first.tx, first.cluster_index, yes, m, meets_threshold(yes, m))


class CombinePolicy(enum.Enum):
    UNANIMOUS = "unanimous"
    MAJORITY = "majority"


@dataclass(frozen=True)
class TxVerification:
    tx: bytes
    results: Tuple[VerificationResult, ...]
    votes: Tuple[Tuple[Vote, ...], ...]
    accepted: bool


def combine(results: Sequence[VerificationResult], policy: CombinePolicy = CombinePolicy.UNANIMOUS) -> bool:
    if policy is CombinePolicy.UNANIMOUS:
        return all(r.accepted for r in results)
    return 2 * sum(r.accepted for r in results) > len(results)


def _verify_cluster(tx: Transaction, portion: Portion, cluster: MasterCluster, seed: int, participants):
    votes = []
    for device in cluster.devices:
        if not device.online or (participants is not None and device.id not in participants):
            continue
        rng = derive_rng(seed, "vote", device.id, tx.id)
        votes.append(cast_vote(device, portion, tx.ground_truth_valid, rng))
    return aggregate_verification(votes), tuple(votes)


def verify_transaction(
    tx: Transaction,
    clusters: Sequence[MasterCluster],
    seed: int,
    *,
    policy: CombinePolicy = CombinePolicy.UNANIMOUS,
    parallel: bool = False,
    participants=None,
) -> TxVerification:
    """Run every cluster on its own portion and combine the portion verdicts.

    ``participants`` optionally restricts voting to a set of device ids (for
    instance those that could afford a deposit). Each device draws from its
    own stream keyed by (seed, device id, tx id), so ``parallel=True`` gives
    the same result as serial evaluation.
    """
    portions = partition_transaction(tx, len(clusters))
    for portion, cluster in zip(portions, clusters):
        if cluster.index != portion.cluster_index:
            raise WrongCluster(f"cluster at position {portion.cluster_index} has index {cluster.index}")
    if parallel and len(clusters) > 1:
        with ThreadPoolExecutor(max_workers=len(clusters)) as pool:
            outs = list(
                pool.map(lambda pc: _verify_cluster(tx, pc[0], pc[1], seed, participants), zip(portions, clusters))
            )
    else:
        outs = [_verify_cluster(tx, p, c, seed, participants) for p, c in zip(portions, clusters)]
    results = tuple(r for r, _ in outs)
    return TxVerification(tx.id, results, tuple(v for _, v in outs), combine(results, policy))
