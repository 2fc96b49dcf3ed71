"""Deterministic tick-driven simulation of the three-layer topology.

Access-layer devices emit transactions and data claims, the edge layer runs
sharded verification and the oracle network, and the cloud layer appends the
accepted transactions of each tick as one block. Within a tick the order is:

1. new transactions: deposit, verify, decide, settle
2. new claims: committee selection, open
3. oracle submissions due this tick
4. claims that are complete or past their deadline: decide, settle
5. append one block holding this tick's accepted transactions (if any)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterable, List, Optional, Tuple

from .errors import ScenarioError, ShardLedgerError, TickError
from .ledger import Chain, Decided, Transaction, append_block, digest, validate_chain
from .oracles import (
    Behavior,
    DataClaim,
    Oracle,
    aggregate_verdict,
    open_claim,
    oracle_submit,
    record_submission,
    select_oracles,
    settle_claim,
    trust_weight,
)
from .rewards import RewardSchedule, StakeLedger, endow, place_deposit, schedule_problems, settle_round
from .rng import derive_rng
from .shard import AlwaysFlip, CombinePolicy, Honest, MasterCluster, RandomFlip, SlaveDevice, verify_transaction

ZERO = Fraction(0)


@dataclass(frozen=True)
class ClusterSpec:
    size: int
    dishonest: int = 0
    behavior: str = "always_flip"  # or "random_flip"
    flip_p: Fraction = Fraction(1, 2)
    deposit: Fraction = Fraction(1)
    endowment: Fraction = Fraction(100)
    offline: int = 0


@dataclass(frozen=True)
class OracleSpec:
    count: int
    q: Fraction = Fraction(9, 10)
    behavior: Behavior = Behavior.CALIBRATED
    deposit: Fraction = Fraction(5)
    endowment: Fraction = Fraction(20)
    delay: int = 0


@dataclass(frozen=True)
class Scenario:
    seed: int = 0
    ticks: int = 10
    clusters: Tuple[ClusterSpec, ...] = (ClusterSpec(4), ClusterSpec(4), ClusterSpec(4))
    oracle_pool: Tuple[OracleSpec, ...] = (OracleSpec(7),)
    committee_size: int = 5
    tx_rate: Fraction = Fraction(1)
    claim_rate: Fraction = Fraction(1)
    reward_schedule: Optional[RewardSchedule] = None
    delta_t: int = 10
    invalid_tx_fraction: Fraction = ZERO
    false_claim_fraction: Fraction = Fraction(1, 2)
    payload_size: int = 256
    combine: CombinePolicy = CombinePolicy.UNANIMOUS
    waive_byzantine_bound: bool = False

    @property
    def schedule(self) -> RewardSchedule:
        if self.reward_schedule is not None:
            return self.reward_schedule
        return RewardSchedule.equal(12, max(1, len(self.clusters)))

    @property
    def pool_size(self) -> int:
        return sum(o.count for o in self.oracle_pool)


def validate_scenario(s: Scenario) -> List[str]:
    """Every violated invariant, as human-readable strings; empty means ok."""
    out = []
    if s.ticks < 0:
        out.append("ticks must be non-negative")
    if s.tx_rate < 0 or s.claim_rate < 0:
        out.append("rates must be non-negative")
    if s.delta_t < 0:
        out.append("delta_t must be non-negative")
    for name in ("invalid_tx_fraction", "false_claim_fraction"):
        if not 0 <= getattr(s, name) <= 1:
            out.append(f"{name} must lie in [0, 1]")
    if not s.clusters:
        out.append("at least one cluster is required")
    for j, c in enumerate(s.clusters):
        where = f"clusters[{j}]"
        if c.size < 1:
            out.append(f"{where}: cluster has no devices")
            continue
        if not 0 <= c.dishonest <= c.size:
            out.append(f"{where}: dishonest must lie in [0, size]")
        if not 0 <= c.offline < c.size:
            out.append(f"{where}: offline must leave at least one device online")
        if c.behavior not in ("always_flip", "random_flip"):
            out.append(f"{where}: unknown behavior {c.behavior!r}")
        if not 0 <= c.flip_p <= 1:
            out.append(f"{where}: flip_p must lie in [0, 1]")
        if c.deposit < 0 or c.endowment < 0:
            out.append(f"{where}: deposit and endowment must be non-negative")
        online = c.size - c.offline
        if not s.waive_byzantine_bound and (c.dishonest > c.size // 3 or c.dishonest > online // 3):
            out.append(f"{where}: byzantine bound exceeded ({c.dishonest} dishonest of {online} online)")
    if s.clusters and s.tx_rate > 0 and s.payload_size < len(s.clusters):
        out.append(f"payload_size {s.payload_size} is too small for {len(s.clusters)} portions")
    for k, o in enumerate(s.oracle_pool):
        where = f"oracle_pool[{k}]"
        if o.count < 0:
            out.append(f"{where}: count must be non-negative")
        if not 0 <= o.q <= 1:
            out.append(f"{where}: q must lie in [0, 1]")
        if o.deposit < 0 or o.endowment < 0 or o.delay < 0:
            out.append(f"{where}: deposit, endowment and delay must be non-negative")
    if s.claim_rate > 0:
        if s.committee_size < 1:
            out.append("committee_size must be at least 1")
        if s.committee_size > s.pool_size:
            out.append(f"committee_size {s.committee_size} exceeds oracle pool size {s.pool_size}")
    if s.reward_schedule is not None:
        out.extend(schedule_problems(s.reward_schedule))
        if len(s.reward_schedule.portion_rewards) != len(s.clusters):
            out.append("reward_schedule needs one portion reward per cluster")
    return out


def build_clusters(s: Scenario) -> List[MasterCluster]:
    clusters = []
    for j, spec in enumerate(s.clusters):
        bad = AlwaysFlip() if spec.behavior == "always_flip" else RandomFlip(float(spec.flip_p))
        devices = []
        for k in range(spec.size):
            devices.append(
                SlaveDevice(
                    f"c{j}-d{k:02d}",
                    j,
                    bad if k < spec.dishonest else Honest(),
                    Fraction(spec.deposit),
                    online=k < spec.size - spec.offline,
                )
            )
        clusters.append(MasterCluster(j, tuple(devices)))
    return clusters


def build_oracles(s: Scenario) -> List[Oracle]:
    oracles = []
    for spec in s.oracle_pool:
        for _ in range(spec.count):
            oracles.append(Oracle(f"o{len(oracles):03d}", spec.q, spec.behavior))
    return oracles


def _oracle_specs(s: Scenario) -> Dict[str, OracleSpec]:
    out = {}
    for spec in s.oracle_pool:
        for _ in range(spec.count):
            out[f"o{len(out):03d}"] = spec
    return out


def initial_ledger(s: Scenario) -> StakeLedger:
    ledger = StakeLedger()
    for cluster in build_clusters(s):
        for d in cluster.devices:
            ledger = endow(ledger, d.id, s.clusters[cluster.index].endowment)
    for oid, spec in _oracle_specs(s).items():
        ledger = endow(ledger, oid, spec.endowment + spec.deposit)
    return ledger


def _due(rate: Fraction, tick: int) -> int:
    rate = Fraction(rate)
    return math.floor((tick + 1) * rate) - math.floor(tick * rate)


def _q(x) -> str:
    return str(Fraction(x))


@dataclass(frozen=True)
class Event:
    tick: int
    kind: str
    data: dict

    def to_line(self) -> str:
        record = {"tick": self.tick, "kind": self.kind}
        record.update(self.data)
        return json.dumps(record, separators=(",", ":"))


class EventLog(list):
    """Ordered event records; serializes to one JSON object per line."""

    def emit(self, tick: int, kind: str, **data):
        self.append(Event(tick, kind, data))

    def dumps(self) -> str:
        return "".join(e.to_line() + "\n" for e in self)

    @classmethod
    def parse(cls, text: str) -> "EventLog":
        log = cls()
        for line in text.splitlines():
            if line.strip():
                record = json.loads(line)
                log.append(Event(record.pop("tick"), record.pop("kind"), record))
        return log


@dataclass
class RunResult:
    chain: Chain
    ledger: StakeLedger
    log: EventLog
    summary: "MetricsSummary"
    oracles: Dict[str, Oracle]


class _Run:
    def __init__(self, s: Scenario, parallel: bool):
        self.s = s
        self.parallel = parallel
        self.schedule = s.schedule
        self.clusters = build_clusters(s)
        self.devices = {d.id: d for c in self.clusters for d in c.devices}
        self.oracles = {o.id: o for o in build_oracles(s)}
        self.oracle_specs = _oracle_specs(s)
        self.ledger = initial_ledger(s)
        for oid, spec in self.oracle_specs.items():
            self._top_up(oid, spec)
        self.chain = Chain()
        self.log = EventLog()
        self.open_claims: List[DataClaim] = []
        self.tx_counter = 0
        self.claim_counter = 0

    def _top_up(self, oid, spec):
        missing = spec.deposit - self.ledger.escrowed(oid)
        if missing > 0 and self.ledger.balance(oid) >= missing:
            self.ledger = place_deposit(self.ledger, oid, missing)
        o = self.oracles[oid]
        if o.deposit != self.ledger.escrowed(oid):
            self.oracles[oid] = Oracle(
                o.id, o.accuracy, o.behavior, self.ledger.escrowed(oid), o.correct_count, o.total_count
            )

    def _new_tx(self, tick: int) -> Transaction:
        n = self.tx_counter
        self.tx_counter += 1
        rng = derive_rng(self.s.seed, "tx", n)
        frac = Fraction(self.s.invalid_tx_fraction)
        invalid = rng.randrange(frac.denominator) < frac.numerator
        return Transaction(
            digest(f"tx|{self.s.seed}|{n}".encode()), rng.randbytes(self.s.payload_size), not invalid, tick
        )

    def _process_tx(self, tick: int, pending: List[Decided]):
        tx = self._new_tx(tick)
        self.log.emit(tick, "TxSubmitted", tx=tx.id.hex(), valid=tx.ground_truth_valid)
        participants = set()
        for dev in self.devices.values():
            if not dev.online:
                continue
            if dev.deposit == 0:
                participants.add(dev.id)
            elif self.ledger.balance(dev.id) >= dev.deposit:
                self.ledger = place_deposit(self.ledger, dev.id, dev.deposit)
                participants.add(dev.id)
        ver = verify_transaction(
            tx, self.clusters, self.s.seed, policy=self.s.combine, parallel=self.parallel, participants=participants
        )
        for result, votes in zip(ver.results, ver.votes):
            self.log.emit(
                tick,
                "PortionVoted",
                tx=tx.id.hex(),
                cluster=result.cluster_index,
                votes=[[v.device, v.bit] for v in votes],
                yes=result.yes,
                participants=result.participants,
                accepted=result.accepted,
            )
        self.log.emit(tick, "TxDecided", tx=tx.id.hex(), accepted=ver.accepted, valid=tx.ground_truth_valid)
        self.ledger, report = settle_round(self.ledger, self.schedule, ver)
        self._settled(tick, "tx", tx.id.hex(), report.entries)
        if ver.accepted:
            pending.append(Decided(tx.id, True))

    def _settled(self, tick, subject, sid, entries, **extra):
        self.log.emit(
            tick,
            "Settled",
            subject=subject,
            id=sid,
            entries=[[e.participant, e.kind, _q(e.amount)] for e in entries],
            **extra,
            total_stake=_q(self.ledger.total_stake),
        )

    def _open_claims(self, tick: int):
        for _ in range(_due(self.s.claim_rate, tick)):
            cid = f"claim-{self.claim_counter:06d}"
            self.claim_counter += 1
            rng = derive_rng(self.s.seed, "claim", cid)
            frac = Fraction(self.s.false_claim_fraction)
            truth = not (rng.randrange(frac.denominator) < frac.numerator)
            for oid, spec in self.oracle_specs.items():
                self._top_up(oid, spec)
            committee = select_oracles(list(self.oracles.values()), self.s.committee_size, rng)
            claim = open_claim(cid, truth, tick, self.s.delta_t, committee)
            self.open_claims.append(claim)
            self.log.emit(
                tick, "ClaimOpened", claim=cid, valid=truth, committee=list(claim.committee), deadline=claim.deadline
            )

    def _collect(self, tick: int):
        for k, claim in enumerate(self.open_claims):
            for oid in claim.committee:
                if oid in claim.submissions or claim.opened_at + self.oracle_specs[oid].delay != tick:
                    continue
                if tick > claim.deadline:
                    continue
                rng = derive_rng(self.s.seed, "submit", oid, claim.id)
                s = oracle_submit(self.oracles[oid], claim, rng, tick)
                claim = record_submission(claim, oid, s, tick)
                self.log.emit(tick, "OracleSubmitted", claim=claim.id, oracle=oid, s=_q(s))
            self.open_claims[k] = claim

    def _decide(self, tick: int):
        still_open = []
        for claim in self.open_claims:
            if not claim.ready(tick):
                still_open.append(claim)
                continue
            decision = aggregate_verdict(claim, self.oracles, tick)
            self.log.emit(
                tick,
                "ClaimDecided",
                claim=claim.id,
                outcome=decision.outcome.value,
                verdict=decision.verdict,
                valid=claim.ground_truth,
                aggregate=_q(decision.aggregate),
                delegate=decision.delegate,
            )
            self.oracles, self.ledger, settlement = settle_claim(
                decision, claim, self.oracles, self.ledger, self.schedule
            )
            self._settled(
                tick,
                "claim",
                claim.id,
                settlement.report.entries,
                updates=[[u.oracle, u.matched, u.correct_count, u.total_count] for u in settlement.updates],
            )
        self.open_claims = still_open

    def tick(self, tick: int):
        pending: List[Decided] = []
        for _ in range(_due(self.s.tx_rate, tick)):
            self._process_tx(tick, pending)
        self._open_claims(tick)
        self._collect(tick)
        self._decide(tick)
        if pending:
            self.chain = append_block(self.chain, pending, tick)
            tip = self.chain.tip
            self.log.emit(
                tick,
                "BlockAppended",
                height=tip.height,
                hash=tip.block_hash.hex(),
                txs=[t.hex() for t, _ in tip.transactions],
            )


def run(
    s: Scenario,
    *,
    parallel: bool = False,
    validate: bool = True,
    observer: Optional[Callable[[int, StakeLedger], None]] = None,
) -> RunResult:
    """Execute a scenario; identical scenarios give byte-identical logs.

    ``parallel`` evaluates the clusters of each transaction on a thread pool.
    ``observer`` is called with (tick, ledger) at the end of every tick.
    """
    if validate:
        problems = validate_scenario(s)
        if problems:
            raise ScenarioError(problems)
    state = _Run(s, parallel)
    if s.ticks > 0:
        state.log.emit(0, "RunStarted", seed=s.seed, ticks=s.ticks, total_stake=_q(state.ledger.total_stake))
    for tick in range(s.ticks):
        try:
            state.tick(tick)
        except ShardLedgerError as exc:
            raise TickError(tick, exc) from exc
        if observer is not None:
            observer(tick, state.ledger)
    report = validate_chain(state.chain)
    assert report.ok, report
    return RunResult(state.chain, state.ledger, state.log, metrics(state.log), state.oracles)


@dataclass(frozen=True)
class MetricsRow:
    tick: int
    txs_decided: int
    txs_accepted: int
    tx_accuracy_cum: Optional[Fraction]
    claims_decided: int
    claim_accuracy_cum: Optional[Fraction]
    undefined_claims: int
    total_stake: Fraction


@dataclass
class MetricsSummary:
    ticks: int = 0
    txs_decided: int = 0
    txs_accepted: int = 0
    txs_correct: int = 0
    claims_decided: int = 0
    claims_correct: int = 0
    undefined_claims: int = 0
    unresolvable_claims: int = 0
    initial_stake: Fraction = ZERO
    final_stake: Fraction = ZERO
    minted: Fraction = ZERO
    burned: Fraction = ZERO
    holdings_delta: Dict[str, Fraction] = field(default_factory=dict)
    trust_trajectory: Dict[str, List[Tuple[int, Fraction]]] = field(default_factory=dict)
    rows: List[MetricsRow] = field(default_factory=list)

    @property
    def tx_accuracy(self) -> Fraction:
        return Fraction(self.txs_correct, self.txs_decided) if self.txs_decided else ZERO

    @property
    def claim_accuracy(self) -> Fraction:
        return Fraction(self.claims_correct, self.claims_decided) if self.claims_decided else ZERO

    @property
    def throughput(self) -> Fraction:
        return Fraction(self.txs_decided, self.ticks) if self.ticks else ZERO


EMPTY_BUCKET = {"txs": 0, "acc": 0, "ok": 0, "claims": 0, "okc": 0, "undef": 0}


def metrics(log: Iterable[Event], ledger: Optional[StakeLedger] = None, oracles=None) -> MetricsSummary:
    """Summarize a run from its event log alone.

    When ``ledger`` or ``oracles`` are given, the log-derived stake total and
    trust weights are checked against them.
    """
    m = MetricsSummary()
    per_tick: Dict[int, dict] = {}
    stake = ZERO

    def bucket(t):
        return per_tick.setdefault(t, dict(EMPTY_BUCKET))

    for e in log:
        d = e.data
        if e.kind == "RunStarted":
            m.ticks = d["ticks"]
            stake = m.initial_stake = Fraction(d["total_stake"])
        elif e.kind == "TxDecided":
            b = bucket(e.tick)
            b["txs"] += 1
            b["acc"] += d["accepted"]
            b["ok"] += d["accepted"] == d["valid"]
            m.txs_decided += 1
            m.txs_accepted += d["accepted"]
            m.txs_correct += d["accepted"] == d["valid"]
        elif e.kind == "ClaimDecided":
            b = bucket(e.tick)
            b["claims"] += 1
            right = d["verdict"] is not None and d["verdict"] == d["valid"]
            b["okc"] += right
            m.claims_decided += 1
            m.claims_correct += right
            if d["outcome"] == "undefined":
                b["undef"] += 1
                m.undefined_claims += 1
            elif d["outcome"] == "unresolvable":
                m.unresolvable_claims += 1
        elif e.kind == "Settled":
            for pid, kind, amount in d["entries"]:
                amount = Fraction(amount)
                if kind == "reward":
                    m.minted += amount
                    m.holdings_delta[pid] = m.holdings_delta.get(pid, ZERO) + amount
                elif kind == "penalty":
                    m.burned += amount
                    m.holdings_delta[pid] = m.holdings_delta.get(pid, ZERO) - amount
            for oid, _, alpha, beta in d.get("updates", ()):
                m.trust_trajectory.setdefault(oid, []).append((e.tick, Fraction(alpha, beta)))
            stake = Fraction(d["total_stake"])
        bucket(e.tick)["stake"] = stake

    m.final_stake = stake
    txs = ok_txs = claims = ok_claims = 0
    stake_t = m.initial_stake
    for t in range(m.ticks):
        b = per_tick.get(t, EMPTY_BUCKET)
        stake_t = b.get("stake", stake_t)
        txs += b["txs"]
        claims += b["claims"]
        ok_txs += b["ok"]
        ok_claims += b["okc"]
        m.rows.append(
            MetricsRow(
                t,
                b["txs"],
                b["acc"],
                Fraction(ok_txs, txs) if txs else None,
                b["claims"],
                Fraction(ok_claims, claims) if claims else None,
                b["undef"],
                stake_t,
            )
        )
    if ledger is not None and m.ticks:
        assert ledger.total_stake == m.final_stake, "log stake total disagrees with ledger"
    if oracles is not None:
        for oid, traj in m.trust_trajectory.items():
            assert trust_weight(oracles[oid]) == traj[-1][1], f"trust weight of {oid} disagrees with log"
    return m

