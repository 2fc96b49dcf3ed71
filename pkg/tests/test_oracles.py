import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shardledger.errors import (
    AlreadySettled,
    ClaimNotReady,
    CommitteeTooLarge,
    DeadlinePassed,
    NoEligibleOracles,
    NotSelected,
)
from shardledger.oracles import (
    Behavior,
    DataClaim,
    Oracle,
    Outcome,
    aggregate_verdict,
    open_claim,
    oracle_submit,
    record_submission,
    select_oracles,
    settle_claim,
    signed_score,
    submission_probability,
    trust_weight,
)
from shardledger.rewards import RewardSchedule, StakeLedger, endow, place_deposit

F = Fraction
SCHEDULE = RewardSchedule(1, (1,), penalty_fraction=1, oracle_reward=1)


def pool(n, deposit=5):
    return [Oracle(f"o{k}", deposit=deposit) for k in range(n)]


def claim_with(subs, truth=True, committee=None):
    committee = tuple(committee or subs)
    return DataClaim("c", truth, 0, 10, committee, {k: F(v) for k, v in subs.items()})


def staked_ledger(oracles, deposit=10):
    ledger = StakeLedger()
    for o in oracles:
        ledger = place_deposit(endow(ledger, o.id, deposit), o.id, deposit)
    return ledger


# selection


def test_whole_pool_when_committee_equals_pool():
    oracles = pool(6)
    assert select_oracles(oracles, 6, random.Random(1)) == oracles


def test_selection_deterministic():
    oracles = pool(10)
    picks = {tuple(o.id for o in select_oracles(oracles, 3, random.Random(42))) for _ in range(5)}
    assert len(picks) == 1


def test_zero_deposit_never_selected():
    oracles = pool(10)
    oracles[4] = Oracle("o4", deposit=0)
    for seed in range(1000):
        assert "o4" not in {o.id for o in select_oracles(oracles, 5, random.Random(seed))}


def test_selection_errors():
    with pytest.raises(CommitteeTooLarge):
        select_oracles(pool(3), 4, random.Random(0))
    with pytest.raises(NoEligibleOracles):
        select_oracles(pool(3, deposit=0), 1, random.Random(0))


def test_selection_roughly_uniform():
    counts = {f"o{k}": 0 for k in range(10)}
    for seed in range(3000):
        for o in select_oracles(pool(10), 3, random.Random(seed)):
            counts[o.id] += 1
    # each oracle expected in 900 committees
    assert all(abs(c - 900) < 120 for c in counts.values())


# submissions


def test_calibrated_submissions_follow_both_branches():
    o = Oracle("o0", F(9, 10))
    assert oracle_submit(o, claim_with({}, True, ["o0"]), random.Random(0)) == F(9, 10)
    assert oracle_submit(o, claim_with({}, False, ["o0"]), random.Random(0)) == F(1, 10)
    assert submission_probability(F(7, 10), True) == F(7, 10)
    assert submission_probability(F(7, 10), False) == F(3, 10)


def test_adversarial_reverses():
    o = Oracle("o0", F(9, 10), Behavior.ADVERSARIAL)
    assert oracle_submit(o, claim_with({}, True, ["o0"]), random.Random(0)) == F(1, 10)
    assert oracle_submit(o, claim_with({}, False, ["o0"]), random.Random(0)) == F(9, 10)


def test_noisy_oracle_right_at_rate_q():
    o = Oracle("o0", F(4, 5), Behavior.NOISY)
    claim = claim_with({}, True, ["o0"])
    rng = random.Random(11)
    right = sum(oracle_submit(o, claim, rng) == F(4, 5) for _ in range(10_000))
    assert abs(right / 10_000 - 0.8) < 0.02


def test_submission_guards():
    claim = open_claim("c", True, 0, 3, pool(2))
    with pytest.raises(NotSelected):
        oracle_submit(Oracle("zz"), claim, random.Random(0))
    with pytest.raises(DeadlinePassed):
        oracle_submit(Oracle("o0"), claim, random.Random(0), now=4)
    with pytest.raises(DeadlinePassed):
        record_submission(claim, "o0", F(1, 2), 4)
    assert record_submission(claim, "o0", F(1, 2), 3).submissions == {"o0": F(1, 2)}


# trust weights


def test_trust_weight_cases():
    assert trust_weight(Oracle("a")) == F(1, 2)
    assert trust_weight(Oracle("a", correct_count=7, total_count=10)) == F(7, 10)
    assert trust_weight(Oracle("a", correct_count=8, total_count=11)) == F(8, 11)
    with pytest.raises(ValueError):
        Oracle("a", correct_count=3, total_count=2)


# aggregation


def test_single_full_confidence_oracle():
    d = aggregate_verdict(claim_with({"o0": 1}), {"o0": Oracle("o0", correct_count=1, total_count=1)})
    assert (d.aggregate, d.outcome, d.verdict) == (1, Outcome.VALID, True)


def test_exact_zero_delegates_to_lower_id_on_equal_weight():
    oracles = {"o1": Oracle("o1", correct_count=1, total_count=2), "o2": Oracle("o2", correct_count=1, total_count=2)}
    d = aggregate_verdict(claim_with({"o1": 1, "o2": 0}), oracles)
    assert d.aggregate == 0 and d.outcome is Outcome.UNDEFINED
    assert d.delegate == "o1" and d.verdict is True


def test_exact_zero_delegates_to_highest_trust():
    oracles = {
        "a": Oracle("a", correct_count=1, total_count=2),
        "b": Oracle("b", correct_count=3, total_count=4),
        "c": Oracle("c", correct_count=1, total_count=4),
    }
    # 1/2*(+1) + 3/4*(-1) + 1/4*(+1) = 0
    d = aggregate_verdict(claim_with({"a": 1, "b": 0, "c": 1}), oracles)
    assert d.outcome is Outcome.UNDEFINED and d.delegate == "b" and d.verdict is False


def test_weighted_sum_hand_computed():
    oracles = {
        "o0": Oracle("o0", correct_count=9, total_count=10),
        "o1": Oracle("o1", correct_count=1, total_count=2),
        "o2": Oracle("o2", correct_count=1, total_count=2),
    }
    d = aggregate_verdict(claim_with({"o0": F(2, 10), "o1": F(9, 10), "o2": F(9, 10)}), oracles)
    assert d.aggregate == F(26, 100)
    assert d.outcome is Outcome.VALID


def test_strictly_negative_is_false():
    d = aggregate_verdict(claim_with({"o0": F(1, 10)}), {"o0": Oracle("o0")})
    assert d.aggregate == F(-2, 5) and d.outcome is Outcome.FALSE and d.verdict is False


def test_no_submissions_unresolvable():
    d = aggregate_verdict(claim_with({}, committee=["o0"]), {"o0": Oracle("o0")}, now=10)
    assert d.outcome is Outcome.UNRESOLVABLE and d.verdict is None


def test_not_ready_before_deadline():
    claim = claim_with({"o0": 1}, committee=["o0", "o1"])
    with pytest.raises(ClaimNotReady):
        aggregate_verdict(claim, {"o0": Oracle("o0"), "o1": Oracle("o1")}, now=5)
    assert aggregate_verdict(claim, {"o0": Oracle("o0"), "o1": Oracle("o1")}, now=10).outcome is Outcome.VALID


@settings(max_examples=300, deadline=None)
@given(
    st.lists(st.tuples(st.fractions(0, 1, max_denominator=20), st.integers(0, 6), st.integers(0, 6)),
             min_size=1, max_size=7),
    st.fractions(F(1, 50), 1, max_denominator=50),
)
def test_positive_scaling_never_changes_outcome(entries, c):
    oracles, subs, scaled = {}, {}, {}
    for k, (s, a, extra) in enumerate(entries):
        oid = f"o{k}"
        oracles[oid] = Oracle(oid, correct_count=a, total_count=a + extra)
        subs[oid] = s
        scaled[oid] = F(1, 2) + c * (s - F(1, 2))  # signed score scaled by c
    base = aggregate_verdict(claim_with(subs), oracles)
    other = aggregate_verdict(claim_with(scaled), oracles)
    assert other.aggregate == c * base.aggregate
    assert (base.outcome, base.delegate, base.verdict) == (other.outcome, other.delegate, other.verdict)


def test_signed_score_range():
    assert signed_score(0) == -1 and signed_score(1) == 1 and signed_score(F(1, 2)) == 0


# settlement


def test_settle_matching_and_mismatching():
    oracles = {
        "o0": Oracle("o0", deposit=10, correct_count=3, total_count=4),
        "o1": Oracle("o1", deposit=10, correct_count=3, total_count=4),
    }
    ledger = staked_ledger(oracles.values())
    claim = claim_with({"o0": F(9, 10), "o1": F(1, 10)})
    decision = aggregate_verdict(claim, {**oracles, "o0": Oracle("o0", correct_count=9, total_count=10)})
    assert decision.outcome is Outcome.VALID
    new, after, settlement = settle_claim(decision, claim, oracles, ledger, SCHEDULE)
    assert (new["o0"].correct_count, new["o0"].total_count) == (4, 5)
    assert after.balance("o0") == 1 and after.escrowed("o0") == 10
    assert (new["o1"].correct_count, new["o1"].total_count) == (3, 5)
    assert after.escrowed("o1") == 0 and new["o1"].deposit == 0
    assert settlement.report.minted == 1 and settlement.report.burned == 10
    assert after.conservation_residual == 0
    with pytest.raises(AlreadySettled):
        settle_claim(decision, claim, new, after, SCHEDULE)


def test_settle_undefined_changes_nothing():
    oracles = {"o1": Oracle("o1", deposit=10, correct_count=1, total_count=2),
               "o2": Oracle("o2", deposit=10, correct_count=1, total_count=2)}
    ledger = staked_ledger(oracles.values())
    claim = claim_with({"o1": 1, "o2": 0})
    decision = aggregate_verdict(claim, oracles)
    new, after, settlement = settle_claim(decision, claim, oracles, ledger, SCHEDULE)
    assert new == oracles
    assert dict(after.balances) == dict(ledger.balances) and dict(after.escrow) == dict(ledger.escrow)
    assert settlement.report.entries == () and settlement.updates == ()


def test_half_submission_never_matches():
    oracles = {"o0": Oracle("o0", deposit=10), "o1": Oracle("o1", deposit=10)}
    ledger = staked_ledger(oracles.values())
    claim = claim_with({"o0": 1, "o1": F(1, 2)})
    decision = aggregate_verdict(claim, oracles)
    new, _, _ = settle_claim(decision, claim, oracles, ledger, SCHEDULE)
    assert (new["o1"].correct_count, new["o1"].total_count) == (0, 1)


def test_trust_weight_equals_match_fraction_over_many_claims():
    rng = random.Random(8)
    oracles = {f"o{k}": Oracle(f"o{k}", F(3, 4), Behavior.NOISY, deposit=10) for k in range(5)}
    ledger = StakeLedger()
    for oid in oracles:
        ledger = place_deposit(endow(ledger, oid, 10**6), oid, 10)
    matched = {oid: 0 for oid in oracles}
    took_part = {oid: 0 for oid in oracles}
    schedule = RewardSchedule(1, (1,), penalty_fraction=F(1, 10))
    for k in range(300):
        claim = open_claim(f"c{k}", rng.random() < 0.5, k, 0, list(oracles.values()))
        for oid in claim.committee:
            claim = record_submission(claim, oid, oracle_submit(oracles[oid], claim, rng), k)
        decision = aggregate_verdict(claim, oracles, k)
        oracles, ledger, settlement = settle_claim(decision, claim, oracles, ledger, schedule)
        for u in settlement.updates:
            took_part[u.oracle] += 1
            matched[u.oracle] += u.matched
        for oid, o in oracles.items():
            assert 0 <= trust_weight(o) <= 1 and o.correct_count <= o.total_count
    for oid, o in oracles.items():
        assert trust_weight(o) == F(matched[oid], took_part[oid])
