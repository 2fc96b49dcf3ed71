# # Trust-weighted oracles
#
# Oracles submit a probability that a piece of data is valid. Each submission
# becomes a signed score 2s - 1, weighted by the oracle's record so far.

# %%

import random
from fractions import Fraction

from shardledger.oracles import Behavior, Oracle, aggregate_verdict, open_claim, oracle_submit, record_submission

oracles = {
    "alice": Oracle("alice", Fraction(9, 10), deposit=5, correct_count=9, total_count=10),
    "bob": Oracle("bob", Fraction(9, 10), deposit=5, correct_count=4, total_count=5),
    "eve": Oracle("eve", Fraction(9, 10), Behavior.ADVERSARIAL, deposit=5, correct_count=1, total_count=4),
}
claim = open_claim("weather", ground_truth=True, now=0, delta_t=2, committee=list(oracles.values()))
rng = random.Random(0)
for o in oracles.values():
    claim = record_submission(claim, o.id, oracle_submit(o, claim, rng), now=0)
print({k: str(v) for k, v in claim.submissions.items()})
d = aggregate_verdict(claim, oracles, now=0)
print(d.outcome.value, "aggregate", d.aggregate)

# %% [markdown]
# Two equally trusted oracles that disagree symmetrically cancel out. The claim
# is then left to the most trusted submitter.

# %%

tie = {
    "p": Oracle("p", deposit=1, correct_count=1, total_count=2),
    "q": Oracle("q", deposit=1, correct_count=1, total_count=2),
    "r": Oracle("r", deposit=1, correct_count=3, total_count=4),
}
claim = open_claim("tie", True, 0, 0, list(tie.values()))
for oid, s in (("p", Fraction(4, 5)), ("q", Fraction(1, 5)), ("r", Fraction(1, 2))):
    claim = record_submission(claim, oid, s, now=0)
d = aggregate_verdict(claim, tie)
print(d.outcome.value, "delegate", d.delegate)
