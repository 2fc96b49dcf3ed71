# # Deposits, rewards and penalties
#
# Every voter escrows a deposit. Voters who agree with their cluster's verdict
# get the deposit back plus an equal share of the cluster's reward. The rest
# lose a fraction of the deposit.

# %%

from fractions import Fraction

from shardledger.ledger import Transaction, digest
from shardledger.rewards import RewardSchedule, StakeLedger, endow, node_reward, place_deposit, settle_round
from shardledger.shard import AlwaysFlip, Honest, MasterCluster, SlaveDevice, verify_transaction

print("1000 split over 100 nodes, no deposit:", node_reward(1000, 100, 0))

# %%

devices = [SlaveDevice(f"d{k}", 0, AlwaysFlip() if k == 0 else Honest(), Fraction(2)) for k in range(4)]
ledger = StakeLedger()
for d in devices:
    ledger = place_deposit(endow(ledger, d.id, 10), d.id, d.deposit)

tx = Transaction(digest(b"pay"), b"payload", True)
ver = verify_transaction(tx, [MasterCluster(0, tuple(devices))], seed=0)
schedule = RewardSchedule(9, (9,), penalty_fraction=Fraction(1, 2))
ledger, report = settle_round(ledger, schedule, ver)
for e in report.entries:
    print(e.participant, e.kind, e.amount)
print("balances", {k: str(v) for k, v in ledger.balances.items()})
print("conservation residual", ledger.conservation_residual)
