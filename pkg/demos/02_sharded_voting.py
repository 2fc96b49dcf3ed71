# # Sharded verification and the one-third bound
#
# A transaction is cut into one portion per master cluster. Each cluster's
# devices vote 0 or 1 on their portion. A portion passes when the mean vote
# reaches 2/3.

# %%

from shardledger.ledger import Transaction, digest
from shardledger.shard import AlwaysFlip, Honest, MasterCluster, SlaveDevice, partition_transaction, verify_transaction


def cluster(j, n, liars):
    return MasterCluster(j, tuple(SlaveDevice(f"c{j}-{k}", j, AlwaysFlip() if k < liars else Honest()) for k in range(n)))


tx = Transaction(digest(b"demo"), bytes(range(100)), ground_truth_valid=True)
for p in partition_transaction(tx, 3):
    print("cluster", p.cluster_index, "bytes", p.offset, "..", p.offset + p.length)

# %% [markdown]
# Nine devices tolerate three liars. The fourth one tips a valid portion into
# rejection.

# %%

for liars in range(6):
    v = verify_transaction(tx, [cluster(0, 9, liars)], seed=1)
    r = v.results[0]
    print(f"{liars} liars: score {r.score}  accepted {r.accepted}")
