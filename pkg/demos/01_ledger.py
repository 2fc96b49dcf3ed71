# # A hash-linked ledger
#
# Blocks commit to their transactions and to the previous block's hash.
# Changing any byte anywhere breaks the chain at exactly that block.

# %%

from shardledger.ledger import Chain, Decided, append_block, digest, load_dump, validate_chain, validate_serialized

chain = Chain()
for t in range(1, 6):
    txs = [Decided(digest(f"tx-{t}-{k}".encode()), True) for k in range(3)]
    chain = append_block(chain, txs, now=t)
print(len(chain), "blocks, tip", chain.tip.block_hash.hex()[:16])
print(validate_chain(chain))

# %% [markdown]
# The dump format is one line per block: height, a tab, and the hex of the
# canonical block encoding. Flip one byte of block 3 and validate again.

# %%

blobs = load_dump(chain.dump())
damaged = bytearray(blobs[3])
damaged[40] ^= 0x01
blobs[3] = bytes(damaged)
print(validate_serialized(blobs))
