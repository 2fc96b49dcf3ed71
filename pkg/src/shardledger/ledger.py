"""Hash-linked block chain with canonical serialization and tamper detection.

Blocks are encoded as a sequence of length-prefixed fields (4-byte big-endian
length, then the field bytes) in declared order::

    height(8) | prev_hash(32) | transactions | timestamp(8) | block_hash(32)

where ``transactions`` is a 4-byte count followed by ``id(32) verdict(1)``
pairs. The block hash is SHA-256 over the encoding of the first four fields.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence, Tuple

from .errors import EmptyBlock, MalformedBlock, StaleTimestamp

DIGEST_SIZE = 32
ZERO_DIGEST = bytes(DIGEST_SIZE)


def digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True)
class Transaction:
    """A unit of work submitted for sharded verification.

    ``ground_truth_valid`` is simulation-only knowledge: verifiers never read
    it directly, it drives honest votes and the accuracy metrics.
    """

    id: bytes
    payload: bytes = field(repr=False)
    ground_truth_valid: bool
    created_at: int = 0

    def __post_init__(self):
        if len(self.id) != DIGEST_SIZE:
            raise ValueError("transaction id must be 32 bytes")
        if self.created_at < 0:
            raise ValueError("created_at must be non-negative")

    @property
    def payload_digest(self) -> bytes:
        return digest(self.payload)


class Decided(NamedTuple):
    tx: bytes
    verdict: bool


def _field(data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + data


def _encode_txs(txs: Sequence[Decided]) -> bytes:
    body = bytearray(struct.pack(">I", len(txs)))
    for tx_id, verdict in txs:
        body += tx_id + (b"\x01" if verdict else b"\x00")
    return bytes(body)


def _header_bytes(height: int, prev_hash: bytes, txs: Sequence[Decided], timestamp: int) -> bytes:
    return (
        _field(struct.pack(">Q", height))
        + _field(prev_hash)
        + _field(_encode_txs(txs))
        + _field(struct.pack(">Q", timestamp))
    )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    transactions: Tuple[Decided, ...]
    timestamp: int
    block_hash: bytes

    @classmethod
    def build(cls, height: int, prev_hash: bytes, txs: Iterable[Decided], timestamp: int) -> "Block":
        txs = tuple(Decided(bytes(t), bool(v)) for t, v in txs)
        return cls(height, prev_hash, txs, timestamp, digest(_header_bytes(height, prev_hash, txs, timestamp)))

    def compute_hash(self) -> bytes:
        return digest(_header_bytes(self.height, self.prev_hash, self.transactions, self.timestamp))

    def serialize(self) -> bytes:
        return _header_bytes(self.height, self.prev_hash, self.transactions, self.timestamp) + _field(
            self.block_hash
        )

    @classmethod
    def deserialize(cls, data: bytes) -> "Block":
        """Strict inverse of :meth:`serialize`; any deviation raises MalformedBlock."""
        fields = []
        pos = 0
        while pos < len(data):
            if pos + 4 > len(data):
                raise MalformedBlock("truncated length prefix")
            (size,) = struct.unpack_from(">I", data, pos)
            pos += 4
            if pos + size > len(data):
                raise MalformedBlock("field overruns block")
            fields.append(data[pos : pos + size])
            pos += size
        if len(fields) != 5:
            raise MalformedBlock(f"expected 5 fields, found {len(fields)}")
        raw_height, prev_hash, raw_txs, raw_ts, block_hash = fields
        if len(raw_height) != 8 or len(raw_ts) != 8:
            raise MalformedBlock("integer field width")
        if len(prev_hash) != DIGEST_SIZE or len(block_hash) != DIGEST_SIZE:
            raise MalformedBlock("digest field width")
        if len(raw_txs) < 4:
            raise MalformedBlock("transaction list header")
        (count,) = struct.unpack_from(">I", raw_txs, 0)
        if len(raw_txs) != 4 + count * (DIGEST_SIZE + 1):
            raise MalformedBlock("transaction list length")
        txs = []
        for k in range(count):
            off = 4 + k * (DIGEST_SIZE + 1)
            flag = raw_txs[off + DIGEST_SIZE]
            if flag not in (0, 1):
                raise MalformedBlock("verdict byte")
            txs.append(Decided(raw_txs[off : off + DIGEST_SIZE], flag == 1))
        return cls(
            struct.unpack(">Q", raw_height)[0],
            prev_hash,
            tuple(txs),
            struct.unpack(">Q", raw_ts)[0],
            block_hash,
        )


def genesis_block() -> Block:
    return Block.build(0, ZERO_DIGEST, (), 0)


@dataclass(frozen=True)
class Chain:
    blocks: Tuple[Block, ...] = (genesis_block(),)

    @property
    def tip(self) -> Block:
        return self.blocks[-1]

    def __len__(self):
        return len(self.blocks)

    def dump(self) -> str:
        """One line per block: height, tab, hex of the canonical encoding."""
        return "".join(f"{b.height}\t{b.serialize().hex()}\n" for b in self.blocks)


def append_block(chain: Chain, txs: Sequence[Decided], now: int) -> Chain:
    if not txs:
        raise EmptyBlock("a block needs at least one decided transaction")
    tip = chain.tip
    if now < tip.timestamp:
        raise StaleTimestamp(f"timestamp {now} precedes tip timestamp {tip.timestamp}")
    block = Block.build(tip.height + 1, tip.block_hash, txs, now)
    return Chain(chain.blocks + (block,))


class ChainReport(NamedTuple):
    ok: bool
    bad_height: Optional[int] = None
    reason: Optional[str] = None


def validate_chain(chain: Chain) -> ChainReport:
    """Report the first position whose block fails hash, link or height checks."""
    prev = ZERO_DIGEST
    for k, block in enumerate(chain.blocks):
        if block.compute_hash() != block.block_hash:
            return ChainReport(False, k, "hash_mismatch")
        if block.prev_hash != prev:
            return ChainReport(False, k, "link_mismatch")
        if block.height != k:
            return ChainReport(False, k, "height_mismatch")
        prev = block.block_hash
    return ChainReport(True)


def validate_serialized(blobs: Sequence[bytes]) -> ChainReport:
    """Validate a chain given as canonical per-block encodings.

    An encoding that no longer parses is reported at its own position.
    """
    blocks = []
    for k, blob in enumerate(blobs):
        try:
            blocks.append(Block.deserialize(blob))
        except MalformedBlock as exc:
            prefix = validate_chain(Chain(tuple(blocks))) if blocks else ChainReport(True)
            if not prefix.ok:
                return prefix
            return ChainReport(False, k, f"malformed: {exc}")
    return validate_chain(Chain(tuple(blocks)))


def load_dump(text: str) -> list:
    blobs = []
    for line in text.splitlines():
        if line.strip():
            _, hexdata = line.split("\t", 1)
            blobs.append(bytes.fromhex(hexdata))
    return blobs
