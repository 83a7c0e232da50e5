"""Blocks, transactions, proof-of-work and chain validation.

Energy amounts are integer milli-kWh and timestamps are integer
microseconds throughout; floats never enter the hashed representation, so
digests are reproducible across platforms.
"""

from __future__ import annotations

import hashlib
import json
import re
import secrets
import time
from dataclasses import dataclass, field, replace

__all__ = [
    "ChainError",
    "TransactionError",
    "InvalidProofError",
    "Transaction",
    "Block",
    "Chain",
    "GENESIS",
    "GENESIS_HASH",
    "COINBASE_SENDER",
    "COINBASE_REWARD_MILLI",
    "DEFAULT_DIFFICULTY",
    "canonical_serialize",
    "hash_block",
    "valid_proof",
    "proof_of_work",
    "validate_chain",
    "tamper_scan",
    "format_timestamp",
    "new_node_id",
    "is_node_id",
    "mutate_transaction_amount",
]

DEFAULT_DIFFICULTY = 4
COINBASE_SENDER = "0"
COINBASE_REWARD_MILLI = 1000  # 1 kWh credit per mined block

_HASH_RE = re.compile(r"^[0-9a-f]{64}$")
_NODE_ID_RE = re.compile(r"^[0-9a-f]{32}$")


class ChainError(Exception):
    """Base error for chain operations."""


class TransactionError(ChainError):
    """Raised when a transaction violates its invariants."""


class InvalidProofError(ChainError):
    """Raised when a block is forged with a proof that fails verification."""


@dataclass(frozen=True)
class Transaction:
    """A single energy transfer; amount is milli-kWh."""

    sender: str
    recipient: str
    amount_milli: int

    def __post_init__(self):
        if not self.sender or not self.recipient:
            raise TransactionError("sender and recipient must be non-empty")
        if not isinstance(self.amount_milli, int) or self.amount_milli <= 0:
            raise TransactionError("amount must be a positive number of milli-kWh")
        if self.sender == self.recipient:
            raise TransactionError("a party never trades with itself")


@dataclass(frozen=True)
class Block:
    """One block: 1-based index, microsecond timestamp, transactions, nonce, link."""

    index: int
    timestamp_micros: int
    transactions: tuple[Transaction, ...]
    proof: int
    previous_hash: str

    def __post_init__(self):
        if self.index < 1:
            raise ChainError("block index must be >= 1")
        if self.proof < 0:
            raise ChainError("proof must be non-negative")
        if self.timestamp_micros < 0:
            raise ChainError("timestamp must not be negative")
        if self.previous_hash != "1" and not _HASH_RE.match(self.previous_hash):
            raise ChainError("previous_hash must be '1' or 64 lowercase hex chars")
        if (self.index == 1) != (self.previous_hash == "1"):
            raise ChainError("previous_hash '1' is reserved for the genesis block")


# The genesis block is a shared constant (fixed timestamp included) so every
# node starts from the same digest.
GENESIS = Block(index=1, timestamp_micros=0, transactions=(), proof=100, previous_hash="1")


def format_timestamp(micros: int) -> str:
    """Render microseconds since epoch as seconds with exactly 6 fraction digits."""
    return f"{micros // 1_000_000}.{micros % 1_000_000:06d}"


def canonical_serialize(block: Block) -> bytes:
    """Deterministic UTF-8 JSON bytes of a block, used as the hash input.

    Keys are sorted, whitespace is stripped, amounts stay integer milli-kWh
    and the timestamp is a fixed 6-fraction-digit decimal string, so equal
    blocks serialize identically everywhere.
    """
    obj = {
        "index": block.index,
        "previous_hash": block.previous_hash,
        "proof": block.proof,
        "timestamp": format_timestamp(block.timestamp_micros),
        "transactions": [
            {"amount": tx.amount_milli, "recipient": tx.recipient, "sender": tx.sender}
            for tx in block.transactions
        ],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def hash_block(block: Block) -> str:
    return hashlib.sha256(canonical_serialize(block)).hexdigest()


GENESIS_HASH = hash_block(GENESIS)


def valid_proof(last_proof: int, proof: int, last_hash: str, difficulty: int = DEFAULT_DIFFICULTY) -> bool:
    """True iff sha256(decimal(last_proof) + decimal(proof) + last_hash) has the required zero prefix."""
    guess = f"{last_proof}{proof}{last_hash}".encode("utf-8")
    return hashlib.sha256(guess).hexdigest().startswith("0" * difficulty)


def proof_of_work(last_block: Block, difficulty: int = DEFAULT_DIFFICULTY) -> int:
    """Smallest proof >= 0 valid against the last block; search starts at 0."""
    last_hash = hash_block(last_block)
    proof = 0
    while not valid_proof(last_block.proof, proof, last_hash, difficulty):
        proof += 1
    return proof


def _link_ok(prev: Block, cur: Block, difficulty: int) -> bool:
    return (
        cur.index == prev.index + 1
        and cur.previous_hash == hash_block(prev)
        and valid_proof(prev.proof, cur.proof, cur.previous_hash, difficulty)
    )


def validate_chain(blocks: list[Block], difficulty: int = DEFAULT_DIFFICULTY) -> bool:
    """True iff blocks[0] is the fixed genesis and every link and proof checks out."""
    if not blocks or hash_block(blocks[0]) != GENESIS_HASH:
        return False
    return all(_link_ok(blocks[k - 1], blocks[k], difficulty) for k in range(1, len(blocks)))


def tamper_scan(blocks: list[Block], difficulty: int = DEFAULT_DIFFICULTY) -> int | None:
    """Index of the first block at which validation fails, or None if fully valid.

    Everything at and after the returned index is considered broken; a
    mutation in a non-tip block surfaces at the following block, whose
    stored link no longer matches.
    """
    if not blocks or hash_block(blocks[0]) != GENESIS_HASH:
        return 1
    for k in range(1, len(blocks)):
        if not _link_ok(blocks[k - 1], blocks[k], difficulty):
            return blocks[k].index
    return None


def new_node_id() -> str:
    """128 random bits as 32 lowercase hex chars."""
    return secrets.token_hex(16)


def is_node_id(value: str) -> bool:
    return bool(_NODE_ID_RE.match(value))


def _now_micros() -> int:
    return time.time_ns() // 1000


@dataclass
class Chain:
    """A node's chain plus its pending-transaction mempool.

    Mutations (new_transaction, forge_block, adopt) must be serialized by
    the caller; one logical writer at a time.
    """

    node_id: str = field(default_factory=new_node_id)
    blocks: list[Block] = field(default_factory=lambda: [GENESIS])
    mempool: list[Transaction] = field(default_factory=list)

    @property
    def last_block(self) -> Block:
        return self.blocks[-1]

    def __len__(self) -> int:
        return len(self.blocks)

    def new_transaction(self, tx: Transaction) -> int:
        """Queue a transaction; returns the index of the block that will absorb it."""
        self.mempool.append(tx)
        return self.last_block.index + 1

    def forge_block(self, proof: int, difficulty: int = DEFAULT_DIFFICULTY) -> Block:
        """Move the whole mempool into a new block linked to the current tip.

        The mining flow appends the coinbase transaction before calling this.
        """
        last = self.last_block
        last_hash = hash_block(last)
        if not valid_proof(last.proof, proof, last_hash, difficulty):
            raise InvalidProofError(f"proof {proof} does not satisfy the difficulty target")
        block = Block(
            index=last.index + 1,
            timestamp_micros=_now_micros(),
            transactions=tuple(self.mempool),
            proof=proof,
            previous_hash=last_hash,
        )
        self.blocks.append(block)
        self.mempool = []
        return block

    def adopt(self, blocks: list[Block]) -> None:
        """Replace the local chain, dropping mempool entries the new chain already contains."""
        confirmed = {tx for b in blocks for tx in b.transactions}
        self.blocks = list(blocks)
        self.mempool = [tx for tx in self.mempool if tx not in confirmed]


def mutate_transaction_amount(block: Block, tx_index: int, new_amount_milli: int) -> Block:
    """Copy of the block with one transaction amount rewritten (no re-mining).

    Fault-injection helper: the result keeps its stored proof and link, so
    the successor block's previous_hash no longer matches.
    """
    txs = list(block.transactions)
    txs[tx_index] = replace(txs[tx_index], amount_milli=new_amount_milli)
    return replace(block, transactions=tuple(txs))
