"""Deterministic JSON wire format for chain payloads.

The /chain response doubles as the snapshot-file format and as the input to
cross-node validation, so rendering must be byte-stable and parsing must
recover amounts and timestamps exactly. Numbers are emitted with pinned
decimal renderings and read back through Decimal, never through binary
floats.
"""

from __future__ import annotations

import json
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from .chain import Block, ChainError, Transaction, TransactionError, format_timestamp

__all__ = [
    "WireFormatError",
    "RawNumber",
    "dumps_wire",
    "format_milli",
    "kwh_to_milli",
    "block_to_wire",
    "block_from_wire",
    "chain_payload_bytes",
    "parse_chain_payload",
    "write_snapshot",
    "read_snapshot",
]


class WireFormatError(ValueError):
    """Raised when an incoming payload does not match the wire contract."""


class RawNumber(str):
    """A pre-rendered numeric JSON token, emitted verbatim by dumps_wire."""


def format_milli(value_milli: int) -> str:
    """Render an integer milli quantity as a decimal with trailing zeros trimmed.

    Keeps at least one fraction digit (8000 -> "8.0") to match the on-chain
    amount rendering.
    """
    whole, frac = divmod(value_milli, 1000)
    text = f"{frac:03d}".rstrip("0") or "0"
    return f"{whole}.{text}"


def _dump(obj: Any, out: list[str]) -> None:
    if isinstance(obj, RawNumber):
        out.append(str(obj))
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif obj is None:
        out.append("null")
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _dump(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _dump(item, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} on the wire")


def dumps_wire(obj: Any) -> bytes:
    """Serialize with sorted keys, no whitespace and pinned number tokens."""
    out: list[str] = []
    _dump(obj, out)
    return "".join(out).encode("utf-8")


def block_to_wire(block: Block) -> dict:
    """Wire dict for a block: amounts in kWh, timestamp with 6 fraction digits."""
    return {
        "index": block.index,
        "previous_hash": block.previous_hash,
        "proof": block.proof,
        "timestamp": RawNumber(format_timestamp(block.timestamp_micros)),
        "transactions": [
            {
                "amount": RawNumber(format_milli(tx.amount_milli)),
                "recipient": tx.recipient,
                "sender": tx.sender,
            }
            for tx in block.transactions
        ],
    }


def _exact_scaled_int(value: Any, scale: int, what: str) -> int:
    """Convert a parsed JSON number to an integer at the given scale, exactly."""
    if isinstance(value, bool) or not isinstance(value, (int, Decimal)):
        raise WireFormatError(f"{what} must be a number")
    scaled = Decimal(value) * scale
    if scaled != scaled.to_integral_value():
        raise WireFormatError(f"{what} exceeds the supported precision")
    return int(scaled)


def _require(obj: dict, key: str, what: str) -> Any:
    if key not in obj:
        raise WireFormatError(f"{what} is missing field '{key}'")
    return obj[key]


def block_from_wire(obj: Any) -> Block:
    if not isinstance(obj, dict):
        raise WireFormatError("block must be a JSON object")
    extra = set(obj) - {"index", "previous_hash", "proof", "timestamp", "transactions"}
    if extra:
        raise WireFormatError(f"block carries unknown fields: {sorted(extra)}")
    index = _require(obj, "index", "block")
    proof = _require(obj, "proof", "block")
    previous_hash = _require(obj, "previous_hash", "block")
    if not isinstance(index, int) or not isinstance(proof, int):
        raise WireFormatError("index and proof must be integers")
    if not isinstance(previous_hash, str):
        raise WireFormatError("previous_hash must be a string")
    timestamp = _exact_scaled_int(_require(obj, "timestamp", "block"), 1_000_000, "timestamp")
    raw_txs = _require(obj, "transactions", "block")
    if not isinstance(raw_txs, list):
        raise WireFormatError("transactions must be a list")
    txs = []
    for raw in raw_txs:
        if not isinstance(raw, dict):
            raise WireFormatError("transaction must be a JSON object")
        sender = _require(raw, "sender", "transaction")
        recipient = _require(raw, "recipient", "transaction")
        if not isinstance(sender, str) or not isinstance(recipient, str):
            raise WireFormatError("transaction parties must be strings")
        amount = _exact_scaled_int(_require(raw, "amount", "transaction"), 1000, "amount")
        try:
            txs.append(Transaction(sender=sender, recipient=recipient, amount_milli=amount))
        except TransactionError as exc:
            raise WireFormatError(str(exc)) from exc
    try:
        return Block(
            index=index,
            timestamp_micros=timestamp,
            transactions=tuple(txs),
            proof=proof,
            previous_hash=previous_hash,
        )
    except ChainError as exc:
        raise WireFormatError(str(exc)) from exc


def chain_payload_bytes(blocks: list[Block]) -> bytes:
    """The GET /chain body: {"chain": [...], "length": N}, byte-stable."""
    return dumps_wire({"chain": [block_to_wire(b) for b in blocks], "length": len(blocks)})


def parse_chain_payload(raw: bytes | str) -> list[Block]:
    try:
        obj = json.loads(raw, parse_float=Decimal)
    except (json.JSONDecodeError, InvalidOperation, UnicodeDecodeError) as exc:
        raise WireFormatError(f"payload is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "chain" not in obj:
        raise WireFormatError("payload must be an object with a 'chain' field")
    raw_chain = obj["chain"]
    if not isinstance(raw_chain, list) or not raw_chain:
        raise WireFormatError("'chain' must be a non-empty list")
    if "length" in obj and obj["length"] != len(raw_chain):
        raise WireFormatError("'length' does not match the number of blocks")
    return [block_from_wire(b) for b in raw_chain]


def write_snapshot(path: str | Path, blocks: list[Block]) -> None:
    Path(path).write_bytes(chain_payload_bytes(blocks))


def read_snapshot(path: str | Path) -> list[Block]:
    return parse_chain_payload(Path(path).read_bytes())


def kwh_to_milli(value: float | int | str | Decimal, what: str = "amount") -> int:
    """Convert a kWh (or price-per-kWh) quantity to integer milli units.

    Accepts what JSON clients send; rejects anything finer than milli
    precision instead of rounding silently.
    """
    try:
        dec = Decimal(str(value))
    except InvalidOperation as exc:
        raise WireFormatError(f"{what} is not a number") from exc
    scaled = dec * 1000
    if scaled != scaled.to_integral_value():
        raise WireFormatError(f"{what} must have at most 3 decimal places")
    return int(scaled)
