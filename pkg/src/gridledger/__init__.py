"""Peer-to-peer energy trading on a minimal proof-of-work blockchain."""

from .chain import (
    Block,
    Chain,
    GENESIS,
    GENESIS_HASH,
    Transaction,
    canonical_serialize,
    hash_block,
    proof_of_work,
    tamper_scan,
    valid_proof,
    validate_chain,
)
from .consensus import PeerSet, ResolutionOutcome, arbitrate_equal_length, resolve_conflicts
from .market import BuyRequest, MarketConfig, OrderBook, SellOffer, TradeFill, fills_to_transactions
from .service import NodeState, create_app

__version__ = "0.1.0"

__all__ = [
    "Block",
    "Chain",
    "GENESIS",
    "GENESIS_HASH",
    "Transaction",
    "canonical_serialize",
    "hash_block",
    "proof_of_work",
    "tamper_scan",
    "valid_proof",
    "validate_chain",
    "PeerSet",
    "ResolutionOutcome",
    "arbitrate_equal_length",
    "resolve_conflicts",
    "BuyRequest",
    "MarketConfig",
    "OrderBook",
    "SellOffer",
    "TradeFill",
    "fills_to_transactions",
    "NodeState",
    "create_app",
    "__version__",
]
