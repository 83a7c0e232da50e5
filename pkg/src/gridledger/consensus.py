"""Peer registration, longest-valid-chain resolution and the reference arbiter.

Longest-chain resolution handles missing data (a node that lost blocks);
equal-length divergence cannot be decided by length alone, so a trusted
snapshot breaks the tie block by block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from urllib.parse import urlsplit

import httpx

from .chain import Block, Chain, DEFAULT_DIFFICULTY, hash_block, validate_chain
from .wire import WireFormatError, parse_chain_payload

__all__ = [
    "PeerError",
    "UnresolvableConflictError",
    "ResolutionOutcome",
    "REPLACED_MESSAGE",
    "AUTHORITATIVE_MESSAGE",
    "normalize_address",
    "PeerSet",
    "fetch_peer_chains",
    "resolve_conflicts",
    "arbitrate_equal_length",
]

REPLACED_MESSAGE = "our chain was replaced"
AUTHORITATIVE_MESSAGE = "our chain is authoritative"

FETCH_TIMEOUT_SECONDS = 5.0


class PeerError(ValueError):
    """Raised for malformed peer addresses."""


class UnresolvableConflictError(Exception):
    """Neither conflicting chain matches the trusted reference."""


def normalize_address(address: str) -> str:
    """Canonical base URL (scheme://host:port) for a peer node."""
    parts = urlsplit(address.strip())
    if parts.scheme not in ("http", "https") or not parts.hostname:
        raise PeerError(f"not a valid node address: {address!r}")
    port = parts.port or (443 if parts.scheme == "https" else 80)
    return f"{parts.scheme}://{parts.hostname}:{port}"


@dataclass
class PeerSet:
    """Registered neighbor addresses, unique and in registration order."""

    self_address: str | None = None
    _peers: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.self_address is not None:
            self.self_address = normalize_address(self.self_address)

    def register(self, address: str) -> str | None:
        """Add one peer; idempotent. Returns the normalized address, or None for self."""
        normalized = normalize_address(address)
        if normalized == self.self_address:
            return None
        if normalized not in self._peers:
            self._peers.append(normalized)
        return normalized

    def addresses(self) -> list[str]:
        return list(self._peers)

    def __len__(self) -> int:
        return len(self._peers)

    def __contains__(self, address: str) -> bool:
        return address in self._peers


@dataclass
class ResolutionOutcome:
    replaced: bool
    message: str
    chain: list[Block]


def fetch_peer_chains(addresses: list[str], timeout: float = FETCH_TIMEOUT_SECONDS) -> list[list[Block]]:
    """GET /chain from each peer in order; unreachable or malformed peers are skipped."""
    chains: list[list[Block]] = []
    for address in addresses:
        try:
            response = httpx.get(f"{address}/chain", timeout=timeout)
            response.raise_for_status()
            chains.append(parse_chain_payload(response.content))
        except (httpx.HTTPError, WireFormatError):
            continue
    return chains


def resolve_conflicts(
    local: Chain,
    peer_chains: list[list[Block]],
    difficulty: int = DEFAULT_DIFFICULTY,
) -> ResolutionOutcome:
    """Adopt the longest valid peer chain that is strictly longer than ours.

    Equally long peers never replace the local chain (that conflict goes to
    the arbiter). Ties between longer candidates keep the first one fetched.
    Adoption drops mempool entries the new chain already confirmed.
    """
    best: list[Block] | None = None
    for candidate in peer_chains:
        if len(candidate) <= len(local.blocks):
            continue
        if best is not None and len(candidate) <= len(best):
            continue
        if validate_chain(candidate, difficulty):
            best = candidate
    if best is None:
        return ResolutionOutcome(False, AUTHORITATIVE_MESSAGE, list(local.blocks))
    local.adopt(best)
    return ResolutionOutcome(True, REPLACED_MESSAGE, list(local.blocks))


def _matches_reference(candidate: list[Block], reference: list[Block]) -> bool:
    return all(hash_block(candidate[k]) == hash_block(reference[k]) for k in range(len(candidate)))


def arbitrate_equal_length(
    local: list[Block],
    rival: list[Block],
    reference: list[Block],
) -> list[Block]:
    """Choose between two equally long chains using a trusted snapshot.

    Returns whichever chain matches the reference block-for-block over its
    length; identical chains resolve to the local one. Raises when neither
    matches — the caller must escalate rather than guess.
    """
    if len(local) != len(rival):
        raise ValueError("arbitration requires equally long chains")
    if len(reference) < len(local):
        raise ValueError("reference snapshot is shorter than the conflicting chains")
    if _matches_reference(local, reference):
        return local
    if _matches_reference(rival, reference):
        return rival
    raise UnresolvableConflictError("neither chain matches the trusted reference")
