"""HTTP node: chain, mining, transaction, peer and market endpoints.

One process per node. All state mutations go through a single lock; chain
payloads are rendered with the deterministic wire serializer so two nodes
holding the same chain return byte-identical /chain bodies.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .chain import (
    COINBASE_REWARD_MILLI,
    COINBASE_SENDER,
    Chain,
    DEFAULT_DIFFICULTY,
    Transaction,
    TransactionError,
    mutate_transaction_amount,
    new_node_id,
    proof_of_work,
)
from .consensus import (
    AUTHORITATIVE_MESSAGE,
    PeerError,
    PeerSet,
    REPLACED_MESSAGE,
    UnresolvableConflictError,
    arbitrate_equal_length,
    fetch_peer_chains,
    resolve_conflicts,
)
from .market import (
    BuyRequest,
    InsufficientSupplyError,
    MarketConfig,
    OfferValidationError,
    OrderBook,
    TradeFill,
    fills_to_transactions,
)
from .wire import (
    RawNumber,
    WireFormatError,
    block_to_wire,
    chain_payload_bytes,
    dumps_wire,
    format_milli,
    kwh_to_milli,
    parse_chain_payload,
)

__all__ = ["NodeState", "ApiError", "create_app"]


class ApiError(Exception):
    """Maps to a JSON {"error": reason} response with a 400-class status."""

    def __init__(self, reason: str, status_code: int = 400):
        super().__init__(reason)
        self.reason = reason
        self.status_code = status_code


@dataclass
class NodeState:
    """Everything one node owns: chain, peers, order book and config."""

    chain: Chain
    peers: PeerSet
    book: OrderBook
    config: MarketConfig
    difficulty: int = DEFAULT_DIFFICULTY
    lock: threading.RLock = field(default_factory=threading.RLock)

    @property
    def node_id(self) -> str:
        return self.chain.node_id

    @classmethod
    def create(
        cls,
        *,
        address: str | None = None,
        node_id: str | None = None,
        ppu_cap_milli: int = 10_000,
        max_demand_milli: int = 1_000_000,
        book_path: str | Path = "energydemand.csv",
        difficulty: int = DEFAULT_DIFFICULTY,
    ) -> "NodeState":
        config = MarketConfig(ppu_cap_milli=ppu_cap_milli, max_demand_milli=max_demand_milli)
        return cls(
            chain=Chain(node_id=node_id or new_node_id()),
            peers=PeerSet(self_address=address),
            book=OrderBook.open(config, book_path),
            config=config,
            difficulty=difficulty,
        )


class TransactionIn(BaseModel):
    sender: str
    recipient: str
    amount: float | int


class RegisterIn(BaseModel):
    nodes: list[str]


class SellIn(BaseModel):
    seller: str
    ppu: float | int
    units: float | int


class BuyIn(BaseModel):
    buyer: str
    units: float | int


class TruncateIn(BaseModel):
    keep_blocks: int


class MutateIn(BaseModel):
    block_index: int
    tx_index: int
    new_amount: float | int


def _wire_response(payload: dict, status_code: int = 200) -> Response:
    return Response(
        content=dumps_wire(payload), media_type="application/json", status_code=status_code
    )


def _fill_to_wire(fill: TradeFill) -> dict:
    return {
        "seller": fill.seller,
        "buyer": fill.buyer,
        "units": RawNumber(format_milli(fill.units_milli)),
        "ppu": RawNumber(format_milli(fill.ppu_milli)),
        "cost": RawNumber(_format_micro(fill.cost_micro)),
    }


def _format_micro(value_micro: int) -> str:
    whole, frac = divmod(value_micro, 1_000_000)
    text = f"{frac:06d}".rstrip("0") or "0"
    return f"{whole}.{text}"


def create_app(state: NodeState, test_hooks: bool = False) -> FastAPI:
    app = FastAPI(title="gridledger node", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    app.state.node = state

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code, content={"error": exc.reason})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"] if p != "body")
        return JSONResponse(status_code=400, content={"error": f"{where}: {first['msg']}"})

    @app.get("/chain")
    def get_chain() -> Response:
        with state.lock:
            body = chain_payload_bytes(state.chain.blocks)
        return Response(content=body, media_type="application/json")

    @app.get("/mine")
    def mine() -> Response:
        with state.lock:
            proof = proof_of_work(state.chain.last_block, state.difficulty)
            state.chain.new_transaction(
                Transaction(
                    sender=COINBASE_SENDER,
                    recipient=state.node_id,
                    amount_milli=COINBASE_REWARD_MILLI,
                )
            )
            block = state.chain.forge_block(proof, state.difficulty)
        payload = {"message": "New block forged"}
        payload.update(block_to_wire(block))
        return _wire_response(payload)

    @app.post("/transactions/new")
    def new_transaction(body: TransactionIn):
        try:
            tx = Transaction(
                sender=body.sender,
                recipient=body.recipient,
                amount_milli=kwh_to_milli(body.amount),
            )
        except (TransactionError, WireFormatError) as exc:
            raise ApiError(str(exc)) from exc
        with state.lock:
            index = state.chain.new_transaction(tx)
        return {"message": f"Transaction will be added to Block {index}"}

    @app.post("/nodes/register")
    def register_nodes(body: RegisterIn):
        if not body.nodes:
            raise ApiError("supply at least one node address")
        with state.lock:
            for address in body.nodes:
                try:
                    state.peers.register(address)
                except PeerError as exc:
                    raise ApiError(str(exc)) from exc
            peers = state.peers.addresses()
        return {"message": "Nodes registered", "total_nodes": peers}

    @app.get("/nodes/resolve")
    def resolve() -> Response:
        with state.lock:
            addresses = state.peers.addresses()
        # peer fetches happen outside the lock; adoption is the atomic part
        candidates = fetch_peer_chains(addresses)
        with state.lock:
            outcome = resolve_conflicts(state.chain, candidates, state.difficulty)
            blocks = [block_to_wire(b) for b in outcome.chain]
        key = "new_chain" if outcome.replaced else "chain"
        return _wire_response({"message": outcome.message, key: blocks})

    @app.post("/nodes/arbitrate")
    async def arbitrate(request: Request) -> Response:
        raw = await request.body()
        return await run_in_threadpool(_arbitrate, state, raw)

    @app.get("/market/table")
    def market_table() -> Response:
        with state.lock:
            rows = state.book.table_rows()
        offers = [
            {
                "index": r["index"],
                "seller": r["seller"],
                "ppu": RawNumber(format_milli(r["ppu"])),
                "units": RawNumber(format_milli(r["units"])),
            }
            for r in rows
        ]
        return _wire_response({"offers": offers})

    @app.post("/market/sell")
    def market_sell(body: SellIn) -> Response:
        try:
            ppu = kwh_to_milli(body.ppu, "ppu")
            units = kwh_to_milli(body.units, "units")
            with state.lock:
                offer = state.book.post_offer(body.seller, ppu, units)
                index = len(state.book.offers)
        except (OfferValidationError, WireFormatError) as exc:
            raise ApiError(str(exc)) from exc
        return _wire_response(
            {
                "message": "Offer posted",
                "offer": {
                    "index": index,
                    "seller": offer.seller,
                    "ppu": RawNumber(format_milli(offer.ppu_milli)),
                    "units": RawNumber(format_milli(offer.units_milli)),
                },
            }
        )

    @app.post("/market/buy")
    def market_buy(body: BuyIn) -> Response:
        try:
            units = kwh_to_milli(body.units, "units")
            with state.lock:
                fills = state.book.match_buy(BuyRequest(buyer=body.buyer, units_milli=units))
                for tx in fills_to_transactions(fills):
                    state.chain.new_transaction(tx)
        except (OfferValidationError, InsufficientSupplyError, WireFormatError) as exc:
            raise ApiError(str(exc)) from exc
        total = sum(f.cost_micro for f in fills)
        return _wire_response(
            {
                "message": f"Matched {len(fills)} offer(s)",
                "fills": [_fill_to_wire(f) for f in fills],
                "total_cost": RawNumber(_format_micro(total)),
            }
        )

    if test_hooks:
        _install_test_hooks(app, state)
    return app


def _arbitrate(state: NodeState, raw: bytes) -> Response:
    try:
        reference = parse_chain_payload(raw)
    except WireFormatError as exc:
        raise ApiError(f"bad reference snapshot: {exc}") from exc
    with state.lock:
        addresses = state.peers.addresses()
    candidates = fetch_peer_chains(addresses)
    with state.lock:
        local = list(state.chain.blocks)
        rival = next((c for c in candidates if len(c) == len(local) and c != local), None)
        if len(reference) < len(local):
            raise ApiError("reference snapshot is shorter than the local chain")
        try:
            if rival is None:
                chosen = arbitrate_equal_length(local, local, reference)
            else:
                chosen = arbitrate_equal_length(local, rival, reference)
        except UnresolvableConflictError as exc:
            raise ApiError(str(exc), status_code=409) from exc
        replaced = chosen is not local
        if replaced:
            state.chain.adopt(chosen)
        blocks = [block_to_wire(b) for b in state.chain.blocks]
    message = REPLACED_MESSAGE if replaced else AUTHORITATIVE_MESSAGE
    key = "new_chain" if replaced else "chain"
    return _wire_response({"message": message, key: blocks})


def _install_test_hooks(app: FastAPI, state: NodeState) -> None:
    """Fault-injection endpoints; enabled only by the --test-hooks flag."""

    @app.post("/testing/truncate")
    def truncate(body: TruncateIn):
        with state.lock:
            if body.keep_blocks < 1 or body.keep_blocks > len(state.chain.blocks):
                raise ApiError("keep_blocks out of range")
            state.chain.blocks = state.chain.blocks[: body.keep_blocks]
            length = len(state.chain.blocks)
        return {"message": "Chain truncated", "length": length}

    @app.post("/testing/mutate")
    def mutate(body: MutateIn):
        try:
            amount = kwh_to_milli(body.new_amount, "new_amount")
        except WireFormatError as exc:
            raise ApiError(str(exc)) from exc
        if amount <= 0:
            raise ApiError("new_amount must be positive")
        with state.lock:
            if body.block_index < 2 or body.block_index > len(state.chain.blocks):
                raise ApiError("block_index out of range (the genesis block is immutable)")
            block = state.chain.blocks[body.block_index - 1]
            if not 0 <= body.tx_index < len(block.transactions):
                raise ApiError("tx_index out of range")
            state.chain.blocks[body.block_index - 1] = mutate_transaction_amount(
                block, body.tx_index, amount
            )
        return {"message": "Block mutated", "block_index": body.block_index}
