import contextlib
from pathlib import Path

import pytest

from gridledger.chain import Chain, Transaction, proof_of_work
from gridledger.harness import NodeProcess, free_port
from gridledger.market import MarketConfig


@pytest.fixture
def market_config() -> MarketConfig:
    return MarketConfig(ppu_cap_milli=10_000, max_demand_milli=1_000_000)


def build_chain(num_blocks: int, difficulty: int = 1, node_id: str | None = None) -> Chain:
    """A valid chain of the given length, one trade plus coinbase per block."""
    chain = Chain(node_id=node_id or "ab" * 16)
    while len(chain.blocks) < num_blocks:
        chain.new_transaction(
            Transaction("Buyer Person", "Seller Person", 1000 * len(chain.blocks))
        )
        chain.new_transaction(Transaction("0", chain.node_id, 1000))
        chain.forge_block(proof_of_work(chain.last_block, difficulty), difficulty)
    return chain


@contextlib.contextmanager
def start_nodes(
    workdir: Path,
    count: int = 1,
    difficulty: int = 1,
    test_hooks: bool = True,
):
    """Spawn real node subprocesses and tear them down afterwards."""
    nodes = [
        NodeProcess(
            index=i,
            port=free_port(),
            workdir=Path(workdir),
            difficulty=difficulty,
            test_hooks=test_hooks,
        )
        for i in range(count)
    ]
    try:
        for node in nodes:
            node.start()
        for node in nodes:
            node.wait_ready()
        yield nodes
    finally:
        for node in nodes:
            node.stop()
