import json

import pytest
from fastapi.testclient import TestClient

from gridledger.chain import GENESIS, validate_chain
from gridledger.service import NodeState, create_app
from gridledger.wire import chain_payload_bytes, parse_chain_payload


@pytest.fixture
def state(tmp_path) -> NodeState:
    return NodeState.create(
        address="http://127.0.0.1:5000",
        book_path=tmp_path / "energydemand.csv",
        difficulty=1,
    )


@pytest.fixture
def client(state) -> TestClient:
    return TestClient(create_app(state, test_hooks=True))


def _csv_bytes(state: NodeState) -> bytes:
    return state.book.csv_path.read_bytes()


class TestChainEndpoint:
    def test_fresh_node_returns_exact_genesis_payload(self, client):
        response = client.get("/chain")
        assert response.status_code == 200
        assert response.content == chain_payload_bytes([GENESIS])

    def test_wire_fidelity_after_mining(self, client):
        client.post(
            "/transactions/new",
            json={"sender": "Tanisha Tichi", "recipient": "Kristian Stromberg", "amount": 8.0},
        )
        client.get("/mine")
        body = client.get("/chain").json()
        assert set(body) == {"chain", "length"}
        assert body["length"] == len(body["chain"]) == 2
        for block in body["chain"]:
            assert set(block) == {"index", "previous_hash", "proof", "timestamp", "transactions"}

    def test_payload_roundtrips(self, client):
        client.get("/mine")
        raw = client.get("/chain").content
        assert chain_payload_bytes(parse_chain_payload(raw)) == raw


class TestTransactions:
    def test_returns_next_block_number(self, client):
        response = client.post(
            "/transactions/new", json={"sender": "a", "recipient": "b", "amount": 1}
        )
        assert response.status_code == 200
        assert response.json() == {"message": "Transaction will be added to Block 2"}

    def test_missing_field_is_400_with_error_body(self, client):
        response = client.post("/transactions/new", json={"sender": "a", "amount": 1})
        assert response.status_code == 400
        assert "error" in response.json()

    @pytest.mark.parametrize("amount", [0, -2, 0.0005])
    def test_bad_amount_rejected(self, client, amount):
        response = client.post(
            "/transactions/new", json={"sender": "a", "recipient": "b", "amount": amount}
        )
        assert response.status_code == 400

    def test_amount_appears_verbatim_in_mined_block(self, client):
        client.post(
            "/transactions/new",
            json={"sender": "Tanisha Tichi", "recipient": "Kristian Stromberg", "amount": 8.0},
        )
        client.get("/mine")
        raw = client.get("/chain").content
        assert b'"amount":8.0,"recipient":"Kristian Stromberg","sender":"Tanisha Tichi"' in raw


class TestMine:
    def test_empty_mempool_yields_coinbase_only(self, client, state):
        body = client.get("/mine").json()
        assert set(body) == {"message", "index", "previous_hash", "proof", "timestamp", "transactions"}
        assert body["index"] == 2
        assert len(body["transactions"]) == 1
        assert body["transactions"][0]["sender"] == "0"
        assert body["transactions"][0]["recipient"] == state.node_id
        assert body["transactions"][0]["amount"] == 1.0

    def test_coinbase_comes_after_market_fills(self, client):
        client.post("/market/sell", json={"seller": "Apyrl Goulet", "ppu": 2.0, "units": 5})
        client.post("/market/sell", json={"seller": "Kristian Stromberg", "ppu": 3.0, "units": 5})
        client.post("/market/buy", json={"buyer": "Ellis Acost", "units": 8})
        body = client.get("/mine").json()
        senders = [tx["sender"] for tx in body["transactions"]]
        assert senders == ["Ellis Acost", "Ellis Acost", "0"]

    def test_consecutive_mines_extend_a_valid_chain(self, client):
        first = client.get("/mine").json()
        second = client.get("/mine").json()
        assert second["index"] == first["index"] + 1
        blocks = parse_chain_payload(client.get("/chain").content)
        assert validate_chain(blocks, difficulty=1)


class TestPeers:
    def test_register_and_list(self, client):
        response = client.post(
            "/nodes/register", json={"nodes": ["http://127.0.0.1:5001", "http://127.0.0.1:5002"]}
        )
        assert response.status_code == 200
        assert response.json()["total_nodes"] == [
            "http://127.0.0.1:5001",
            "http://127.0.0.1:5002",
        ]

    def test_register_skips_own_address(self, client):
        response = client.post("/nodes/register", json={"nodes": ["http://127.0.0.1:5000"]})
        assert response.json()["total_nodes"] == []

    def test_malformed_address_rejected(self, client):
        response = client.post("/nodes/register", json={"nodes": ["not a url"]})
        assert response.status_code == 400
        assert "error" in response.json()

    def test_empty_list_rejected(self, client):
        assert client.post("/nodes/register", json={"nodes": []}).status_code == 400

    def test_resolve_without_peers_is_authoritative(self, client):
        body = client.get("/nodes/resolve").json()
        assert body["message"] == "our chain is authoritative"
        assert "chain" in body and "new_chain" not in body


class TestMarketEndpoints:
    def test_sell_then_table_shows_offer_at_index_one(self, client):
        client.post("/market/sell", json={"seller": "Apyrl Goulet", "ppu": 2.0, "units": 10})
        body = client.get("/market/table").json()
        assert body["offers"] == [
            {"index": 1, "seller": "Apyrl Goulet", "ppu": 2.0, "units": 10.0}
        ]

    def test_sell_at_cap_rejected(self, client, state):
        response = client.post(
            "/market/sell", json={"seller": "x", "ppu": 10.0, "units": 1}
        )
        assert response.status_code == 400
        assert "cap" in response.json()["error"]

    def test_sell_zero_units_rejected(self, client):
        assert (
            client.post("/market/sell", json={"seller": "x", "ppu": 1.0, "units": 0}).status_code
            == 400
        )

    def test_buy_splits_across_sellers_and_feeds_mempool(self, client):
        client.post("/market/sell", json={"seller": "Kristian Stromberg", "ppu": 2.5, "units": 4})
        client.post("/market/sell", json={"seller": "Apyrl Goulet", "ppu": 3.5, "units": 5})
        body = client.post("/market/buy", json={"buyer": "Ellis Acost", "units": 9}).json()
        assert [f["seller"] for f in body["fills"]] == ["Kristian Stromberg", "Apyrl Goulet"]
        assert body["total_cost"] == 4 * 2.5 + 5 * 3.5
        mined = client.get("/mine").json()
        trades = [tx for tx in mined["transactions"] if tx["sender"] != "0"]
        assert [(t["sender"], t["recipient"], t["amount"]) for t in trades] == [
            ("Ellis Acost", "Kristian Stromberg", 4.0),
            ("Ellis Acost", "Apyrl Goulet", 5.0),
        ]

    def test_failed_buy_changes_nothing(self, client, state):
        client.post("/market/sell", json={"seller": "a", "ppu": 2.0, "units": 7})
        table_before = client.get("/market/table").content
        csv_before = _csv_bytes(state)
        response = client.post("/market/buy", json={"buyer": "b", "units": 8})
        assert response.status_code == 400
        assert "supply" in response.json()["error"]
        assert client.get("/market/table").content == table_before
        assert _csv_bytes(state) == csv_before
        # mempool untouched: the next mined block carries only the coinbase
        assert len(client.get("/mine").json()["transactions"]) == 1


class TestTestHooks:
    def test_absent_without_flag(self, state):
        plain = TestClient(create_app(state, test_hooks=False))
        assert plain.post("/testing/truncate", json={"keep_blocks": 1}).status_code == 404

    def test_truncate(self, client):
        for _ in range(3):
            client.get("/mine")
        response = client.post("/testing/truncate", json={"keep_blocks": 3})
        assert response.json()["length"] == 3
        assert client.get("/chain").json()["length"] == 3

    def test_truncate_bounds(self, client):
        assert client.post("/testing/truncate", json={"keep_blocks": 0}).status_code == 400
        assert client.post("/testing/truncate", json={"keep_blocks": 5}).status_code == 400

    def test_mutate_breaks_chain(self, client):
        client.post("/transactions/new", json={"sender": "a", "recipient": "b", "amount": 5})
        client.get("/mine")
        client.get("/mine")
        response = client.post(
            "/testing/mutate", json={"block_index": 2, "tx_index": 0, "new_amount": 999}
        )
        assert response.status_code == 200
        blocks = parse_chain_payload(client.get("/chain").content)
        assert not validate_chain(blocks, difficulty=1)

    def test_mutate_genesis_rejected(self, client):
        response = client.post(
            "/testing/mutate", json={"block_index": 1, "tx_index": 0, "new_amount": 9}
        )
        assert response.status_code == 400

    def test_mutate_bad_tx_index(self, client):
        client.get("/mine")
        response = client.post(
            "/testing/mutate", json={"block_index": 2, "tx_index": 5, "new_amount": 9}
        )
        assert response.status_code == 400


class TestArbitrateEndpoint:
    def test_arbitrate_against_own_snapshot_is_authoritative(self, client):
        client.get("/mine")
        snapshot = client.get("/chain").content
        response = client.post(
            "/nodes/arbitrate", content=snapshot, headers={"content-type": "application/json"}
        )
        assert response.status_code == 200
        assert response.json()["message"] == "our chain is authoritative"

    def test_arbitrate_unresolvable_without_matching_peer(self, client):
        client.get("/mine")
        snapshot = client.get("/chain").content
        client.post("/testing/mutate", json={"block_index": 2, "tx_index": 0, "new_amount": 77})
        response = client.post(
            "/nodes/arbitrate", content=snapshot, headers={"content-type": "application/json"}
        )
        assert response.status_code == 409
        assert "reference" in response.json()["error"]

    def test_arbitrate_rejects_short_reference(self, client):
        snapshot = client.get("/chain").content
        client.get("/mine")
        response = client.post(
            "/nodes/arbitrate", content=snapshot, headers={"content-type": "application/json"}
        )
        assert response.status_code == 400

    def test_arbitrate_rejects_garbage(self, client):
        response = client.post(
            "/nodes/arbitrate", content=b"junk", headers={"content-type": "application/json"}
        )
        assert response.status_code == 400
