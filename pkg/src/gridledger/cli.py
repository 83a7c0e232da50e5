"""Command line entry points: run a node, drive the fault harness, or act as a thin client."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx
import uvicorn

from .chain import DEFAULT_DIFFICULTY, is_node_id
from .service import NodeState, create_app
from .wire import kwh_to_milli


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridledger")
    sub = parser.add_subparsers(dest="command", required=True)

    node = sub.add_parser("node", help="run one HTTP node")
    node.add_argument("--host", default="127.0.0.1")
    node.add_argument("--port", type=int, default=5000)
    node.add_argument("--ppu-cap", type=float, default=10.0, help="exclusive price-per-kWh cap")
    node.add_argument("--max-demand", type=float, default=1000.0, help="kWh cap per offer/request")
    node.add_argument("--book-path", default="energydemand.csv", help="order-book CSV store")
    node.add_argument("--node-id", default=None, help="32 hex chars; generated when omitted")
    node.add_argument(
        "--difficulty",
        type=int,
        default=DEFAULT_DIFFICULTY,
        help="leading hex zeros required by proof-of-work (harness runs lower it)",
    )
    node.add_argument(
        "--test-hooks",
        action="store_true",
        help="enable fault-injection endpoints (harness only, never in normal operation)",
    )

    harness = sub.add_parser("harness", help="run fault scenarios against live nodes")
    harness_sub = harness.add_subparsers(dest="harness_command", required=True)
    run = harness_sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", help="path to a scenario JSON file")
    run.add_argument("--report", default="harness-report", help="report base path (.json/.txt)")
    run.add_argument("--difficulty", type=int, default=None, help="override the scenario difficulty")

    client = sub.add_parser("client", help="talk to a running node")
    client.add_argument("--node", required=True, help="base URL, e.g. http://127.0.0.1:5000")
    client_sub = client.add_subparsers(dest="client_command", required=True)
    client_sub.add_parser("chain")
    client_sub.add_parser("mine")
    client_sub.add_parser("table")
    client_sub.add_parser("resolve")
    sell = client_sub.add_parser("sell")
    sell.add_argument("--seller", required=True)
    sell.add_argument("--ppu", type=float, required=True)
    sell.add_argument("--units", type=float, required=True)
    buy = client_sub.add_parser("buy")
    buy.add_argument("--buyer", required=True)
    buy.add_argument("--units", type=float, required=True)
    tx = client_sub.add_parser("tx")
    tx.add_argument("--sender", required=True)
    tx.add_argument("--recipient", required=True)
    tx.add_argument("--amount", type=float, required=True)
    register = client_sub.add_parser("register")
    register.add_argument("--peers", nargs="+", required=True)
    return parser


def _run_node(args: argparse.Namespace) -> int:
    if args.node_id is not None and not is_node_id(args.node_id):
        print("error: --node-id must be 32 lowercase hex characters", file=sys.stderr)
        return 2
    if args.difficulty < 0:
        print("error: --difficulty must not be negative", file=sys.stderr)
        return 2
    state = NodeState.create(
        address=f"http://{args.host}:{args.port}",
        node_id=args.node_id,
        ppu_cap_milli=kwh_to_milli(args.ppu_cap, "ppu cap"),
        max_demand_milli=kwh_to_milli(args.max_demand, "max demand"),
        book_path=Path(args.book_path),
        difficulty=args.difficulty,
    )
    app = create_app(state, test_hooks=args.test_hooks)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _run_client(args: argparse.Namespace) -> int:
    base = args.node.rstrip("/")
    cmd = args.client_command
    with httpx.Client(timeout=60.0) as client:
        if cmd == "chain":
            response = client.get(f"{base}/chain")
        elif cmd == "mine":
            response = client.get(f"{base}/mine")
        elif cmd == "table":
            response = client.get(f"{base}/market/table")
        elif cmd == "resolve":
            response = client.get(f"{base}/nodes/resolve")
        elif cmd == "sell":
            response = client.post(
                f"{base}/market/sell",
                json={"seller": args.seller, "ppu": args.ppu, "units": args.units},
            )
        elif cmd == "buy":
            response = client.post(
                f"{base}/market/buy", json={"buyer": args.buyer, "units": args.units}
            )
        elif cmd == "tx":
            response = client.post(
                f"{base}/transactions/new",
                json={"sender": args.sender, "recipient": args.recipient, "amount": args.amount},
            )
        elif cmd == "register":
            response = client.post(f"{base}/nodes/register", json={"nodes": args.peers})
        else:  # pragma: no cover - argparse enforces the choices
            raise AssertionError(cmd)
    print(json.dumps(response.json(), indent=2, sort_keys=True))
    return 0 if response.is_success else 1


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "node":
        return _run_node(args)
    if args.command == "harness":
        from .harness import run_scenario_cli

        return run_scenario_cli(args.scenario, args.report, args.difficulty)
    return _run_client(args)


if __name__ == "__main__":
    sys.exit(main())
