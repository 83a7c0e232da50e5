"""Fault-injection harness: spawn nodes, drive scripted scenarios, report results.

Scenarios are JSON files describing trades, mining, node outages and chain
tampering, plus the repair steps (resolve/arbitrate) and the assertions that
must hold afterwards. Nodes run as real subprocesses behind the normal HTTP
contract; injection goes through the --test-hooks endpoints.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

from .chain import DEFAULT_DIFFICULTY, tamper_scan
from .wire import parse_chain_payload

__all__ = [
    "ScenarioError",
    "Scenario",
    "NodeProcess",
    "StepRecord",
    "AssertionRecord",
    "Report",
    "free_port",
    "run_scenario",
    "run_scenario_cli",
    "bundled_scenario",
]

ACTIONS = {
    "sell",
    "buy",
    "mine",
    "kill-node",
    "truncate-chain",
    "mutate-block",
    "resolve",
    "arbitrate",
    "snapshot",
    "assert-equal-chains",
}

READY_TIMEOUT_SECONDS = 20.0
HTTP_TIMEOUT_SECONDS = 120.0


class ScenarioError(Exception):
    """The scenario file is malformed or references undeclared nodes/blocks."""


@dataclass
class Scenario:
    name: str
    node_count: int
    steps: list[dict]
    difficulty: int = DEFAULT_DIFFICULTY
    base_port: int | None = None

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ScenarioError(f"cannot load scenario {path}: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        if not isinstance(raw, dict):
            raise ScenarioError("scenario must be a JSON object")
        node_count = raw.get("nodes")
        if not isinstance(node_count, int) or node_count < 1:
            raise ScenarioError("'nodes' must be a positive integer")
        steps = raw.get("steps", [])
        if not isinstance(steps, list):
            raise ScenarioError("'steps' must be a list")
        scenario = cls(
            name=str(raw.get("name", "unnamed")),
            node_count=node_count,
            steps=steps,
            difficulty=int(raw.get("difficulty", DEFAULT_DIFFICULTY)),
            base_port=raw.get("base_port"),
        )
        scenario._validate()
        return scenario

    def _validate(self) -> None:
        if self.difficulty < 0:
            raise ScenarioError("'difficulty' must not be negative")
        for number, step in enumerate(self.steps, start=1):
            if not isinstance(step, dict) or step.get("action") not in ACTIONS:
                raise ScenarioError(f"step {number}: unknown action {step!r}")
            action = step["action"]
            if action == "assert-equal-chains":
                nodes = step.get("nodes")
                if not isinstance(nodes, list) or len(nodes) < 2:
                    raise ScenarioError(f"step {number}: 'nodes' must list at least two nodes")
                refs = nodes
            else:
                refs = [step.get("node")]
            for ref in refs:
                if not isinstance(ref, int) or not 0 <= ref < self.node_count:
                    raise ScenarioError(f"step {number}: node reference {ref!r} is not declared")
            if action == "mutate-block" and step.get("block_index", 0) < 2:
                raise ScenarioError(f"step {number}: mutate-block targets the genesis block")
            if action == "truncate-chain" and step.get("keep_blocks", 0) < 1:
                raise ScenarioError(f"step {number}: keep_blocks must be >= 1")
            if action == "arbitrate" and not step.get("reference_path"):
                raise ScenarioError(f"step {number}: arbitrate needs 'reference_path'")
            if action == "snapshot" and not step.get("path"):
                raise ScenarioError(f"step {number}: snapshot needs 'path'")


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@dataclass
class NodeProcess:
    """One node subprocess plus the bookkeeping the harness needs."""

    index: int
    port: int
    workdir: Path
    difficulty: int = DEFAULT_DIFFICULTY
    test_hooks: bool = True
    proc: subprocess.Popen | None = None
    log_path: Path | None = None

    @property
    def address(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    @property
    def alive(self) -> bool:
        return self.proc is not None and self.proc.poll() is None

    def start(self) -> None:
        node_dir = self.workdir / f"node-{self.index}"
        node_dir.mkdir(parents=True, exist_ok=True)
        self.log_path = node_dir / "node.log"
        argv = [
            sys.executable,
            "-m",
            "gridledger",
            "node",
            "--host",
            "127.0.0.1",
            "--port",
            str(self.port),
            "--difficulty",
            str(self.difficulty),
            "--book-path",
            str(node_dir / "energydemand.csv"),
        ]
        if self.test_hooks:
            argv.append("--test-hooks")
        env = dict(os.environ)
        src_dir = str(Path(__file__).resolve().parents[1])
        env["PYTHONPATH"] = src_dir + os.pathsep + env.get("PYTHONPATH", "")
        log = open(self.log_path, "w")
        self.proc = subprocess.Popen(argv, stdout=log, stderr=subprocess.STDOUT, env=env)

    def wait_ready(self, timeout: float = READY_TIMEOUT_SECONDS) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.proc is not None and self.proc.poll() is not None:
                raise ScenarioError(f"node {self.index} exited during startup (see {self.log_path})")
            try:
                if httpx.get(f"{self.address}/chain", timeout=1.0).status_code == 200:
                    return
            except httpx.HTTPError:
                time.sleep(0.05)
        raise ScenarioError(f"node {self.index} did not become ready on port {self.port}")

    def stop(self) -> None:
        if self.proc is None or self.proc.poll() is not None:
            return
        self.proc.terminate()
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait(timeout=5)


@dataclass
class StepRecord:
    number: int
    action: str
    ok: bool
    detail: dict = field(default_factory=dict)


@dataclass
class AssertionRecord:
    step: int
    kind: str
    passed: bool
    expected: object = None
    actual: object = None


@dataclass
class Report:
    scenario: str
    difficulty: int
    nodes: list[dict] = field(default_factory=list)
    steps: list[StepRecord] = field(default_factory=list)
    assertions: list[AssertionRecord] = field(default_factory=list)
    final_chain_digests: dict[str, str | None] = field(default_factory=dict)
    elapsed_seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(s.ok for s in self.steps) and all(a.passed for a in self.assertions)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "difficulty": self.difficulty,
            "nodes": self.nodes,
            "steps": [vars(s) for s in self.steps],
            "assertions": [vars(a) for a in self.assertions],
            "final_chain_digests": self.final_chain_digests,
            "elapsed_seconds": round(self.elapsed_seconds, 3),
            "passed": self.passed,
        }

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario} (difficulty {self.difficulty})"]
        lines.append("nodes: " + " ".join(f"{n['index']}={n['address']}" for n in self.nodes))
        for step in self.steps:
            status = "ok" if step.ok else "FAILED"
            summary = " ".join(
                f"{k}={v}" for k, v in step.detail.items() if isinstance(v, (str, int, float))
            )
            lines.append(f"{step.number:3d}. {step.action:<20} {status}  {summary}".rstrip())
        for check in self.assertions:
            status = "pass" if check.passed else "FAIL"
            lines.append(
                f"     assert[{check.kind}] step {check.step}: {status}"
                f" (expected {check.expected!r}, actual {check.actual!r})"
            )
        lines.append("final chain digests:")
        for node, digest in self.final_chain_digests.items():
            lines.append(f"  node {node}: {digest}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(
            f"result: {verdict} ({len(self.steps)} steps, {len(self.assertions)} assertions,"
            f" {self.elapsed_seconds:.1f}s)"
        )
        return "\n".join(lines) + "\n"

    def write(self, base: str | Path) -> None:
        base = Path(base)
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".json").write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        base.with_suffix(".txt").write_text(self.to_text())


class _Runner:
    def __init__(self, scenario: Scenario, workdir: Path):
        self.scenario = scenario
        self.workdir = workdir
        self.nodes: list[NodeProcess] = []
        self.report = Report(scenario=scenario.name, difficulty=scenario.difficulty)
        self.client = httpx.Client(timeout=HTTP_TIMEOUT_SECONDS)

    def close(self) -> None:
        self.client.close()
        for node in self.nodes:
            node.stop()

    def spawn_nodes(self) -> None:
        for i in range(self.scenario.node_count):
            port = self.scenario.base_port + i if self.scenario.base_port else free_port()
            node = NodeProcess(
                index=i, port=port, workdir=self.workdir, difficulty=self.scenario.difficulty
            )
            node.start()
            self.nodes.append(node)
        for node in self.nodes:
            node.wait_ready()
            self.report.nodes.append({"index": node.index, "address": node.address})
        # full-mesh registration so any node can resolve against any other
        for node in self.nodes:
            others = [p.address for p in self.nodes if p.index != node.index]
            if others:
                self.client.post(f"{node.address}/nodes/register", json={"nodes": others})

    def _resolve_path(self, path: str) -> Path:
        candidate = Path(path)
        return candidate if candidate.is_absolute() else self.workdir / candidate

    def _assert(self, step_no: int, kind: str, expected, actual) -> None:
        self.report.assertions.append(
            AssertionRecord(
                step=step_no, kind=kind, passed=expected == actual, expected=expected, actual=actual
            )
        )

    def run_steps(self) -> None:
        for number, step in enumerate(self.scenario.steps, start=1):
            action = step["action"]
            try:
                detail = self._execute(number, step)
                self.report.steps.append(
                    StepRecord(number=number, action=action, ok=True, detail=detail)
                )
            except Exception as exc:
                self.report.steps.append(
                    StepRecord(
                        number=number, action=action, ok=False, detail={"error": str(exc)}
                    )
                )

    def _request(self, method: str, node: NodeProcess, path: str, **kwargs) -> httpx.Response:
        response = self.client.request(method, f"{node.address}{path}", **kwargs)
        if response.status_code >= 400:
            raise ScenarioError(f"{method} {path} on node {node.index}: {response.text}")
        return response

    def _fetch_blocks(self, node: NodeProcess) -> tuple[bytes, list]:
        raw = self._request("GET", node, "/chain").content
        return raw, parse_chain_payload(raw)

    def _execute(self, number: int, step: dict) -> dict:
        action = step["action"]
        if action == "assert-equal-chains":
            payloads = {}
            for ref in step["nodes"]:
                raw, _ = self._fetch_blocks(self.nodes[ref])
                payloads[ref] = raw
            first = step["nodes"][0]
            equal = all(payloads[ref] == payloads[first] for ref in step["nodes"][1:])
            self._assert(number, "equal-chains", True, equal)
            return {"nodes": str(step["nodes"]), "equal": equal}

        node = self.nodes[step["node"]]
        if action == "sell":
            body = {"seller": step["seller"], "ppu": step["ppu"], "units": step["units"]}
            self._request("POST", node, "/market/sell", json=body)
            return {"node": node.index, "seller": step["seller"], "units": step["units"]}
        if action == "buy":
            body = {"buyer": step["buyer"], "units": step["units"]}
            data = self._request("POST", node, "/market/buy", json=body).json()
            return {"node": node.index, "buyer": step["buyer"], "fills": len(data["fills"])}
        if action == "mine":
            data = self._request("GET", node, "/mine").json()
            return {"node": node.index, "block": data["index"], "proof": data["proof"]}
        if action == "kill-node":
            node.stop()
            return {"node": node.index, "killed": True}
        if action == "truncate-chain":
            body = {"keep_blocks": step["keep_blocks"]}
            data = self._request("POST", node, "/testing/truncate", json=body).json()
            return {"node": node.index, "length": data["length"]}
        if action == "mutate-block":
            body = {
                "block_index": step["block_index"],
                "tx_index": step["tx_index"],
                "new_amount": step["new_amount"],
            }
            self._request("POST", node, "/testing/mutate", json=body)
            return {"node": node.index, "block_index": step["block_index"]}
        if action == "resolve":
            data = self._request("GET", node, "/nodes/resolve").json()
            if "expect_message" in step:
                self._assert(number, "resolve-message", step["expect_message"], data["message"])
            return {"node": node.index, "message": data["message"]}
        if action == "snapshot":
            raw, _ = self._fetch_blocks(node)
            path = self._resolve_path(step["path"])
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(raw)
            return {"node": node.index, "path": str(path)}
        if action == "arbitrate":
            _, blocks = self._fetch_blocks(node)
            break_index = tamper_scan(blocks, self.scenario.difficulty)
            if "expect_break_index" in step:
                self._assert(number, "pre-repair-break-index", step["expect_break_index"], break_index)
            reference = self._resolve_path(step["reference_path"]).read_bytes()
            response = self.client.post(
                f"{node.address}/nodes/arbitrate",
                content=reference,
                headers={"content-type": "application/json"},
            )
            if response.status_code >= 400:
                raise ScenarioError(f"arbitrate on node {node.index}: {response.text}")
            data = response.json()
            if "expect_message" in step:
                self._assert(number, "arbitrate-message", step["expect_message"], data["message"])
            return {
                "node": node.index,
                "message": data["message"],
                "pre_repair_break_index": break_index,
            }
        raise ScenarioError(f"unknown action {action!r}")  # pragma: no cover

    def collect_digests(self) -> None:
        for node in self.nodes:
            if not node.alive:
                self.report.final_chain_digests[str(node.index)] = None
                continue
            try:
                raw, _ = self._fetch_blocks(node)
                self.report.final_chain_digests[str(node.index)] = hashlib.sha256(raw).hexdigest()
            except Exception:
                self.report.final_chain_digests[str(node.index)] = None


def run_scenario(
    scenario_path: str | Path,
    report_base: str | Path | None = None,
    difficulty_override: int | None = None,
    workdir: str | Path | None = None,
) -> Report:
    """Execute a scenario file against freshly spawned nodes and return the report."""
    scenario = Scenario.load(scenario_path)
    if difficulty_override is not None:
        scenario.difficulty = difficulty_override
    if workdir is None:
        workdir = Path(tempfile.mkdtemp(prefix="gridledger-harness-"))
    else:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)

    runner = _Runner(scenario, workdir)
    started = time.monotonic()
    try:
        runner.spawn_nodes()
        runner.run_steps()
        runner.collect_digests()
    finally:
        runner.report.elapsed_seconds = time.monotonic() - started
        runner.close()
    if report_base is not None:
        runner.report.write(report_base)
    return runner.report


def bundled_scenario(name: str) -> Path:
    """Path to a scenario file shipped with the package."""
    path = Path(__file__).parent / "scenarios" / f"{name}.json"
    if not path.exists():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return path


def run_scenario_cli(scenario: str, report_base: str, difficulty: int | None) -> int:
    try:
        report = run_scenario(scenario, report_base=report_base, difficulty_override=difficulty)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.to_text(), end="")
    return 0 if report.passed else 1
