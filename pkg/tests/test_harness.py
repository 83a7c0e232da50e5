import json

import httpx
import pytest

from conftest import start_nodes
from gridledger.harness import Report, Scenario, ScenarioError, bundled_scenario, run_scenario


def write_scenario(tmp_path, payload: dict):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(payload))
    return path


class TestScenarioParsing:
    def test_bundled_scenarios_load(self):
        for name in ("power_failure", "tampered_chain"):
            scenario = Scenario.load(bundled_scenario(name))
            assert scenario.node_count == 2
            assert scenario.difficulty == 1

    def test_unknown_bundled_name(self):
        with pytest.raises(ScenarioError):
            bundled_scenario("nope")

    @pytest.mark.parametrize(
        "payload",
        [
            {"nodes": 0, "steps": []},
            {"nodes": 1, "steps": [{"action": "explode", "node": 0}]},
            {"nodes": 1, "steps": [{"action": "mine", "node": 3}]},
            {"nodes": 1, "steps": [{"action": "mutate-block", "node": 0, "block_index": 1}]},
            {"nodes": 1, "steps": [{"action": "truncate-chain", "node": 0, "keep_blocks": 0}]},
            {"nodes": 1, "steps": [{"action": "arbitrate", "node": 0}]},
            {"nodes": 2, "steps": [{"action": "assert-equal-chains", "nodes": [0]}]},
        ],
    )
    def test_invalid_scenarios_rejected(self, payload):
        with pytest.raises(ScenarioError):
            Scenario.from_dict(payload)


class TestRunScenario:
    def test_empty_step_list_passes(self, tmp_path):
        path = write_scenario(tmp_path, {"name": "noop", "nodes": 1, "difficulty": 1, "steps": []})
        report = run_scenario(path, workdir=tmp_path / "run")
        assert report.passed
        assert report.steps == []

    def test_report_files_written(self, tmp_path):
        path = write_scenario(tmp_path, {"name": "noop", "nodes": 1, "difficulty": 1, "steps": []})
        base = tmp_path / "out" / "report"
        report = run_scenario(path, report_base=base, workdir=tmp_path / "run")
        data = json.loads(base.with_suffix(".json").read_text())
        assert data["passed"] is True
        assert data["scenario"] == "noop"
        text = base.with_suffix(".txt").read_text()
        assert "result: PASS" in text
        assert report.to_dict()["final_chain_digests"]["0"]

    def test_failing_assertion_fails_report(self, tmp_path):
        path = write_scenario(
            tmp_path,
            {
                "name": "wrong-expectation",
                "nodes": 1,
                "difficulty": 1,
                "steps": [
                    {"action": "resolve", "node": 0, "expect_message": "our chain was replaced"}
                ],
            },
        )
        report = run_scenario(path, workdir=tmp_path / "run")
        assert not report.passed
        assert report.assertions[0].actual == "our chain is authoritative"

    def test_out_of_range_mutation_fails_step(self, tmp_path):
        path = write_scenario(
            tmp_path,
            {
                "name": "bad-mutate",
                "nodes": 1,
                "difficulty": 1,
                "steps": [
                    {"action": "mutate-block", "node": 0, "block_index": 5, "tx_index": 0, "new_amount": 9}
                ],
            },
        )
        report = run_scenario(path, workdir=tmp_path / "run")
        assert not report.passed
        assert not report.steps[0].ok

    def test_dead_peer_is_skipped_by_resolve(self, tmp_path):
        path = write_scenario(
            tmp_path,
            {
                "name": "survivors",
                "nodes": 3,
                "difficulty": 1,
                "steps": [
                    {"action": "mine", "node": 0},
                    {"action": "mine", "node": 0},
                    {"action": "kill-node", "node": 2},
                    {"action": "resolve", "node": 1, "expect_message": "our chain was replaced"},
                    {"action": "assert-equal-chains", "nodes": [0, 1]},
                ],
            },
        )
        report = run_scenario(path, workdir=tmp_path / "run")
        assert report.passed, report.to_text()
        assert report.final_chain_digests["2"] is None


class TestBundledScenarios:
    def test_power_failure_case(self, tmp_path):
        report = run_scenario(bundled_scenario("power_failure"), workdir=tmp_path)
        assert report.passed, report.to_text()
        digests = set(report.final_chain_digests.values())
        assert len(digests) == 1 and None not in digests

    def test_tampered_chain_case(self, tmp_path):
        report = run_scenario(bundled_scenario("tampered_chain"), workdir=tmp_path)
        assert report.passed, report.to_text()
        arbitrate_steps = [s for s in report.steps if s.action == "arbitrate"]
        assert arbitrate_steps[0].detail["pre_repair_break_index"] == 3

    def test_power_failure_is_deterministic(self, tmp_path):
        def outcome_signature(report: Report):
            return (
                [(s.number, s.action, s.ok) for s in report.steps],
                [(a.step, a.kind, a.passed) for a in report.assertions],
                len(set(report.final_chain_digests.values())),
            )

        first = run_scenario(bundled_scenario("power_failure"), workdir=tmp_path / "a")
        second = run_scenario(bundled_scenario("power_failure"), workdir=tmp_path / "b")
        assert outcome_signature(first) == outcome_signature(second)


class TestNodeProcessContract:
    def test_spawned_node_serves_the_wire_contract(self, tmp_path):
        with start_nodes(tmp_path, count=1, difficulty=1) as (node,):
            body = httpx.get(f"{node.address}/chain").json()
            assert body["length"] == 1
            assert body["chain"][0]["previous_hash"] == "1"
