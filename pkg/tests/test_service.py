"""HTTP service: endpoint contracts, status codes, caching, immutability."""

import json

import pytest
from fastapi.testclient import TestClient

from whatif.agent import greedy_action
from whatif.cli import entrypoint
from whatif.errors import ConsistencyError
from whatif.render import build_payload, payload_to_dict
from whatif.service import create_app
from whatif.store import load_store
from whatif.summary import last_state_importance

import numpy as np


@pytest.fixture(scope="module")
def store_root(tmp_path_factory):
    """Two small runs (agent1, agent2) under one store root."""
    root = tmp_path_factory.mktemp("store")
    for profile, trace_seed in (("agent1", 70000), ("agent2", 71000)):
        out = root / profile
        assert entrypoint(["train", "--profile", profile, "--seed", "0",
                           "--episodes", "150", "--out", str(out)]) == 0
        assert entrypoint(["trace", "--out", str(out), "--n-sim", "5",
                           "--seed", str(trace_seed)]) == 0
        assert entrypoint(["pairs", "--out", str(out)]) == 0
    return root


@pytest.fixture(scope="module")
def store(store_root):
    return load_store(store_root)


@pytest.fixture(scope="module")
def client(store):
    return TestClient(create_app(store))


@pytest.fixture(scope="module")
def tid(client):
    return client.get("/api/traces", params={"agent": "agent1"}
                      ).json()["traces"][0]["trace_id"]


class TestAgents:
    def test_lists_agents_with_profile_weights(self, client):
        r = client.get("/api/agents")
        assert r.status_code == 200
        agents = {a["id"]: a for a in r.json()["agents"]}
        assert list(agents) == ["agent1", "agent2"]  # stable sorted order
        w1, w2 = agents["agent1"]["weights"], agents["agent2"]["weights"]
        assert (w1["collision_lane_change"], w1["high_speed"],
                w1["right_most_lane"], w1["collision"]) == (3.0, 1.0, 8.0, -3.0)
        assert (w2["collision_lane_change"], w2["high_speed"],
                w2["right_most_lane"], w2["collision"]) == (5.0, 8.0, 1.0, -3.0)
        assert agents["agent1"]["trace_count"] == 5
        assert agents["agent1"]["pair_count"] > 0

    def test_listing_is_byte_stable(self, client):
        assert client.get("/api/agents").content == client.get("/api/agents").content

    def test_empty_store_gives_empty_list(self, tmp_path):
        empty = load_store(tmp_path)
        c = TestClient(create_app(empty))
        r = c.get("/api/agents")
        assert r.status_code == 200
        assert r.json() == {"agents": []}

    def test_malformed_store_refuses_to_start(self, store_root, tmp_path):
        import shutil
        broken = tmp_path / "broken"
        shutil.copytree(store_root / "agent1", broken)
        pairs = broken / "pairs.jsonl"
        pairs.write_text(pairs.read_text()[:-30])
        with pytest.raises(ConsistencyError, match="modified: pairs.jsonl"):
            load_store(broken)


class TestTraces:
    def test_listing_rows(self, client):
        r = client.get("/api/traces", params={"agent": "agent1"})
        assert r.status_code == 200
        doc = r.json()
        assert doc["k"] == 7
        assert len(doc["traces"]) == 5
        for row in doc["traces"]:
            assert row["eligible_origins"] == max(0, row["length"] - 7)

    def test_unknown_agent_404(self, client):
        assert client.get("/api/traces", params={"agent": "agent9"}).status_code == 404

    def test_detail_timeline(self, client, tid):
        doc = client.get(f"/api/traces/{tid}").json()
        assert doc["trace_id"] == tid
        assert len(doc["steps"]) == doc["length"]
        eligible = [s for s in doc["steps"] if s["eligible"]]
        assert len(eligible) == max(0, doc["length"] - 7)
        assert all(s["index"] < doc["length"] - 7 for s in eligible)

    def test_detail_unknown_404(self, client):
        assert client.get("/api/traces/agent1-99999999").status_code == 404


class TestStepDetail:
    def test_action_equals_greedy_of_returned_q(self, client, tid):
        length = client.get(f"/api/traces/{tid}").json()["length"]
        for i in range(0, length, 17):
            doc = client.get(f"/api/traces/{tid}/steps/{i}").json()
            assert doc["action"] == greedy_action(np.array(doc["q"]))
            assert doc["greedy_action"] == doc["action"]
            assert doc["q_totals"] == pytest.approx(
                np.array(doc["q"]).sum(axis=0).tolist())

    def test_index_equal_to_length_404(self, client, tid):
        length = client.get(f"/api/traces/{tid}").json()["length"]
        assert client.get(f"/api/traces/{tid}/steps/{length}").status_code == 404

    def test_negative_index_404(self, client, tid):
        assert client.get(f"/api/traces/{tid}/steps/-1").status_code == 404

    def test_eligibility_rule_near_end(self, client, tid):
        length = client.get(f"/api/traces/{tid}").json()["length"]
        last_eligible = length - 7 - 1
        assert client.get(
            f"/api/traces/{tid}/steps/{last_eligible}").json()["eligible"] is True
        assert client.get(
            f"/api/traces/{tid}/steps/{last_eligible + 1}").json()["eligible"] is False


class TestCounterfactual:
    def test_auto_equals_precomputed_pair(self, client, store, tid):
        run = store.runs["agent1"]
        pair = run.pairs_by_origin[(tid, 0)]
        score = last_state_importance(run.env, run.model, pair)
        expected = payload_to_dict(build_payload(
            run.env, run.model, pair, score=score, score_method="last-state"))
        expected["last_state_importance"] = score
        got = client.get(f"/api/traces/{tid}/steps/0/counterfactual").json()
        assert got == json.loads(json.dumps(expected))  # over-the-wire form

    def test_repeat_requests_byte_identical(self, client, tid):
        url = f"/api/traces/{tid}/steps/2/counterfactual?action=slower&k=7"
        assert client.get(url).content == client.get(url).content

    def test_action_by_name_and_ordinal_agree(self, client, tid):
        by_name = client.get(
            f"/api/traces/{tid}/steps/2/counterfactual?action=slower").content
        by_ordinal = client.get(
            f"/api/traces/{tid}/steps/2/counterfactual?action=4").content
        assert by_name == by_ordinal

    def test_foil_equals_fact_400(self, client, tid):
        fact = client.get(f"/api/traces/{tid}/steps/0").json()["action_name"]
        r = client.get(f"/api/traces/{tid}/steps/0/counterfactual",
                       params={"action": fact})
        assert r.status_code == 400
        assert "equals the factual action" in r.json()["detail"]

    def test_unknown_ids_404(self, client, tid):
        assert client.get(
            "/api/traces/agent1-99999999/steps/0/counterfactual").status_code == 404
        length = client.get(f"/api/traces/{tid}").json()["length"]
        assert client.get(
            f"/api/traces/{tid}/steps/{length}/counterfactual").status_code == 404

    def test_ineligible_origin_422(self, client, tid):
        doc = client.get(f"/api/traces/{tid}").json()
        late = doc["length"] - 3
        fact = client.get(f"/api/traces/{tid}/steps/{late}").json()["action"]
        foil = (fact + 1) % 5
        r = client.get(f"/api/traces/{tid}/steps/{late}/counterfactual",
                       params={"action": str(foil)})
        assert r.status_code == 422
        assert "factual steps remaining" in r.json()["detail"]

    def test_bad_action_and_bad_k_400(self, client, tid):
        assert client.get(f"/api/traces/{tid}/steps/0/counterfactual",
                          params={"action": "warp"}).status_code == 400
        assert client.get(f"/api/traces/{tid}/steps/0/counterfactual",
                          params={"k": "0"}).status_code == 400

    def test_payload_fields(self, client, tid):
        doc = client.get(f"/api/traces/{tid}/steps/3/counterfactual?k=5").json()
        assert doc["k"] == 5
        assert len(doc["frames"]) == 6
        assert doc["last_state_importance"] >= 0.0
        assert doc["score"] == doc["last_state_importance"]
        assert doc["bar_chart"]["components"] == ["CL", "HS", "RML", "COL"]
        assert doc["frames"][0]["foil_ego"] == doc["frames"][0]["fact_ego"]


class TestSummaryEndpoint:
    def test_defaults(self, client):
        r = client.get("/api/summary", params={"agent": "agent1"})
        assert r.status_code == 200
        doc = r.json()
        assert doc["method"] == "last-state"
        assert doc["n"] == 4
        assert doc["overlap_limit"] == 5
        assert len(doc["entries"]) <= 4
        scores = [e["score"] for e in doc["entries"]]
        assert scores == sorted(scores, reverse=True)
        for e in doc["entries"]:
            assert e["counterfactual_url"].startswith(
                f"/api/traces/{e['trace_id']}/steps/{e['origin_index']}")

    def test_cached_per_parameter_tuple(self, client):
        p = {"agent": "agent1", "method": "frequency", "seed": 9}
        assert client.get("/api/summary", params=p).content == \
            client.get("/api/summary", params=p).content

    def test_frequency_seed_changes_selection_key(self, client):
        a = client.get("/api/summary", params={
            "agent": "agent1", "method": "frequency", "seed": 1}).json()
        b = client.get("/api/summary", params={
            "agent": "agent1", "method": "frequency", "seed": 1}).json()
        assert a == b

    def test_unknown_agent_404(self, client):
        assert client.get("/api/summary",
                          params={"agent": "agent9"}).status_code == 404

    def test_bad_parameters_400(self, client):
        assert client.get("/api/summary", params={
            "agent": "agent1", "method": "alphabetical"}).status_code == 400
        assert client.get("/api/summary", params={
            "agent": "agent1", "n": 0}).status_code == 400

    def test_entry_payload_urls_resolve(self, client):
        doc = client.get("/api/summary", params={"agent": "agent2"}).json()
        for e in doc["entries"]:
            r = client.get(e["counterfactual_url"])
            assert r.status_code == 200
            payload = r.json()
            assert payload["origin_index"] == e["origin_index"]
            assert payload["foil_action"] == e["foil_action"]


class TestServiceHygiene:
    def test_store_unchanged_after_request_storm(self, client, store, tid):
        before = store.content_digest()
        for i in range(0, 40, 3):
            client.get(f"/api/traces/{tid}/steps/{i % 20}/counterfactual",
                       params={"action": str(i % 5)})
            client.get("/api/summary",
                       params={"agent": "agent1", "method": "qdiff-worst"})
        assert store.content_digest() == before

    def test_cors_headers_present(self, client):
        r = client.get("/api/agents", headers={"Origin": "http://localhost:5173"})
        assert r.headers.get("access-control-allow-origin") == "*"

    def test_openapi_served_at_api_spec(self, client):
        doc = client.get("/api/spec").json()
        assert "/api/traces/{trace_id}/steps/{index}/counterfactual" in doc["paths"]
        assert "/api/summary" in doc["paths"]

    def test_ui_mount_serves_static_assets(self, store, tmp_path):
        (tmp_path / "index.html").write_text("<!doctype html><p>explorer</p>")
        c = TestClient(create_app(store, ui_dir=tmp_path))
        r = c.get("/")
        assert r.status_code == 200
        assert "explorer" in r.text
        assert c.get("/api/agents").status_code == 200  # API still reachable
