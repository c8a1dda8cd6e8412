"""Record canonical API responses as frontend test fixtures.

Builds a small deterministic run with the `whatif` CLI, mounts it in the
real service, and saves selected responses byte-for-byte under
``tests/fixtures/`` together with an index mapping file -> (url, status).

Regenerate from ``frontend/`` with::

    python3 scripts/record_fixtures.py

The run is fully seeded, so re-recording with an unchanged backend yields
identical bytes.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from whatif.service import create_app
from whatif.store import load_store

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

PROFILE = "agent2"
TRAIN_SEED = 42
EPISODES = 300
N_SIM = 12
TRACE_SEED = 90_000
ORIGIN_STEP = 5
K = 7


def build_run(run_dir: Path) -> None:
    def cli(*args: str) -> None:
        subprocess.run(["whatif", *args, "--out", str(run_dir)], check=True,
                       stdout=subprocess.DEVNULL)

    cli("train", "--profile", PROFILE, "--seed", str(TRAIN_SEED),
        "--episodes", str(EPISODES))
    cli("trace", "--n-sim", str(N_SIM), "--seed", str(TRACE_SEED))
    cli("pairs")


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        run_dir = Path(tmp) / "run"
        build_run(run_dir)
        client = TestClient(create_app(load_store(run_dir)))

        index: dict[str, dict] = {}

        def record(name: str, url: str, status: int) -> dict:
            resp = client.get(url)
            assert resp.status_code == status, (
                f"{url}: expected {status}, got {resp.status_code}")
            (FIXTURES / f"{name}.json").write_bytes(resp.content)
            index[name] = {"url": url, "status": status}
            return json.loads(resp.content)

        agents = record("agents", "/api/agents", 200)
        assert [a["id"] for a in agents["agents"]] == [PROFILE]

        traces = record("traces", f"/api/traces?agent={PROFILE}", 200)
        rows = traces["traces"]
        main_trace = next(r["trace_id"] for r in rows if r["length"] == 80)
        crash_trace = next(r["trace_id"] for r in rows
                           if r["terminal_cause"] == "collision")

        trace_full = record("trace_full", f"/api/traces/{main_trace}", 200)
        assert trace_full["eligible_origins"] == 80 - K
        record("trace_crash", f"/api/traces/{crash_trace}", 200)
        record("trace_unknown", "/api/traces/no-such-trace", 404)

        step = record(
            "step", f"/api/traces/{main_trace}/steps/{ORIGIN_STEP}", 200)
        assert step["eligible"]
        fact_name = step["action_name"]

        cf_base = f"/api/traces/{main_trace}/steps/{ORIGIN_STEP}/counterfactual"
        cf_auto = record("cf_auto", f"{cf_base}?action=auto&k={K}", 200)
        foil_name = cf_auto["foil_action_name"]
        assert foil_name != fact_name
        record("cf_named", f"{cf_base}?action={foil_name}&k={K}", 200)
        record("cf_foil_eq_fact", f"{cf_base}?action={fact_name}&k={K}", 400)

        ineligible_step = trace_full["length"] - 2
        record("step_ineligible",
               f"/api/traces/{main_trace}/steps/{ineligible_step}", 200)
        record("cf_ineligible",
               f"/api/traces/{main_trace}/steps/{ineligible_step}"
               f"/counterfactual?action=auto&k={K}", 422)

        summary = record(
            "summary",
            f"/api/summary?agent={PROFILE}&method=last-state&n=4&overlap=5",
            200)
        assert len(summary["entries"]) == 4
        entry0 = summary["entries"][0]
        record("cf_entry0", entry0["counterfactual_url"], 200)
        record("step_entry0",
               f"/api/traces/{entry0['trace_id']}"
               f"/steps/{entry0['origin_index']}", 200)

        meta = {
            "entry0_trace": entry0["trace_id"],
            "entry0_step": entry0["origin_index"],
            "entry0_foil_name": entry0["foil_action_name"],
            "profile": PROFILE,
            "k": K,
            "main_trace": main_trace,
            "crash_trace": crash_trace,
            "origin_step": ORIGIN_STEP,
            "ineligible_step": ineligible_step,
            "fact_action_name": fact_name,
            "foil_action_name": foil_name,
        }
        (FIXTURES / "index.json").write_text(
            json.dumps({"files": index, "meta": meta}, indent=1, sort_keys=True)
            + "\n")

    print(f"recorded {len(index)} fixtures under {FIXTURES}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
