"""Cross-surface pin between the web explorer and the CLI.

frontend/fixtures/scripted-edits.json is shared contract data: the
frontend test suite validates the edit chain client-side and asserts
the submitted payload, while this module replays the same file through
POST /whatif and through `whatif` on the command line. Both surfaces
route the computation through the same report builder, so every
serialized value must agree exactly, not approximately. An empty edit
list must come back as a delta of exactly zero.
"""

import json
from pathlib import Path
from types import SimpleNamespace

import pytest
from fastapi.testclient import TestClient

from runsim.cli import main
from runsim.service.app import create_app

FIXTURE_PATH = Path(__file__).resolve().parent.parent / "frontend" / "fixtures" / "scripted-edits.json"
FIXTURE = json.loads(FIXTURE_PATH.read_text(encoding="utf-8"))

SIM_FIELDS = ("initial_loss", "losses", "final_loss", "diverged_at")


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Store built from the fixture's generation config, fitted per its fit spec."""
    base = tmp_path_factory.mktemp("ui_e2e")
    config = base / "config.json"
    config.write_text(json.dumps(FIXTURE["service_store"]), encoding="utf-8")
    log = base / "runs.log"
    assert main(["generate", "--config", str(config), "--out", str(log)]) == 0
    with TestClient(create_app(base)) as client:
        resp = client.post("/fit", json=FIXTURE["fit"])
        assert resp.status_code == 202
        job = resp.json()
        while job["status"] in ("queued", "running"):
            job = client.get(f"/fit/jobs/{job['job_id']}").json()
        assert job["status"] == "done", job
        ref = job["params_ref"]
        # export the fitted weights so the CLI replays with identical numbers
        params_doc = client.get("/params", params={"ref": ref}).json()["params"]
        params = base / "params.json"
        params.write_text(json.dumps(params_doc), encoding="utf-8")
        yield SimpleNamespace(client=client, ref=ref, log=log, params=params, dir=base)


def _cli_whatif(ws, edits, tag):
    edits_path = ws.dir / f"edits-{tag}.json"
    edits_path.write_text(json.dumps(edits), encoding="utf-8")
    out = ws.dir / f"whatif-{tag}.json"
    code = main(
        ["whatif", "--runs", str(ws.log), "--params", str(ws.params),
         "--run-id", FIXTURE["run_id"], "--edits", str(edits_path), "--out", str(out)]
    )
    assert code == 0
    return json.loads(out.read_text(encoding="utf-8"))


def _service_whatif(ws, edits):
    resp = ws.client.post(
        "/whatif",
        params={"ref": ws.ref},
        json={"run_id": FIXTURE["run_id"], "edits": edits},
    )
    assert resp.status_code == 200, resp.text
    return resp.json()


def _assert_value_identical(service_doc, cli_doc):
    assert service_doc["baseline_steps"] == cli_doc["baseline_steps"]
    assert service_doc["edited_steps"] == cli_doc["edited_steps"]
    svc = {r["test_example_id"]: r for r in service_doc["results"]}
    cli = {r["test_example_id"]: r for r in cli_doc["results"]}
    assert sorted(svc) == sorted(cli)
    for tid in svc:
        # exact equality on the parsed JSON: both surfaces serialize the
        # same floats, so any mismatch at all is a divergence
        assert svc[tid]["delta_final"] == cli[tid]["delta_final"], tid
        assert svc[tid]["actual_final"] == cli[tid]["actual_final"], tid
        for side in ("baseline", "edited"):
            for field in SIM_FIELDS:
                assert svc[tid][side][field] == cli[tid][side][field], (tid, side, field)


def test_stored_run_matches_the_fixture(workspace):
    """Guard against fixture drift: the generated store must contain the
    exact curriculum the frontend tests validate against."""
    resp = workspace.client.get(f"/runs/{FIXTURE['run_id']}")
    assert resp.status_code == 200
    detail = resp.json()
    assert detail["n"] == FIXTURE["n"]
    assert detail["steps"] == FIXTURE["base_steps"]


def test_scripted_edit_sequence_matches_cli_replay(workspace):
    edits = FIXTURE["edits"]
    service_doc = _service_whatif(workspace, edits)
    cli_doc = _cli_whatif(workspace, edits, "scripted")
    assert service_doc["edited_steps"] == FIXTURE["edited_step_count"]
    _assert_value_identical(service_doc, cli_doc)
    # the scripted sequence has to actually move the final loss,
    # otherwise the identity above proves nothing
    deltas = [r["delta_final"] for r in service_doc["results"]]
    assert any(d not in (0, None) for d in deltas)


def test_empty_edit_list_is_a_zero_delta_on_both_surfaces(workspace):
    service_doc = _service_whatif(workspace, [])
    cli_doc = _cli_whatif(workspace, [], "empty")
    _assert_value_identical(service_doc, cli_doc)
    for doc in (service_doc, cli_doc):
        assert doc["edited_steps"] == doc["baseline_steps"]
        for result in doc["results"]:
            assert result["delta_final"] == 0.0
            for field in SIM_FIELDS:
                assert result["edited"][field] == result["baseline"][field]
