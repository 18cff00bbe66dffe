"""HTTP endpoint, CLI and parity tests for the gateway surface."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from itemledger import Ledger, TickingClock
from itemledger import cli
from itemledger.api.app import create_app

from conftest import linear_workflow, sample_dataset_elements

ALICE = {"X-Agent": "alice"}
BOB = {"X-Agent": "bob"}


@pytest.fixture
def client(tmp_path):
    ledger = Ledger.open(tmp_path / "store.log", clock=TickingClock(), id_seed=2, where="gateway")
    app = create_app(ledger=ledger)
    with TestClient(app) as test_client:
        test_client.store_path = tmp_path / "store.log"
        yield test_client
    ledger.close()


def post_study(client, n_elements=6, stages=("Align", "Segment", "Score")):
    dataset = client.post(
        "/datasets",
        headers=ALICE,
        json={"study_metadata": {"subject_count": 12}, "elements": sample_dataset_elements(n_elements)},
    ).json()
    pipeline = client.post(
        "/pipelines",
        headers=ALICE,
        json={"script_location": "/s.sh", "env_settings": {}, "common_dirs": [], "stages": linear_workflow(*stages)},
    ).json()
    return dataset, pipeline


def define_and_select(client, dataset, pipeline, selected=4):
    analysis = client.post("/analyses", headers=ALICE).json()
    element_ids = [e["id"] for e in dataset["elements"]][:selected]
    client.put(f"/analyses/{analysis['item']}/dataset", headers=ALICE, json={"dataset": dataset["item"], "elements": element_ids})
    client.put(f"/analyses/{analysis['item']}/pipeline", headers=ALICE, json={"pipeline": pipeline["item"], "parameters": {}})
    return analysis


# -- endpoints -----------------------------------------------------------------


def test_full_http_walkthrough(client):
    dataset, pipeline = post_study(client)
    analysis = define_and_select(client, dataset, pipeline)
    run = client.post(f"/analyses/{analysis['item']}/run", headers=ALICE, json={"seed": 42})
    assert run.status_code == 200
    assert len(run.json()["elements"]) == 4
    detail = client.get(f"/analyses/{analysis['item']}", headers=ALICE).json()
    assert detail["phase"] == "Execution"
    assert len(detail["jobs"]) == 12
    summary = client.post(f"/analyses/{analysis['item']}/consolidate", headers=ALICE).json()
    assert summary["counts"]["succeeded"] == 4
    prov_doc = client.get(f"/prov/{analysis['item']}", headers=ALICE).json()
    assert len(prov_doc["activities"]) == 12


def test_visibility_through_gateway(client):
    post_study(client)
    analysis = client.post("/analyses", headers=ALICE).json()
    assert client.get("/analyses", headers=BOB).json() == {"analyses": []}
    assert client.get(f"/analyses/{analysis['item']}", headers=BOB).status_code == 403
    client.post(f"/analyses/{analysis['item']}/share", headers=ALICE, json={"target": "bob"})
    assert len(client.get("/analyses", headers=BOB).json()["analyses"]) == 1
    assert client.get(f"/analyses/{analysis['item']}", headers=BOB).status_code == 200


def test_run_before_pipeline_maps_to_422(client):
    dataset, pipeline = post_study(client)
    analysis = client.post("/analyses", headers=ALICE).json()
    response = client.post(f"/analyses/{analysis['item']}/run", headers=ALICE, json={"seed": 42})
    assert response.status_code == 422
    assert response.json()["error"] == "IncompleteDefinition"


def test_query_items_csv_starts_with_header(client):
    post_study(client)
    response = client.get("/query/items", params={"kind": "dataset", "format": "csv"})
    assert response.status_code == 200
    assert response.text.splitlines()[0].startswith("id,element_count")


def test_query_events_filters(client):
    post_study(client)
    response = client.get("/query/events", params={"q": "who:eq:alice"})
    assert response.status_code == 200
    assert len(response.json()["rows"]) == 2
    xml = client.get("/query/events", params={"q": "who:eq:alice", "format": "xml"})
    assert xml.text.count("<row>") == 2


def test_item_endpoints(client):
    body = {
        "name": "Specimen",
        "version": {
            "property_schema": [{"name": "label", "kind": "text", "required": True}],
            "workflow": linear_workflow("Prep", "Scan"),
            "outcome_schemas": {},
        },
    }
    created = client.post("/descriptions", headers=ALICE, json=body)
    assert created.status_code == 201 and created.json()["version"] == 1
    description_id = created.json()["id"]
    second = client.post(f"/descriptions/{description_id}/versions", headers=ALICE, json=body["version"])
    assert second.json()["version"] == 2
    item = client.post("/items", headers=ALICE, json={"description": description_id, "version": 1, "properties": {"label": "x"}})
    assert item.status_code == 201
    item_id = item.json()["id"]
    fired = client.post(f"/items/{item_id}/transitions", headers=ALICE, json={"activity": "Prep", "transition": "Start"})
    assert fired.status_code == 200
    events = client.get(f"/items/{item_id}/events").json()["events"]
    assert [e["what"] for e in events] == ["Create", "Prep/Start"]
    resolved = client.get(f"/descriptions/{description_id}/versions/1").json()
    assert resolved["number"] == 1
    migrated = client.post(f"/items/{item_id}/migrate", headers=ALICE, json={"version": 2})
    assert migrated.status_code == 200  # Prep exists in both versions, stays Active
    assert migrated.json()["version"] == 2


def test_error_mapping_by_class(client):
    dataset, pipeline = post_study(client)
    analysis = client.post("/analyses", headers=ALICE).json()

    # 403 NotOwner
    response = client.put(
        f"/analyses/{analysis['item']}/dataset",
        headers=BOB,
        json={"dataset": dataset["item"], "elements": [dataset["elements"][0]["id"]]},
    )
    assert (response.status_code, response.json()["error"]) == (403, "NotOwner")
    # 403 NotVisible
    response = client.get(f"/analyses/{analysis['item']}", headers=BOB)
    assert (response.status_code, response.json()["error"]) == (403, "NotVisible")
    # 404 UnknownDataset
    response = client.put(
        f"/analyses/{analysis['item']}/dataset",
        headers=ALICE,
        json={"dataset": "99999999-9999-4999-8999-999999999999", "elements": ["x"]},
    )
    assert (response.status_code, response.json()["error"]) == (404, "UnknownDataset")
    # 404 UnknownItem / UnknownAnalysis
    assert client.get("/items/99999999-9999-4999-8999-999999999999").status_code == 404
    assert client.get("/analyses/99999999-9999-4999-8999-999999999999", headers=ALICE).status_code == 404
    # 422 SchemaViolation
    response = client.post(
        "/datasets", headers=ALICE, json={"study_metadata": {}, "elements": [{"files": [], "metadata": {}}]}
    )
    assert (response.status_code, response.json()["error"]) == (422, "SchemaViolation")
    # 422 InvalidGraph
    response = client.post(
        "/pipelines",
        headers=ALICE,
        json={
            "script_location": "/s.sh",
            "env_settings": {},
            "common_dirs": [],
            "stages": {"activities": [{"name": "A"}, {"name": "B"}], "edges": [], "start": "A"},
        },
    )
    assert (response.status_code, response.json()["error"]) == (422, "InvalidGraph")
    # 422 IllegalTransition
    body = {
        "name": "S",
        "version": {"property_schema": [], "workflow": linear_workflow("Only"), "outcome_schemas": {}},
    }
    description_id = client.post("/descriptions", headers=ALICE, json=body).json()["id"]
    item_id = client.post("/items", headers=ALICE, json={"description": description_id, "version": 1, "properties": {}}).json()["id"]
    response = client.post(f"/items/{item_id}/transitions", headers=ALICE, json={"activity": "Only", "transition": "Complete"})
    assert (response.status_code, response.json()["error"]) == (422, "IllegalTransition")
    # 400 malformed body
    assert client.post("/datasets", headers=ALICE, json={"elements": "not-a-list"}).status_code == 400
    # 400 missing agent on mutation
    assert client.post("/analyses").status_code == 400


def test_statelessness_across_restart(tmp_path):
    path = tmp_path / "store.log"
    ledger = Ledger.open(path, clock=TickingClock(), id_seed=4, where="gateway")
    with TestClient(create_app(ledger=ledger)) as first:
        dataset, pipeline = post_study(first)
        analysis = define_and_select(first, dataset, pipeline)
    ledger.close()

    reopened = Ledger.open(path, clock=TickingClock("2017-03-06T10:00:00.000Z"), id_seed=5, where="gateway")
    with TestClient(create_app(ledger=reopened)) as second:
        run = second.post(f"/analyses/{analysis['item']}/run", headers=ALICE, json={"seed": 42})
        assert run.status_code == 200
        assert len(run.json()["elements"]) == 4
    reopened.close()


# -- CLI ------------------------------------------------------------------------


def cli_env(tmp_path, monkeypatch, name="cli-store.log"):
    store = tmp_path / name
    monkeypatch.setenv("ITEMLEDGER_CLOCK_START", "2017-03-06T09:00:00.000Z")
    monkeypatch.setenv("ITEMLEDGER_ID_SEED", "99")
    return str(store)


def test_cli_list_on_fresh_store(tmp_path, monkeypatch, capsys):
    store = cli_env(tmp_path, monkeypatch)
    assert cli.main(["--store", store, "--agent", "alice", "analysis", "list"]) == 0
    assert json.loads(capsys.readouterr().out) == {"analyses": []}


def test_cli_run_without_pipeline_exits_one(tmp_path, monkeypatch, capsys):
    store = cli_env(tmp_path, monkeypatch)
    assert cli.main(["--store", store, "--agent", "alice", "analysis", "define"]) == 0
    analysis_id = json.loads(capsys.readouterr().out)["item"]
    rc = cli.main(["--store", store, "--agent", "alice", "analysis", "run", "--id", analysis_id])
    captured = capsys.readouterr()
    assert rc == 1
    assert "IncompleteDefinition" in captured.err
    assert captured.out == ""


def test_cli_query_csv_on_stdout(tmp_path, monkeypatch, capsys):
    store = cli_env(tmp_path, monkeypatch)
    elements = json.dumps(sample_dataset_elements(2))
    assert cli.main(["--store", store, "--agent", "alice", "dataset", "register",
                     "--metadata", '{"subject_count": 9}', "--elements", elements]) == 0
    capsys.readouterr()
    rc = cli.main(["--store", store, "--agent", "alice", "query", "items", "--kind", "dataset", "--format", "csv"])
    captured = capsys.readouterr()
    assert rc == 0
    assert captured.out.startswith("id,element_count,subject_count\n")


def test_cli_usage_error_exits_two(tmp_path, monkeypatch):
    store = cli_env(tmp_path, monkeypatch)
    with pytest.raises(SystemExit) as err:
        cli.main(["--store", store, "analysis", "nonsense"])
    assert err.value.code == 2


def test_cli_missing_store_is_domain_error(monkeypatch, capsys):
    monkeypatch.delenv("ITEMLEDGER_STORE", raising=False)
    assert cli.main(["--agent", "alice", "analysis", "list"]) == 1
    assert "store" in capsys.readouterr().err


# -- CLI vs HTTP parity ------------------------------------------------------------


def scripted_ops_http(client, dataset_elements):
    dataset = client.post("/datasets", headers=ALICE,
                          json={"study_metadata": {"subject_count": 4}, "elements": dataset_elements}).json()
    pipeline = client.post("/pipelines", headers=ALICE,
                           json={"script_location": "/s.sh", "env_settings": {"mem": "1G"},
                                 "common_dirs": ["/common"], "stages": linear_workflow("A", "B")}).json()
    analysis = client.post("/analyses", headers=ALICE).json()
    ids = [e["id"] for e in dataset["elements"]]
    client.put(f"/analyses/{analysis['item']}/dataset", headers=ALICE,
               json={"dataset": dataset["item"], "elements": ids})
    client.put(f"/analyses/{analysis['item']}/pipeline", headers=ALICE,
               json={"pipeline": pipeline["item"], "parameters": {"t": "1"}})
    client.post(f"/analyses/{analysis['item']}/run", headers=ALICE, json={"seed": 42})
    client.post(f"/analyses/{analysis['item']}/consolidate", headers=ALICE)
    client.post(f"/analyses/{analysis['item']}/annotations", headers=ALICE, json={"text": "fine"})
    client.post(f"/analyses/{analysis['item']}/share", headers=ALICE, json={"target": "bob"})


def scripted_ops_cli(store, dataset_elements, capsys):
    def invoke(*args):
        assert cli.main(["--store", store, "--agent", "alice", "--where", "shared-node", *args]) == 0
        return json.loads(capsys.readouterr().out)

    dataset = invoke("dataset", "register", "--metadata", '{"subject_count": 4}',
                     "--elements", json.dumps(dataset_elements))
    pipeline = invoke("pipeline", "register", "--script", "/s.sh", "--env", '{"mem": "1G"}',
                      "--dirs", '["/common"]', "--stages", json.dumps(linear_workflow("A", "B")))
    analysis = invoke("analysis", "define")
    ids = ",".join(e["id"] for e in dataset["elements"])
    invoke("analysis", "dataset", "--id", analysis["item"], "--dataset", dataset["item"], "--elements", ids)
    invoke("analysis", "pipeline", "--id", analysis["item"], "--pipeline", pipeline["item"],
           "--parameters", '{"t": "1"}')
    invoke("analysis", "run", "--id", analysis["item"])
    invoke("analysis", "consolidate", "--id", analysis["item"])
    invoke("analysis", "annotate", "--id", analysis["item"], "--text", "fine")
    invoke("analysis", "share", "--id", analysis["item"], "--target", "bob")


def test_cli_and_http_produce_identical_stores(tmp_path, monkeypatch, capsys):
    """The same scripted sequence through either surface yields byte-identical
    state snapshots (clock and id generation pinned via the env hooks)."""
    monkeypatch.setenv("ITEMLEDGER_CLOCK_START", "2017-03-06T09:00:00.000Z")
    monkeypatch.setenv("ITEMLEDGER_ID_SEED", "1234")
    elements = sample_dataset_elements(2)

    http_path = tmp_path / "http.log"
    http_ledger = Ledger.from_env(http_path, where="shared-node")
    with TestClient(create_app(ledger=http_ledger)) as client:
        scripted_ops_http(client, elements)
    http_snapshot = http_ledger.snapshot()
    http_ledger.close()

    cli_path = tmp_path / "cli.log"
    scripted_ops_cli(str(cli_path), elements, capsys)
    cli_snapshot = Ledger.from_env(cli_path, where="shared-node").snapshot()

    assert cli_snapshot == http_snapshot
