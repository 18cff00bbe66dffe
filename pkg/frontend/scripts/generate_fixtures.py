"""Capture real gateway responses as dashboard test fixtures.

Run from the repository root after installing the primary package:

    python3 frontend/scripts/generate_fixtures.py

Writes JSON payloads under frontend/tests/fixtures/ so the dashboard
tests compare view-model output against actual gateway bytes.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from itemledger import AnchoredClock, Ledger
from itemledger.api.app import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

ALICE = {"X-Agent": "alice"}


def elements(n: int) -> list[dict]:
    return [
        {"files": [[f"/data/subject{i:02d}/scan.nii", f"hash{i:04d}"]], "metadata": {"subject": f"s{i:02d}"}}
        for i in range(n)
    ]


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    ledger = Ledger(clock=AnchoredClock(), id_seed=77, where="fixture-gateway")
    client = TestClient(create_app(ledger=ledger))

    dataset = client.post(
        "/datasets",
        headers=ALICE,
        json={"study_metadata": {"study": "adni-vs-controls", "modality": "MRI", "subject_count": 12},
              "elements": elements(6)},
    ).json()
    pipeline = client.post(
        "/pipelines",
        headers=ALICE,
        json={
            "script_location": "/pipelines/cortical-thickness.sh",
            "env_settings": {"threads": "2"},
            "common_dirs": ["/common/atlases"],
            "stages": {
                "activities": [{"name": "Align"}, {"name": "Segment"}, {"name": "Score"}],
                "edges": [["Align", "Segment"], ["Segment", "Score"]],
                "start": "Align",
            },
        },
    ).json()
    analysis = client.post("/analyses", headers=ALICE).json()
    selection = [e["id"] for e in dataset["elements"]][:4]
    client.put(f"/analyses/{analysis['item']}/dataset", headers=ALICE,
               json={"dataset": dataset["item"], "elements": selection})
    client.put(f"/analyses/{analysis['item']}/pipeline", headers=ALICE,
               json={"pipeline": pipeline["item"], "parameters": {"threshold": "0.5"}})
    client.post(f"/analyses/{analysis['item']}/run", headers=ALICE, json={"seed": 42})
    client.post(f"/analyses/{analysis['item']}/consolidate", headers=ALICE)
    client.post(f"/analyses/{analysis['item']}/annotations", headers=ALICE,
                json={"text": "atrophy biomarker confirmed"})
    client.post(f"/analyses/{analysis['item']}/share", headers=ALICE, json={"target": "bob"})

    fixtures = {
        "query_items.json": client.get(
            "/query/items", params={"kind": "dataset", "q": "subject_count:gte:10"}
        ).json(),
        "analyses.json": client.get("/analyses", headers=ALICE).json(),
        "analysis_detail.json": client.get(f"/analyses/{analysis['item']}", headers=ALICE).json(),
        "dataset_detail.json": client.get(f"/datasets/{dataset['item']}").json(),
        "prov.json": client.get(f"/prov/{analysis['item']}", headers=ALICE).json(),
        "run_error.json": client.post(
            f"/analyses/{client.post('/analyses', headers=ALICE).json()['item']}/run",
            headers=ALICE,
            json={"seed": 1},
        ).json(),
    }
    for name, payload in fixtures.items():
        (FIXTURES / name).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print(f"wrote {name}")


if __name__ == "__main__":
    main()
