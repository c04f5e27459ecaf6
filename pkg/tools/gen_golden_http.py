"""Freeze the reference HTTP conversation used by the service contract tests.

Drives one scripted rhinitis consultation end to end through the live app and
records every exchange.  Volatile values (the session id, absolute data paths)
are replaced with stable placeholders so the fixture is machine-independent.
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from patience.backends import BackendConfig
from patience.backends.scripted import ScriptedBackend
from patience.engine import SessionConfig
from patience.service import ServiceConfig, create_app
from patience.sim import load_cases

ROOT = Path(__file__).resolve().parent.parent
KB_PATH = str(ROOT / "data" / "sample_kb.jsonl")
SCRIPT_DIR = str(ROOT / "data" / "scripts")
OUT_PATH = ROOT / "tests" / "golden" / "http_conversation.json"
CASE_ID = "rhinitis_pollen"


def normalize(text: str, session_id: str) -> str:
    text = text.replace(session_id, "<session>")
    text = text.replace(KB_PATH, "<kb>")
    text = text.replace(SCRIPT_DIR, "<scripts>")
    return text


def main() -> None:
    import tempfile

    profiles = {p.case_id: p for p in load_cases(ROOT / "data" / "cases")}
    profile = profiles[CASE_ID]
    patient = ScriptedBackend(BackendConfig(kind="scripted", script_dir=SCRIPT_DIR))

    with tempfile.TemporaryDirectory() as tmp:
        config = ServiceConfig(
            session=SessionConfig(
                kb_path=KB_PATH,
                backend=BackendConfig(kind="scripted", script_dir=SCRIPT_DIR),
            ),
            transcript_dir=tmp,
        )
        client = TestClient(create_app(config))
        exchanges = []

        def record(method: str, path: str, body, response, session_id: str) -> None:
            exchanges.append(
                {
                    "method": method,
                    "path": normalize(path, session_id),
                    "body": body,
                    "status": response.status_code,
                    "response": json.loads(normalize(response.text, session_id)),
                }
            )

        body = {"opening_statement": profile.opening_statement}
        response = client.post("/sessions", json=body)
        assert response.status_code == 201, response.text
        payload = response.json()
        session_id = payload["session_id"]
        record("POST", "/sessions", body, response, session_id)

        while payload["status"] == "active":
            answer = patient.respond_as_patient(
                profile, payload["question"]["text"], []
            ).value
            body = {"response": answer}
            path = f"/sessions/{session_id}/answer"
            response = client.post(path, json=body)
            assert response.status_code == 200, response.text
            payload = response.json()
            record("POST", path, body, response, session_id)

        path = f"/sessions/{session_id}/trace"
        response = client.get(path)
        assert response.status_code == 200, response.text
        record("GET", path, None, response, session_id)

    assert payload["diagnosis"]["disease_id"] == "allergic_rhinitis"
    doc = {"format": "golden-http", "version": 1, "case": CASE_ID, "exchanges": exchanges}
    OUT_PATH.parent.mkdir(parents=True, exist_ok=True)
    OUT_PATH.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(f"wrote {OUT_PATH} with {len(exchanges)} exchanges")


if __name__ == "__main__":
    main()
