"""Record API responses from the bundled trial fixture into tests/fixtures/.

Run from the frontend directory (the landtriage package must be installed):
    python3 scripts/record_fixtures.py
"""

import json
from pathlib import Path

from fastapi.testclient import TestClient

from landtriage import fixtures
from landtriage.service import create_app

OUT_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

ENDPOINTS = {
    "assignments_elpc_v01.json": "/v1/assignments?org=elpc&verifier_id=V01",
    "confirmation_elpc.json": "/v1/reports/confirmation_by_bucket?org=elpc",
    "confirmation_wdnr.json": "/v1/reports/confirmation_by_bucket?org=wdnr",
    "confirmation_wdnr_screened.json":
        "/v1/reports/confirmation_by_bucket?org=wdnr&screened_only=true",
    "lift.json": "/v1/reports/lift?total_images=40995",
    "agreement.json": "/v1/reports/agreement",
    "compliance.json": "/v1/reports/compliance",
    "process.json": "/v1/reports/process?org=elpc",
    "group_comparison.json": "/v1/reports/group_comparison",
    "confidence_crosstab.json": "/v1/reports/confidence_crosstab",
    "incidentals.json": "/v1/reports/incidentals",
}


def record_pending_queue() -> None:
    """The trial fixture decides every queued item, so a pending queue is
    recorded from a replica stopped right after routing the first run."""
    from landtriage.engine import Engine, ServiceConfig

    plans = fixtures.build_plans()
    engine = Engine(config=ServiceConfig(fsync=False))
    facilities, fields_fc, verifiers = fixtures.registry_docs()
    engine.load_registry(facilities, fields_fc, verifiers)
    dispatched = fixtures.RUN_DISPATCH_DATES[0]
    engine.register_run("RUN-01", dispatched.replace(day=dispatched.day - 1), dispatched)
    engine.ingest_detections("RUN-01", fixtures.detection_file_for_run(plans, 0))
    engine.route_wdnr("RUN-01")
    client = TestClient(create_app(engine))
    body = client.get("/v1/screening?status=pending").json()
    (OUT_DIR / "screening_pending.json").write_text(json.dumps(body, indent=2) + "\n")
    print("recorded screening_pending.json")


def main() -> None:
    engine = fixtures.build_trial_engine()
    client = TestClient(create_app(engine))
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    record_pending_queue()
    for filename, path in ENDPOINTS.items():
        response = client.get(path)
        response.raise_for_status()
        (OUT_DIR / filename).write_text(json.dumps(response.json(), indent=2) + "\n")
        print(f"recorded {filename}")
    # One packet, picked from an assignment that lacks summer imagery, plus
    # one complete packet.
    assignments = client.get("/v1/assignments?org=elpc").json()
    complete = incomplete = None
    for assignment in assignments:
        packet = client.get(f"/v1/packets/{assignment['assignment_id']}").json()
        if packet["summer_image_uri"] is None and incomplete is None:
            incomplete = packet
        elif packet["summer_image_uri"] is not None and complete is None:
            complete = packet
        if complete and incomplete:
            break
    (OUT_DIR / "packet_complete.json").write_text(json.dumps(complete, indent=2) + "\n")
    (OUT_DIR / "packet_missing_summer.json").write_text(
        json.dumps(incomplete, indent=2) + "\n")
    print("recorded packet_complete.json, packet_missing_summer.json")


if __name__ == "__main__":
    main()
