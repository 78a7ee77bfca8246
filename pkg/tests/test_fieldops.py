import json
from datetime import date

import pytest

from landtriage.engine import Engine, ServiceConfig
from landtriage.errors import ConflictError, NotFoundError, ValidationError
from landtriage.fieldops import (FieldResponse, latency_days, parse_responses_csv)
from landtriage.registry import Org
from landtriage.routing import Assignment


def engine_with_assignments():
    engine = Engine(config=ServiceConfig(fsync=False))
    field = {"type": "Feature",
             "properties": {"field_id": "N1", "permittee_facility_id": "F1"},
             "geometry": {"type": "Polygon", "coordinates": [[
                 [-89.05, 42.95], [-88.95, 42.95], [-88.95, 43.05],
                 [-89.05, 43.05], [-89.05, 42.95]]]}}
    engine.load_registry(
        [{"facility_id": "F1", "lat": 43.0, "lon": -89.0, "kind": "cafo"}],
        {"features": [field]},
        [{"verifier_id": "V1", "lat": 43.0, "lon": -89.0, "org": "elpc", "active": True}])
    engine.register_run("R1", "2023-02-01", "2023-02-02")
    lines = []
    for i, (det_id, with_summer) in enumerate([("D1", True), ("D2", False)]):
        obj = {"detection_id": det_id, "run_id": "R1", "score": 0.8 - i * 0.1,
               "bbox": {"min_lat": 43.0, "min_lon": -89.0 - i * 0.001,
                        "max_lat": 43.002, "max_lon": -88.998 - i * 0.001},
               "image_uri": f"img://{det_id}.png"}
        if with_summer:
            obj["summer_image_uri"] = f"img://summer/{det_id}.png"
        lines.append(json.dumps(obj))
    engine.ingest_detections("R1", "\n".join(lines))
    engine.route_elpc("R1")
    engine.route_wdnr("R1")
    engine.record_screening("D1", "accept", decided_on="2023-02-03")
    return engine


class TestSubmitResponse:
    def payload(self, **over):
        base = {"assignment_id": "A-elpc-D1-V1", "visited_on": "2023-02-03",
                "location_visible": True, "manure_present": True,
                "reporter_confidence": "high"}
        base.update(over)
        return base

    def test_visible_confirmed_stored(self):
        engine = engine_with_assignments()
        response = engine.submit_response(self.payload())
        assert response.manure_present is True
        assert engine.responses[response.response_id] == response

    def test_not_visible_with_assessment_rejected(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_response(self.payload(location_visible=False))

    def test_visible_without_assessment_rejected(self):
        engine = engine_with_assignments()
        bad = self.payload()
        del bad["manure_present"]
        with pytest.raises(ValidationError):
            engine.submit_response(bad)

    def test_no_visit_cannot_see_location(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_response(self.payload(site_visited=False))

    def test_visit_before_dispatch_rejected(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_response(self.payload(visited_on="2023-02-01"))

    def test_second_response_conflicts(self):
        engine = engine_with_assignments()
        engine.submit_response(self.payload())
        with pytest.raises(ConflictError):
            engine.submit_response(self.payload(manure_present=False))

    def test_unknown_assignment(self):
        engine = engine_with_assignments()
        with pytest.raises(NotFoundError):
            engine.submit_response(self.payload(assignment_id="A-elpc-D9-V1"))

    def test_regulator_assignment_rejected(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_response(self.payload(assignment_id="A-wdnr-D1"))

    def test_trial_counts(self, trial_engine):
        responses = trial_engine.responses.values()
        assert len(responses) == 383
        assert sum(r.location_visible for r in responses) == 284
        assert sum(bool(r.manure_present) for r in responses) == 93


class TestSubmitDetermination:
    def payload(self, **over):
        base = {"assignment_id": "A-wdnr-D1", "decided_on": "2023-02-05",
                "manure_present": True, "compliance": "violation"}
        base.update(over)
        return base

    def test_confirmed_violation_stored(self):
        engine = engine_with_assignments()
        determination = engine.submit_determination(self.payload())
        assert determination.compliance.value == "violation"

    def test_no_manure_with_ruling_rejected(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_determination(self.payload(manure_present=False))

    def test_confirmed_without_ruling_rejected(self):
        engine = engine_with_assignments()
        bad = self.payload()
        del bad["compliance"]
        with pytest.raises(ValidationError):
            engine.submit_determination(bad)

    def test_advocacy_assignment_rejected(self):
        engine = engine_with_assignments()
        with pytest.raises(ValidationError):
            engine.submit_determination(self.payload(assignment_id="A-elpc-D1-V1"))

    def test_duplicate_conflicts(self):
        engine = engine_with_assignments()
        engine.submit_determination(self.payload())
        with pytest.raises(ConflictError):
            engine.submit_determination(self.payload())

    def test_trial_split(self, trial_engine):
        confirmed = [d for d in trial_engine.determinations.values() if d.manure_present]
        assert len(trial_engine.determinations) == 123
        assert len(confirmed) == 64
        by_class = {}
        for d in confirmed:
            by_class[d.compliance.value] = by_class.get(d.compliance.value, 0) + 1
        assert by_class == {"violation": 11, "compliant_pre_window": 27,
                            "compliant_unregulated_entity": 23, "compliant_other": 3}


class TestLatency:
    def assignment(self, dispatched):
        return Assignment(assignment_id="A-elpc-D1-V1", detection_id="D1",
                          org=Org.ELPC, dispatched_on=dispatched,
                          verifier_id="V1", rank=1)

    def response(self, visited):
        return FieldResponse(response_id="FR1", assignment_id="A-elpc-D1-V1",
                             visited_on=visited, location_visible=True,
                             manure_present=False)

    def test_same_day_visit(self):
        assert latency_days(self.assignment(date(2023, 2, 1)),
                            self.response(date(2023, 2, 1))) == 0

    def test_two_day_gap(self):
        assert latency_days(self.assignment(date(2023, 2, 1)),
                            self.response(date(2023, 2, 3))) == 2

    def test_trial_distribution(self, trial_engine):
        latencies = []
        for response in trial_engine.responses.values():
            assignment = trial_engine.assignments[response.assignment_id]
            latencies.append(latency_days(assignment, response))
        assert all(d >= 0 for d in latencies)
        assert max(latencies) == 4
        within_one = sum(1 for d in latencies if d <= 1) / len(latencies)
        assert within_one >= 0.90


class TestPacket:
    def test_full_manifest(self):
        engine = engine_with_assignments()
        manifest = engine.packet("A-elpc-D1-V1")
        assert manifest.title == "Detection D1 — 2023-02-01"
        assert manifest.detection_image_uri == "img://D1.png"
        assert manifest.summer_image_uri == "img://summer/D1.png"
        assert manifest.north_arrow is True
        assert manifest.static_map_uri.startswith("staticmap://")
        assert manifest.notes == ()

    def test_missing_summer_image_noted_not_fatal(self):
        engine = engine_with_assignments()
        manifest = engine.packet("A-elpc-D2-V1")
        assert manifest.summer_image_uri is None
        assert any("summer" in n for n in manifest.notes)

    def test_coordinates_are_bbox_midpoint_to_six_decimals(self):
        engine = engine_with_assignments()
        manifest = engine.packet("A-elpc-D1-V1")
        detection = engine.detections["D1"]
        assert manifest.centroid_lat == round(detection.centroid.lat, 6)
        assert manifest.centroid_lon == round(detection.centroid.lon, 6)

    def test_packet_is_pure_function_of_state(self):
        engine = engine_with_assignments()
        first = engine.packet("A-elpc-D1-V1")
        second = engine.packet("A-elpc-D1-V1")
        assert first == second
        assert json.dumps(first.to_dict()) == json.dumps(second.to_dict())

    def test_unknown_assignment(self):
        engine = engine_with_assignments()
        with pytest.raises(NotFoundError):
            engine.packet("A-elpc-D9-V1")


class TestResponsesCsv:
    HEADER = "assignment_id,visited_on,location_visible,manure_present,reporter_confidence,notes"

    def test_exact_header_required(self):
        with pytest.raises(ValidationError, match="missing columns"):
            parse_responses_csv("assignment,when\nA,2023-02-03\n")

    def test_parses_rows_with_absent_fields(self):
        text = (self.HEADER + "\n"
                "A-elpc-D1-V1,2023-02-03,true,true,high,ok\n"
                "A-elpc-D2-V1,2023-02-03,false,,,\n")
        rows = parse_responses_csv(text)
        assert rows[0]["manure_present"] is True
        assert "manure_present" not in rows[1]
        assert "reporter_confidence" not in rows[1]

    def test_bad_boolean_names_row(self):
        text = self.HEADER + "\nA-elpc-D1-V1,2023-02-03,maybe,,,\n"
        with pytest.raises(ValidationError, match="row 2"):
            parse_responses_csv(text)

    def test_bulk_import_through_engine(self):
        engine = engine_with_assignments()
        text = (self.HEADER + "\n"
                "A-elpc-D1-V1,2023-02-03,true,true,high,confirmed\n"
                "A-elpc-D2-V1,2023-02-04,false,,,could not see field\n"
                "A-elpc-D9-V1,2023-02-04,true,false,,\n")
        out = engine.import_responses_csv(text)
        assert out["accepted"] == 2
        assert out["rejected"] == [{"row": 4, "reason": "unknown_assignment"}]
