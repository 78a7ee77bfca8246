import json
import random
from datetime import date

import pytest

from landtriage.detections import (Detection, IncidentalReport, ModelRun,
                                   categorize_incidentals, dedupe,
                                   detection_to_line, parse_detection_line)
from landtriage.engine import Engine, ServiceConfig
from landtriage.errors import NotFoundError, ValidationError
from landtriage.geo import GeoBBox, GeoPoint, bbox_iou
from landtriage.registry import load_registry
from landtriage import fixtures

from . import oracles


def line(det_id, score=0.7, run_id="R1", min_lat=43.0, min_lon=-89.0, **extra):
    obj = {"detection_id": det_id, "run_id": run_id, "score": score,
           "bbox": {"min_lat": min_lat, "min_lon": min_lon,
                    "max_lat": min_lat + 0.002, "max_lon": min_lon + 0.002},
           "image_uri": f"img://{det_id}.png", **extra}
    return json.dumps(obj)


def fresh_engine():
    engine = Engine(config=ServiceConfig(fsync=False))
    engine.register_run("R1", "2023-02-01", "2023-02-02")
    return engine


class TestModelRun:
    def test_dispatch_before_imagery_rejected(self):
        with pytest.raises(ValidationError):
            ModelRun("R1", date(2023, 2, 2), date(2023, 2, 1))

    def test_long_lag_warns_without_error(self):
        run = ModelRun("R1", date(2023, 2, 1), date(2023, 2, 9))
        assert run.lag_warning is not None and "8 days" in run.lag_warning
        assert ModelRun("R2", date(2023, 2, 1), date(2023, 2, 3)).lag_warning is None


class TestIngest:
    def test_empty_file_accepts_nothing(self):
        result = fresh_engine().ingest_detections("R1", "")
        assert result.accepted == 0 and result.rejected == ()

    def test_unknown_run_rejects_batch(self):
        with pytest.raises(NotFoundError):
            fresh_engine().ingest_detections("R9", line("D1"))

    def test_score_out_of_range_rejects_record(self):
        result = fresh_engine().ingest_detections("R1", line("D1", score=1.2))
        assert result.accepted == 0
        assert result.rejected == ((1, "score_out_of_range"),)

    def test_line_numbers_reported(self):
        text = "\n".join([line("D1"), "not json", line("D2", score=-0.1), line("D3")])
        result = fresh_engine().ingest_detections("R1", text)
        assert result.accepted == 2
        assert result.rejected == ((2, "bad_json"), (3, "score_out_of_range"))

    def test_duplicate_within_batch(self):
        result = fresh_engine().ingest_detections("R1", line("D1") + "\n" + line("D1"))
        assert result.accepted == 1
        assert result.rejected == ((2, "duplicate_detection_id"),)

    def test_resubmission_is_idempotent(self):
        engine = fresh_engine()
        text = "\n".join([line("D1"), line("D2"), line("D3")])
        first = engine.ingest_detections("R1", text)
        assert first.accepted == 3
        second = engine.ingest_detections("R1", text)
        assert second.accepted == 0
        assert [r[1] for r in second.rejected] == ["duplicate_detection_id"] * 3

    def test_run_mismatch_in_record(self):
        result = fresh_engine().ingest_detections("R1", line("D1", run_id="R2"))
        assert result.rejected == ((1, "run_mismatch"),)

    def test_centroid_inside_bbox(self):
        engine = fresh_engine()
        engine.ingest_detections("R1", "\n".join(
            line(f"D{i}", min_lat=42.0 + i * 0.1, min_lon=-90.0 + i * 0.05)
            for i in range(20)))
        for det in engine.detections.values():
            assert det.bbox.contains_point(det.centroid)

    def test_trial_regulator_stream_roundtrips_byte_identically(self):
        # 533 detections reach the regulator track; the serialized form of
        # what was stored must equal the submitted file bytes.
        plans = fixtures.build_plans()
        engine = fixtures.build_trial_engine()
        wdnr_ids = {p.detection_id for p in plans if p.wdnr_sent}
        assert len(wdnr_ids) == 533
        by_run: dict[str, list[str]] = {}
        for run_idx in range(len(fixtures.RUN_DISPATCH_DATES)):
            text = fixtures.detection_file_for_run(plans, run_idx)
            for raw in text.splitlines():
                obj = json.loads(raw)
                if obj["detection_id"] in wdnr_ids:
                    by_run.setdefault(obj["run_id"], []).append(raw)
        total = 0
        for run_id, lines in by_run.items():
            for raw in lines:
                det = engine.detections[json.loads(raw)["detection_id"]]
                stored = Detection(detection_id=det.detection_id, run_id=det.run_id,
                                   bbox=det.bbox, score=det.score,
                                   image_uri=det.image_uri,
                                   summer_image_uri=det.summer_image_uri)
                assert detection_to_line(stored) == raw
                total += 1
        assert total == 533


class TestDedupe:
    def box(self, min_lat, min_lon, side=0.002):
        return GeoBBox(min_lat, min_lon, min_lat + side, min_lon + side)

    def det(self, det_id, bbox, run_id="R1", score=0.7):
        return Detection(detection_id=det_id, run_id=run_id, bbox=bbox,
                         score=score, image_uri="img://x.png")

    def test_identical_boxes_flagged_at_any_threshold(self):
        a = self.det("A1", self.box(43.0, -89.0))
        b = self.det("B1", self.box(43.0, -89.0), run_id="R2")
        assert dedupe([a], [b], 1.0) == [("A1", "B1", pytest.approx(1.0))]

    def test_disjoint_boxes_never_flagged(self):
        a = self.det("A1", self.box(43.0, -89.0))
        b = self.det("B1", self.box(44.0, -88.0), run_id="R2")
        assert dedupe([a], [b], 0.01) == []

    def test_threshold_validation(self):
        with pytest.raises(ValidationError):
            dedupe([], [], 0.0)
        with pytest.raises(ValidationError):
            dedupe([], [], 1.5)

    def test_iou_matches_raster_oracle(self):
        rng = random.Random(41)
        for _ in range(25):
            clat, clon = rng.uniform(-50, 50), rng.uniform(-90, -80)
            a = GeoBBox(clat, clon, clat + rng.uniform(0.01, 0.2),
                        clon + rng.uniform(0.01, 0.2))
            b = GeoBBox(clat + rng.uniform(-0.05, 0.1), clon + rng.uniform(-0.05, 0.1),
                        clat + rng.uniform(0.12, 0.3), clon + rng.uniform(0.12, 0.3))
            expected = oracles.raster_iou(
                (a.min_lat, a.min_lon, a.max_lat, a.max_lon),
                (b.min_lat, b.min_lon, b.max_lat, b.max_lon))
            assert bbox_iou(a, b) == pytest.approx(expected, abs=1e-3)


class TestIncidentals:
    def registry(self):
        return load_registry(
            [{"facility_id": "F1", "lat": 43.0, "lon": -89.0, "kind": "cafo"}],
            {"features": []}, [])

    def report(self, report_id, lat=None, lon=None):
        loc = GeoPoint(lat, lon) if lat is not None else None
        return IncidentalReport(report_id=report_id, reporter_verifier_id="V1",
                                observed_on=date(2023, 2, 15), location=loc)

    def detection_at(self, lat, lon, score):
        return Detection(detection_id=f"D{score}", run_id="R1",
                         bbox=GeoBBox(lat - 0.001, lon - 0.001, lat + 0.001, lon + 0.001),
                         score=score, image_uri="img://x.png")

    def test_missing_location_is_non_geocodable(self):
        out = categorize_incidentals([self.report("I1")], self.registry(), [], 0.5)
        assert out.non_geocodable == 1 and out.total == 1

    def test_overlap_below_floor(self):
        dets = [self.detection_at(43.0, -89.0, 0.3)]
        out = categorize_incidentals([self.report("I1", 43.0, -89.0)],
                                     self.registry(), dets, 0.5)
        assert out.detected_below_threshold == 1

    def test_overlap_at_or_above_floor_is_not_a_miss(self):
        dets = [self.detection_at(43.0, -89.0, 0.8)]
        out = categorize_incidentals([self.report("I1", 43.0, -89.0)],
                                     self.registry(), dets, 0.5)
        assert out.detected_at_or_above_floor == 1
        assert out.missed_in_aoi == 0 and out.detected_below_threshold == 0

    def test_outside_aoi(self):
        out = categorize_incidentals([self.report("I1", 44.5, -85.0)],
                                     self.registry(), [], 0.5)
        assert out.outside_aoi == 1

    def test_missed_inside_aoi(self):
        out = categorize_incidentals([self.report("I1", 43.01, -89.01)],
                                     self.registry(), [], 0.5)
        assert out.missed_in_aoi == 1

    def test_categories_partition_reports(self):
        rng = random.Random(43)
        registry = self.registry()
        dets = [self.detection_at(43.0, -89.0, 0.3), self.detection_at(43.02, -89.0, 0.9)]
        reports = []
        for i in range(200):
            if i % 7 == 0:
                reports.append(self.report(f"I{i}"))
            else:
                reports.append(self.report(f"I{i}", rng.uniform(42.9, 43.1),
                                           rng.uniform(-89.1, -88.9)))
        out = categorize_incidentals(reports, registry, dets, 0.5)
        assert out.total == 200
        assert len(out.categories) == 200

    def test_trial_breakdown(self, trial_engine):
        out = trial_engine.incidental_breakdown()
        assert (out.non_geocodable, out.detected_below_threshold,
                out.outside_aoi, out.missed_in_aoi) == (5, 2, 14, 13)
        assert out.total == 34
