"""Model runs, detection records, and incidental (off-pipeline) reports.

Detections arrive as line-delimited JSON from the external detector, one
object per line with exact keys detection_id, run_id, score, bbox
{min_lat, min_lon, max_lat, max_lon}, image_uri, and optional
summer_image_uri. Parsing and serialization round-trip byte-identically.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import date
from enum import Enum

from .errors import ValidationError
from .geo import GeoBBox, GeoPoint, bbox_iou, make_aoi
from .registry import Registry

log = logging.getLogger(__name__)

# Runs normally use imagery captured the previous day; a longer gap is
# suspicious but not fatal.
DISPATCH_LAG_WARN_DAYS = 3


@dataclass(frozen=True)
class ModelRun:
    run_id: str
    imagery_date: date
    dispatched_on: date

    def __post_init__(self):
        if not self.run_id:
            raise ValidationError("run_id must be non-empty", code="invalid_run", field="run_id")
        if self.dispatched_on < self.imagery_date:
            raise ValidationError("dispatched_on before imagery_date",
                                  code="invalid_run", field="dispatched_on")

    @property
    def lag_days(self) -> int:
        return (self.dispatched_on - self.imagery_date).days

    @property
    def lag_warning(self) -> str | None:
        if self.lag_days > DISPATCH_LAG_WARN_DAYS:
            return (f"run {self.run_id}: dispatched {self.lag_days} days after "
                    f"imagery capture")
        return None

    def to_dict(self) -> dict:
        return {"run_id": self.run_id, "imagery_date": self.imagery_date.isoformat(),
                "dispatched_on": self.dispatched_on.isoformat()}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelRun":
        return cls(run_id=d["run_id"],
                   imagery_date=date.fromisoformat(d["imagery_date"]),
                   dispatched_on=date.fromisoformat(d["dispatched_on"]))


@dataclass(frozen=True)
class Detection:
    detection_id: str
    run_id: str
    bbox: GeoBBox
    score: float
    image_uri: str
    summer_image_uri: str | None = None
    nearest_facility_id: str | None = None

    def __post_init__(self):
        if not self.detection_id:
            raise ValidationError("detection_id must be non-empty",
                                  code="invalid_detection", field="detection_id")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score} outside [0, 1]",
                                  code="score_out_of_range", field="score")

    @property
    def centroid(self) -> GeoPoint:
        return self.bbox.center

    def to_dict(self) -> dict:
        d = {"detection_id": self.detection_id, "run_id": self.run_id,
             "score": self.score, "bbox": self.bbox.to_dict(),
             "image_uri": self.image_uri}
        if self.summer_image_uri is not None:
            d["summer_image_uri"] = self.summer_image_uri
        if self.nearest_facility_id is not None:
            d["nearest_facility_id"] = self.nearest_facility_id
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Detection":
        return cls(detection_id=d["detection_id"], run_id=d["run_id"],
                   bbox=GeoBBox.from_dict(d["bbox"]), score=d["score"],
                   image_uri=d["image_uri"],
                   summer_image_uri=d.get("summer_image_uri"),
                   nearest_facility_id=d.get("nearest_facility_id"))


def detection_to_line(det: Detection) -> str:
    """Serialize one detection in the external file format, canonical key
    order, no trailing newline."""
    obj = {
        "detection_id": det.detection_id,
        "run_id": det.run_id,
        "score": det.score,
        "bbox": {"min_lat": det.bbox.min_lat, "min_lon": det.bbox.min_lon,
                 "max_lat": det.bbox.max_lat, "max_lon": det.bbox.max_lon},
        "image_uri": det.image_uri,
    }
    if det.summer_image_uri is not None:
        obj["summer_image_uri"] = det.summer_image_uri
    return json.dumps(obj, separators=(", ", ": "))


def parse_detection_line(line: str, run_id: str) -> Detection:
    """Parse one detection-file line; raises ValidationError with a
    machine-readable code on any defect."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"bad JSON: {exc.msg}", code="bad_json")
    if not isinstance(obj, dict):
        raise ValidationError("detection line must be a JSON object", code="bad_json")
    for key in ("detection_id", "run_id", "score", "bbox", "image_uri"):
        if key not in obj:
            raise ValidationError(f"missing field {key}", code="missing_field", field=key)
    if obj["run_id"] != run_id:
        raise ValidationError(f"record run_id {obj['run_id']!r} does not match batch run",
                              code="run_mismatch", field="run_id")
    score = obj["score"]
    if not isinstance(score, (int, float)) or isinstance(score, bool) or not 0.0 <= score <= 1.0:
        raise ValidationError(f"score {score!r} outside [0, 1]",
                              code="score_out_of_range", field="score")
    return Detection(
        detection_id=str(obj["detection_id"]),
        run_id=run_id,
        bbox=GeoBBox.from_dict(obj["bbox"]),
        score=float(score),
        image_uri=str(obj["image_uri"]),
        summer_image_uri=obj.get("summer_image_uri"),
    )


@dataclass(frozen=True)
class IngestResult:
    accepted: int
    rejected: tuple[tuple[int, str], ...] = ()  # (1-based line number, reason code)

    def to_dict(self) -> dict:
        return {"accepted": self.accepted,
                "rejected": [{"line": n, "reason": r} for n, r in self.rejected]}


def dedupe(detections_a: list[Detection], detections_b: list[Detection],
           iou_threshold: float) -> list[tuple[str, str, float]]:
    """Flag detection pairs from two runs whose geographic IoU meets the
    threshold. Returns (id_a, id_b, iou) triples; never deletes anything."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValidationError("iou_threshold must be in (0, 1]",
                              code="invalid_threshold", field="iou_threshold")
    pairs = []
    for a in detections_a:
        for b in detections_b:
            iou = bbox_iou(a.bbox, b.bbox)
            if iou >= iou_threshold:
                pairs.append((a.detection_id, b.detection_id, iou))
    return pairs


class IncidentalCategory(str, Enum):
    NON_GEOCODABLE = "non_geocodable"
    DETECTED_BELOW_THRESHOLD = "detected_below_threshold"
    OUTSIDE_AOI = "outside_aoi"
    MISSED_IN_AOI = "missed_in_aoi"
    # A report that overlaps a detection at or above the dispatch floor was
    # found by the model, so it lands in no miss category.
    DETECTED_AT_OR_ABOVE_FLOOR = "detected_at_or_above_floor"


@dataclass(frozen=True)
class IncidentalReport:
    """A spreading event a verifier happened across outside the assigned
    detections. Location may be absent when the report cannot be geocoded."""

    report_id: str
    reporter_verifier_id: str
    observed_on: date
    location: GeoPoint | None = None
    notes: str = ""

    def __post_init__(self):
        if not self.report_id:
            raise ValidationError("report_id must be non-empty",
                                  code="invalid_report", field="report_id")

    def to_dict(self) -> dict:
        d = {"report_id": self.report_id,
             "reporter_verifier_id": self.reporter_verifier_id,
             "observed_on": self.observed_on.isoformat(), "notes": self.notes}
        if self.location is not None:
            d["lat"] = self.location.lat
            d["lon"] = self.location.lon
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IncidentalReport":
        loc = None
        if d.get("lat") is not None and d.get("lon") is not None:
            loc = GeoPoint(d["lat"], d["lon"])
        return cls(report_id=d["report_id"],
                   reporter_verifier_id=d.get("reporter_verifier_id", ""),
                   observed_on=date.fromisoformat(d["observed_on"]),
                   location=loc, notes=d.get("notes", ""))


@dataclass
class IncidentalBreakdown:
    non_geocodable: int = 0
    detected_below_threshold: int = 0
    outside_aoi: int = 0
    missed_in_aoi: int = 0
    detected_at_or_above_floor: int = 0
    categories: dict = field(default_factory=dict)  # report_id -> category

    @property
    def total(self) -> int:
        return (self.non_geocodable + self.detected_below_threshold
                + self.outside_aoi + self.missed_in_aoi + self.detected_at_or_above_floor)

    def to_dict(self) -> dict:
        return {"total": self.total, "counts": {
            "non_geocodable": self.non_geocodable,
            "detected_below_threshold": self.detected_below_threshold,
            "outside_aoi": self.outside_aoi,
            "missed_in_aoi": self.missed_in_aoi,
            "detected_at_or_above_floor": self.detected_at_or_above_floor,
        }}


def categorize_incidentals(reports: list[IncidentalReport], registry: Registry,
                           detections: list[Detection], score_floor: float,
                           aoi_side_m: float = 6_000.0) -> IncidentalBreakdown:
    """Assign each incidental report to exactly one category.

    Evaluation order per report: no usable location; overlapped by a
    detection below the dispatch floor; outside every facility AOI; else a
    miss inside the detection area. A report overlapped by a detection at
    or above the floor was found by the model and is counted apart from
    the miss categories.
    """
    aois = [make_aoi(f.location, aoi_side_m) for f in registry.facilities.values()]
    out = IncidentalBreakdown()
    for report in reports:
        category = _categorize_one(report, aois, detections, score_floor)
        out.categories[report.report_id] = category
        if category is IncidentalCategory.NON_GEOCODABLE:
            out.non_geocodable += 1
        elif category is IncidentalCategory.DETECTED_BELOW_THRESHOLD:
            out.detected_below_threshold += 1
        elif category is IncidentalCategory.OUTSIDE_AOI:
            out.outside_aoi += 1
        elif category is IncidentalCategory.MISSED_IN_AOI:
            out.missed_in_aoi += 1
        else:
            out.detected_at_or_above_floor += 1
    return out


def _categorize_one(report: IncidentalReport, aois: list[GeoBBox],
                    detections: list[Detection], score_floor: float) -> IncidentalCategory:
    if report.location is None:
        return IncidentalCategory.NON_GEOCODABLE
    overlapping = [d for d in detections if d.bbox.contains_point(report.location)]
    if any(d.score >= score_floor for d in overlapping):
        return IncidentalCategory.DETECTED_AT_OR_ABOVE_FLOOR
    if overlapping:
        return IncidentalCategory.DETECTED_BELOW_THRESHOLD
    if not any(aoi.contains_point(report.location) for aoi in aois):
        return IncidentalCategory.OUTSIDE_AOI
    return IncidentalCategory.MISSED_IN_AOI
