"""Field responses, regulator determinations, follow-up latency, and
printable packet manifests.

One response per assignment: the first write wins and later submissions
conflict, which keeps follow-up rates honest. Verifier responses may note
that no site visit happened (impassable roads, reassignment); such
responses still count as follow-up but not toward visit-based rates.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from enum import Enum

from .compliance import ComplianceOutcome
from .detections import Detection, ModelRun
from .errors import ValidationError
from .routing import Assignment


class ReporterConfidence(str, Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"


@dataclass(frozen=True)
class FieldResponse:
    response_id: str
    assignment_id: str
    visited_on: date
    location_visible: bool
    manure_present: bool | None = None
    site_visited: bool = True
    reporter_confidence: ReporterConfidence | None = None
    notes: str = ""
    photo_uris: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.response_id:
            raise ValidationError("response_id must be non-empty",
                                  code="invalid_response", field="response_id")
        if not self.site_visited and self.location_visible:
            raise ValidationError("location cannot be visible without a site visit",
                                  code="invalid_response", field="location_visible")
        if self.location_visible and self.manure_present is None:
            raise ValidationError("visible location needs a manure assessment",
                                  code="invalid_response", field="manure_present")
        if not self.location_visible and self.manure_present is not None:
            raise ValidationError("manure assessment requires a visible location",
                                  code="invalid_response", field="manure_present")

    def to_dict(self) -> dict:
        return {"response_id": self.response_id, "assignment_id": self.assignment_id,
                "visited_on": self.visited_on.isoformat(),
                "location_visible": self.location_visible,
                "manure_present": self.manure_present,
                "site_visited": self.site_visited,
                "reporter_confidence": self.reporter_confidence.value if self.reporter_confidence else None,
                "notes": self.notes, "photo_uris": list(self.photo_uris)}

    @classmethod
    def from_dict(cls, d: dict) -> "FieldResponse":
        conf = d.get("reporter_confidence")
        return cls(response_id=d["response_id"], assignment_id=d["assignment_id"],
                   visited_on=date.fromisoformat(d["visited_on"]),
                   location_visible=bool(d["location_visible"]),
                   manure_present=d.get("manure_present"),
                   site_visited=bool(d.get("site_visited", True)),
                   reporter_confidence=ReporterConfidence(conf) if conf else None,
                   notes=d.get("notes", ""),
                   photo_uris=tuple(d.get("photo_uris", ())))


@dataclass(frozen=True)
class Determination:
    determination_id: str
    assignment_id: str
    decided_on: date
    manure_present: bool
    compliance: ComplianceOutcome | None = None
    method_notes: str = ""

    def __post_init__(self):
        if not self.determination_id:
            raise ValidationError("determination_id must be non-empty",
                                  code="invalid_determination", field="determination_id")
        if self.manure_present and self.compliance is None:
            raise ValidationError("confirmed manure needs a compliance ruling",
                                  code="invalid_determination", field="compliance")
        if not self.manure_present and self.compliance is not None:
            raise ValidationError("compliance ruling requires confirmed manure",
                                  code="invalid_determination", field="compliance")

    def to_dict(self) -> dict:
        return {"determination_id": self.determination_id,
                "assignment_id": self.assignment_id,
                "decided_on": self.decided_on.isoformat(),
                "manure_present": self.manure_present,
                "compliance": self.compliance.value if self.compliance else None,
                "method_notes": self.method_notes}

    @classmethod
    def from_dict(cls, d: dict) -> "Determination":
        comp = d.get("compliance")
        return cls(determination_id=d["determination_id"],
                   assignment_id=d["assignment_id"],
                   decided_on=date.fromisoformat(d["decided_on"]),
                   manure_present=bool(d["manure_present"]),
                   compliance=ComplianceOutcome(comp) if comp else None,
                   method_notes=d.get("method_notes", ""))


def latency_days(assignment: Assignment, response: FieldResponse) -> int:
    """Whole days between dispatch and the field visit."""
    days = (response.visited_on - assignment.dispatched_on).days
    if days < 0:
        raise ValidationError("visit precedes dispatch", code="invalid_response",
                              field="visited_on")
    return days


@dataclass(frozen=True)
class PacketManifest:
    """Everything the print layout needs for one field packet."""

    assignment_id: str
    title: str
    detection_image_uri: str
    summer_image_uri: str | None
    static_map_uri: str
    capture_date: date
    centroid_lat: float
    centroid_lon: float
    bbox: dict
    north_arrow: bool = True
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"assignment_id": self.assignment_id, "title": self.title,
                "detection_image_uri": self.detection_image_uri,
                "summer_image_uri": self.summer_image_uri,
                "static_map_uri": self.static_map_uri,
                "north_arrow": self.north_arrow,
                "capture_date": self.capture_date.isoformat(),
                "centroid": {"lat": self.centroid_lat, "lon": self.centroid_lon},
                "bbox": self.bbox, "notes": list(self.notes)}


def build_packet(assignment: Assignment, detection: Detection, run: ModelRun) -> PacketManifest:
    """Assemble the packet manifest for an assignment.

    A missing summer image is noted, not fatal: early packets in the trial
    lacked one. The static map is a deterministic reference derived from
    the detection centroid, since packets carry references rather than
    rendered tiles.
    """
    centroid = detection.centroid
    lat = round(centroid.lat, 6)
    lon = round(centroid.lon, 6)
    notes = []
    if detection.summer_image_uri is None:
        notes.append("summer imagery unavailable for this detection")
    return PacketManifest(
        assignment_id=assignment.assignment_id,
        title=f"Detection {detection.detection_id} — {run.imagery_date.isoformat()}",
        detection_image_uri=detection.image_uri,
        summer_image_uri=detection.summer_image_uri,
        static_map_uri=f"staticmap://{lat:.6f},{lon:.6f}?zoom=15",
        capture_date=run.imagery_date,
        centroid_lat=lat,
        centroid_lon=lon,
        bbox=detection.bbox.to_dict(),
        north_arrow=True,
        notes=tuple(notes),
    )


RESPONSE_CSV_COLUMNS = ("assignment_id", "visited_on", "location_visible",
                        "manure_present", "reporter_confidence", "notes")


def _parse_bool(raw: str, column: str, row: int) -> bool:
    norm = raw.strip().lower()
    if norm in ("true", "yes", "1"):
        return True
    if norm in ("false", "no", "0"):
        return False
    raise ValidationError(f"row {row}: {column} must be true/false, got {raw!r}",
                          code="invalid_csv_value", field=column)


def parse_responses_csv(text: str) -> list[dict]:
    """Parse the bulk-backfill CSV into response payload dicts.

    The header must carry the exact documented column names; optional
    site_visited and response_id columns are also honored. Empty
    manure_present and reporter_confidence cells mean absent.
    """
    reader = csv.DictReader(io.StringIO(text))
    header = reader.fieldnames or []
    missing = [c for c in RESPONSE_CSV_COLUMNS if c not in header]
    if missing:
        raise ValidationError(f"response CSV missing columns: {', '.join(missing)}",
                              code="invalid_csv_header", field=missing[0])
    payloads = []
    for i, row in enumerate(reader, start=2):
        payload = {
            "assignment_id": row["assignment_id"].strip(),
            "visited_on": row["visited_on"].strip(),
            "location_visible": _parse_bool(row["location_visible"], "location_visible", i),
            "notes": row.get("notes") or "",
        }
        manure = (row.get("manure_present") or "").strip()
        if manure:
            payload["manure_present"] = _parse_bool(manure, "manure_present", i)
        confidence = (row.get("reporter_confidence") or "").strip()
        if confidence:
            payload["reporter_confidence"] = confidence
        if (row.get("site_visited") or "").strip():
            payload["site_visited"] = _parse_bool(row["site_visited"], "site_visited", i)
        if (row.get("response_id") or "").strip():
            payload["response_id"] = row["response_id"].strip()
        payloads.append(payload)
    return payloads
