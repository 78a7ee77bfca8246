"""The two organization routing protocols.

The regulator track filters a run's detections to confident, on-permitted-
field hits and queues them for desk screening; acceptances become
assignments for regional specialists. The advocacy track assigns each
detection to a nearby volunteer verifier, capped at the top five scores
per verifier per run.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import date
from enum import Enum

from .detections import Detection, ModelRun
from .errors import ConflictError, NotFoundError, ValidationError
from .geo import haversine_m
from .registry import Org, Registry

DEFAULT_SCORE_THRESHOLD = 0.5
DEFAULT_RADIUS_M = 25_000.0
DEFAULT_TOP_K = 5


class ScreeningStatus(str, Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class RejectReason(str, Enum):
    VEGETATION = "vegetation"
    BUILDING = "building"
    ROADWAY = "roadway"
    SHADOW = "shadow"
    OTHER = "other"


class RoutingPolicy(str, Enum):
    NEAREST_EXCLUSIVE = "nearest_exclusive"
    MULTI = "multi"


@dataclass(frozen=True)
class ScreeningItem:
    detection_id: str
    queued_on: date
    status: ScreeningStatus = ScreeningStatus.PENDING
    reject_reason: RejectReason | None = None
    screener_note: str = ""
    decided_on: date | None = None

    def __post_init__(self):
        if self.status is ScreeningStatus.REJECTED and self.reject_reason is None:
            raise ValidationError("rejected screening item needs a reason",
                                  code="missing_reason", field="reason")

    def to_dict(self) -> dict:
        return {"detection_id": self.detection_id, "queued_on": self.queued_on.isoformat(),
                "status": self.status.value,
                "reject_reason": self.reject_reason.value if self.reject_reason else None,
                "screener_note": self.screener_note,
                "decided_on": self.decided_on.isoformat() if self.decided_on else None}

    @classmethod
    def from_dict(cls, d: dict) -> "ScreeningItem":
        return cls(detection_id=d["detection_id"],
                   queued_on=date.fromisoformat(d["queued_on"]),
                   status=ScreeningStatus(d["status"]),
                   reject_reason=RejectReason(d["reject_reason"]) if d.get("reject_reason") else None,
                   screener_note=d.get("screener_note", ""),
                   decided_on=date.fromisoformat(d["decided_on"]) if d.get("decided_on") else None)


@dataclass(frozen=True)
class Assignment:
    assignment_id: str
    detection_id: str
    org: Org
    dispatched_on: date
    verifier_id: str | None = None   # advocacy track
    region_tag: str | None = None    # regulator track
    rank: int | None = None          # advocacy track, 1..top_k

    def __post_init__(self):
        if self.org is Org.ELPC:
            if self.verifier_id is None:
                raise ValidationError("advocacy assignment needs a verifier",
                                      code="invalid_assignment", field="verifier_id")
            if self.rank is None or self.rank < 1:
                raise ValidationError("advocacy assignment rank must be >= 1",
                                      code="invalid_assignment", field="rank")

    def to_dict(self) -> dict:
        return {"assignment_id": self.assignment_id, "detection_id": self.detection_id,
                "org": self.org.value, "dispatched_on": self.dispatched_on.isoformat(),
                "verifier_id": self.verifier_id, "region_tag": self.region_tag,
                "rank": self.rank}

    @classmethod
    def from_dict(cls, d: dict) -> "Assignment":
        return cls(assignment_id=d["assignment_id"], detection_id=d["detection_id"],
                   org=Org(d["org"]), dispatched_on=date.fromisoformat(d["dispatched_on"]),
                   verifier_id=d.get("verifier_id"), region_tag=d.get("region_tag"),
                   rank=d.get("rank"))


def wdnr_assignment_id(detection_id: str) -> str:
    return f"A-wdnr-{detection_id}"


def elpc_assignment_id(detection_id: str, verifier_id: str) -> str:
    return f"A-elpc-{detection_id}-{verifier_id}"


def route_wdnr(run: ModelRun, detections: list[Detection], registry: Registry,
               score_threshold: float = DEFAULT_SCORE_THRESHOLD,
               already_queued: set[str] | None = None) -> list[ScreeningItem]:
    """Queue a run's detections for desk screening.

    A detection qualifies when its score is at or above the threshold and
    its box touches at least one permitted field. Output is ordered score
    descending, detection_id ascending; detections already queued are
    skipped so re-routing a run is idempotent.
    """
    already_queued = already_queued or set()
    qualifying = []
    for det in detections:
        if det.detection_id in already_queued:
            continue
        if det.score < score_threshold:
            continue
        if not registry.fields_intersecting(det.bbox):
            continue
        qualifying.append(det)
    qualifying.sort(key=lambda d: (-d.score, d.detection_id))
    return [ScreeningItem(detection_id=d.detection_id, queued_on=run.dispatched_on)
            for d in qualifying]


def route_elpc(run: ModelRun, detections: list[Detection], registry: Registry,
               radius_m: float = DEFAULT_RADIUS_M, top_k: int = DEFAULT_TOP_K,
               policy: RoutingPolicy = RoutingPolicy.NEAREST_EXCLUSIVE,
               already_assigned: set[str] | None = None) -> list[Assignment]:
    """Assign a run's detections to verifiers.

    Under nearest_exclusive each detection is eligible only for its nearest
    in-radius active verifier; under multi it is eligible for every
    in-radius verifier (so one detection can reach several people). Each
    verifier then receives the top_k highest-score eligible detections,
    ranked 1..k by descending score with detection_id breaking ties.
    """
    if top_k < 1:
        raise ValidationError("top_k must be >= 1", code="invalid_top_k", field="top_k")
    already_assigned = already_assigned or set()

    eligible: dict[str, list[Detection]] = {}
    for det in detections:
        if det.detection_id in already_assigned:
            continue
        in_radius = registry.verifiers_within(det.centroid, radius_m)
        in_radius = [(v, d) for v, d in in_radius if v.org is Org.ELPC]
        if not in_radius:
            continue
        if policy is RoutingPolicy.NEAREST_EXCLUSIVE:
            in_radius = in_radius[:1]
        for verifier, _dist in in_radius:
            eligible.setdefault(verifier.verifier_id, []).append(det)

    assignments = []
    for verifier_id in sorted(eligible):
        ranked = sorted(eligible[verifier_id], key=lambda d: (-d.score, d.detection_id))
        for rank, det in enumerate(ranked[:top_k], start=1):
            assignments.append(Assignment(
                assignment_id=elpc_assignment_id(det.detection_id, verifier_id),
                detection_id=det.detection_id,
                org=Org.ELPC,
                dispatched_on=run.dispatched_on,
                verifier_id=verifier_id,
                rank=rank,
            ))
    return assignments


def decide_screening(item: ScreeningItem, decision: str,
                     reason: RejectReason | None = None, note: str = "",
                     decided_on: date | None = None) -> ScreeningItem:
    """Apply an accept/reject decision to a pending item.

    Decisions are terminal: a second decision on the same detection is a
    conflict, never an overwrite.
    """
    if item.status is not ScreeningStatus.PENDING:
        raise ConflictError(f"detection {item.detection_id} already {item.status.value}",
                            code="not_pending", field="detection_id")
    if decision == "accept":
        return replace(item, status=ScreeningStatus.ACCEPTED, screener_note=note,
                       decided_on=decided_on)
    if decision == "reject":
        if reason is None:
            raise ValidationError("rejection requires a reason",
                                  code="missing_reason", field="reason")
        return replace(item, status=ScreeningStatus.REJECTED, reject_reason=reason,
                       screener_note=note, decided_on=decided_on)
    raise ValidationError(f"decision must be accept or reject, got {decision!r}",
                          code="invalid_decision", field="decision")


def assignment_within_radius(assignment: Assignment, detection: Detection,
                             registry: Registry, radius_m: float) -> bool:
    """Invariant check: an advocacy assignment's verifier is in radius."""
    if assignment.org is not Org.ELPC:
        raise NotFoundError("radius invariant applies to advocacy assignments only")
    verifier = registry.verifiers[assignment.verifier_id]
    return haversine_m(detection.centroid, verifier.home) <= radius_m
