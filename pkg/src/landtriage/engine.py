"""The triage engine: validated commands over event-sourced state.

Every mutation is validated, appended to the event log, and then applied
to in-memory state; replaying the log rebuilds the identical state, and a
snapshot file only shortcuts the replay. Queries never mutate. A single
process owns the log (one serialized writer); readers are unrestricted.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable

from . import fieldops, routing
from .compliance import RuleWindow
from .detections import (Detection, IncidentalReport, IngestResult, ModelRun,
                         categorize_incidentals, parse_detection_line)
from .errors import ConflictError, NotFoundError, ValidationError
from .eventlog import EventLog, EventRecord
from .fieldops import Determination, FieldResponse, PacketManifest, ReporterConfidence
from .registry import Org, Registry, load_registry
from .routing import (Assignment, RejectReason, RoutingPolicy, ScreeningItem,
                      ScreeningStatus)

SNAPSHOT_FILE = "snapshot.json"
EVENTS_FILE = "events.jsonl"

DATA_DIR_ENV = "LANDTRIAGE_DATA_DIR"


@dataclass
class ServiceConfig:
    data_dir: Path = Path("landtriage-data")
    score_threshold: float = routing.DEFAULT_SCORE_THRESHOLD
    radius_m: float = routing.DEFAULT_RADIUS_M
    top_k: int = routing.DEFAULT_TOP_K
    aoi_side_m: float = 6_000.0
    window_start: date = date(2023, 2, 1)
    window_end: date = date(2023, 3, 31)
    animal_unit_threshold: float = 1_000.0
    routing_policy: RoutingPolicy = RoutingPolicy.NEAREST_EXCLUSIVE
    fsync: bool = True
    snapshot_every: int = 0  # 0 disables periodic snapshots

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        if self.score_threshold < 0 or self.radius_m <= 0 or self.top_k < 1 or self.aoi_side_m <= 0:
            raise ValidationError("config thresholds must be positive",
                                  code="invalid_config", field="config")
        self.rule_window  # validates window ordering

    @property
    def rule_window(self) -> RuleWindow:
        return RuleWindow(start=self.window_start, end=self.window_end,
                          animal_unit_threshold=self.animal_unit_threshold)

    @classmethod
    def from_file(cls, path: str | Path | None = None) -> "ServiceConfig":
        raw: dict = {}
        if path is not None:
            raw = json.loads(Path(path).read_text())
        kwargs: dict = {}
        if "data_dir" in raw:
            kwargs["data_dir"] = Path(raw["data_dir"])
        for key in ("score_threshold", "radius_m", "aoi_side_m", "animal_unit_threshold"):
            if key in raw:
                kwargs[key] = float(raw[key])
        for key in ("top_k", "snapshot_every"):
            if key in raw:
                kwargs[key] = int(raw[key])
        for key in ("window_start", "window_end"):
            if key in raw:
                kwargs[key] = date.fromisoformat(raw[key])
        if "routing_policy" in raw:
            kwargs["routing_policy"] = RoutingPolicy(raw["routing_policy"])
        if "fsync" in raw:
            kwargs["fsync"] = bool(raw["fsync"])
        env_dir = os.environ.get(DATA_DIR_ENV)
        if env_dir:
            kwargs["data_dir"] = Path(env_dir)
        return cls(**kwargs)


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _parse_date(raw, field_name: str) -> date:
    if isinstance(raw, date):
        return raw
    try:
        return date.fromisoformat(str(raw))
    except ValueError:
        raise ValidationError(f"{field_name} must be an ISO date (YYYY-MM-DD), got {raw!r}",
                              code="invalid_date", field=field_name)


class Engine:
    """Event-sourced state and the command surface over it."""

    def __init__(self, config: ServiceConfig | None = None,
                 clock: Callable[[], datetime] = _utc_now,
                 log: EventLog | None = None):
        self.config = config or ServiceConfig()
        self.clock = clock
        self.log = log
        self._lock = threading.RLock()
        self.last_seq = 0
        self.registry: Registry | None = None
        self.registry_docs: dict | None = None
        self.runs: dict[str, ModelRun] = {}
        self.detections: dict[str, Detection] = {}
        self.detections_by_run: dict[str, list[str]] = {}
        self.screening: dict[str, ScreeningItem] = {}
        self.assignments: dict[str, Assignment] = {}
        self.assignments_by_org_detection: dict[tuple[str, str], list[str]] = {}
        self.responses: dict[str, FieldResponse] = {}
        self.response_by_assignment: dict[str, str] = {}
        self.determinations: dict[str, Determination] = {}
        self.determination_by_assignment: dict[str, str] = {}
        self.incidentals: dict[str, IncidentalReport] = {}
        self.idempotency: dict[str, dict] = {}

    # -- lifecycle ---------------------------------------------------------

    @classmethod
    def open(cls, data_dir: str | Path | None = None, config: ServiceConfig | None = None,
             clock: Callable[[], datetime] = _utc_now) -> "Engine":
        """Open (or create) a data directory: load the snapshot when one
        exists, then replay the event log tail."""
        config = config or ServiceConfig()
        if data_dir is not None:
            config.data_dir = Path(data_dir)
        config.data_dir.mkdir(parents=True, exist_ok=True)
        log = EventLog(config.data_dir / EVENTS_FILE, fsync=config.fsync)
        engine = cls(config=config, clock=clock, log=log)
        snapshot_path = config.data_dir / SNAPSHOT_FILE
        if snapshot_path.exists():
            engine._restore_snapshot(json.loads(snapshot_path.read_text()))
        for record in log.read_all():
            if record.seq <= engine.last_seq:
                continue
            engine._apply(record)
        return engine

    def close(self) -> None:
        if self.log is not None:
            self.log.close()

    def _commit(self, kind: str, payload: dict) -> EventRecord:
        recorded_at = self.clock().isoformat()
        if self.log is not None:
            record = self.log.append(kind, payload, recorded_at)
        else:
            record = EventRecord(seq=self.last_seq + 1, recorded_at=recorded_at,
                                 kind=kind, payload=payload)
        self._apply(record)
        if (self.config.snapshot_every > 0 and self.log is not None
                and self.last_seq % self.config.snapshot_every == 0):
            self.save_snapshot()
        return record

    # -- event application (replay-safe, no side validation) ---------------

    def _apply(self, record: EventRecord) -> None:
        payload = record.payload
        kind = record.kind
        if kind == "registry_loaded":
            self.registry = load_registry(payload["facilities"], payload["fields"],
                                          payload["verifiers"])
            self.registry_docs = payload
        elif kind == "run_registered":
            run = ModelRun.from_dict(payload["run"])
            self.runs[run.run_id] = run
        elif kind == "detections_ingested":
            for det_doc in payload["detections"]:
                det = Detection.from_dict(det_doc)
                self.detections[det.detection_id] = det
                self.detections_by_run.setdefault(det.run_id, []).append(det.detection_id)
        elif kind == "screening_queued":
            for item_doc in payload["items"]:
                item = ScreeningItem.from_dict(item_doc)
                self.screening[item.detection_id] = item
        elif kind == "screening_decided":
            item = ScreeningItem.from_dict(payload["item"])
            self.screening[item.detection_id] = item
        elif kind == "assignment_created":
            for doc in payload["assignments"]:
                assignment = Assignment.from_dict(doc)
                self.assignments[assignment.assignment_id] = assignment
                key = (assignment.org.value, assignment.detection_id)
                self.assignments_by_org_detection.setdefault(key, []).append(
                    assignment.assignment_id)
        elif kind == "response_submitted":
            response = FieldResponse.from_dict(payload["response"])
            self.responses[response.response_id] = response
            self.response_by_assignment[response.assignment_id] = response.response_id
        elif kind == "determination_submitted":
            det = Determination.from_dict(payload["determination"])
            self.determinations[det.determination_id] = det
            self.determination_by_assignment[det.assignment_id] = det.determination_id
        elif kind == "incidental_reported":
            report = IncidentalReport.from_dict(payload["report"])
            self.incidentals[report.report_id] = report
        else:  # pragma: no cover - EventRecord already rejects unknown kinds
            raise ValidationError(f"unknown event kind {kind!r}", code="invalid_event")
        self.last_seq = record.seq

    # -- commands ----------------------------------------------------------

    def load_registry(self, facilities_doc: list, fields_doc: dict,
                      verifiers_doc: list) -> dict:
        with self._lock:
            registry = load_registry(facilities_doc, fields_doc, verifiers_doc)
            self._commit("registry_loaded", {"facilities": facilities_doc,
                                             "fields": fields_doc,
                                             "verifiers": verifiers_doc})
            return {"facilities": len(registry.facilities),
                    "fields": len(registry.fields),
                    "verifiers": len(registry.verifiers)}

    def register_run(self, run_id: str, imagery_date, dispatched_on) -> dict:
        with self._lock:
            if run_id in self.runs:
                raise ConflictError(f"run {run_id!r} already registered",
                                    code="duplicate_run", field="run_id")
            run = ModelRun(run_id=run_id,
                           imagery_date=_parse_date(imagery_date, "imagery_date"),
                           dispatched_on=_parse_date(dispatched_on, "dispatched_on"))
            self._commit("run_registered", {"run": run.to_dict()})
            out = run.to_dict()
            out["warnings"] = [run.lag_warning] if run.lag_warning else []
            return out

    def ingest_detections(self, run_id: str, text: str) -> IngestResult:
        """Validate and persist a line-delimited detection batch.

        Invalid records are rejected individually with their line numbers;
        re-submitting an identical batch accepts nothing and reports every
        id as a duplicate.
        """
        with self._lock:
            if run_id not in self.runs:
                raise NotFoundError(f"unknown run {run_id!r}", code="unknown_run",
                                    field="run_id")
            accepted: list[Detection] = []
            rejected: list[tuple[int, str]] = []
            seen_in_batch: set[str] = set()
            for lineno, line in enumerate(text.splitlines(), start=1):
                if not line.strip():
                    continue
                try:
                    det = parse_detection_line(line, run_id)
                except ValidationError as exc:
                    rejected.append((lineno, exc.code))
                    continue
                if det.detection_id in self.detections or det.detection_id in seen_in_batch:
                    rejected.append((lineno, "duplicate_detection_id"))
                    continue
                if self.registry is not None and self.registry.facilities:
                    nearest = self.registry.nearest_facility(det.centroid)
                    if nearest is not None:
                        det = replace(det, nearest_facility_id=nearest[0].facility_id)
                seen_in_batch.add(det.detection_id)
                accepted.append(det)
            if accepted:
                self._commit("detections_ingested",
                             {"run_id": run_id,
                              "detections": [d.to_dict() for d in accepted]})
            return IngestResult(accepted=len(accepted), rejected=tuple(rejected))

    def _run_detections(self, run_id: str) -> list[Detection]:
        if run_id not in self.runs:
            raise NotFoundError(f"unknown run {run_id!r}", code="unknown_run", field="run_id")
        return [self.detections[did] for did in self.detections_by_run.get(run_id, [])]

    def route_wdnr(self, run_id: str, score_threshold: float | None = None) -> list[ScreeningItem]:
        with self._lock:
            if self.registry is None:
                raise ValidationError("no registry loaded", code="registry_missing")
            detections = self._run_detections(run_id)
            threshold = self.config.score_threshold if score_threshold is None else score_threshold
            items = routing.route_wdnr(self.runs[run_id], detections, self.registry,
                                       score_threshold=threshold,
                                       already_queued=set(self.screening))
            if items:
                self._commit("screening_queued",
                             {"run_id": run_id, "items": [i.to_dict() for i in items]})
            return items

    def route_elpc(self, run_id: str, radius_m: float | None = None,
                   top_k: int | None = None,
                   policy: RoutingPolicy | None = None) -> list[Assignment]:
        with self._lock:
            if self.registry is None:
                raise ValidationError("no registry loaded", code="registry_missing")
            detections = self._run_detections(run_id)
            run = self.runs[run_id]
            policy = policy or self.config.routing_policy
            already = set()
            if policy is RoutingPolicy.NEAREST_EXCLUSIVE:
                already = {det_id for (org, det_id) in self.assignments_by_org_detection
                           if org == Org.ELPC.value}
            assignments = routing.route_elpc(
                run, detections, self.registry,
                radius_m=self.config.radius_m if radius_m is None else radius_m,
                top_k=self.config.top_k if top_k is None else top_k,
                policy=policy, already_assigned=already)
            assignments = [a for a in assignments if a.assignment_id not in self.assignments]
            if assignments:
                self._commit("assignment_created",
                             {"assignments": [a.to_dict() for a in assignments]})
            return assignments

    def record_screening(self, detection_id: str, decision: str,
                         reason: str | None = None, note: str = "",
                         decided_on=None) -> tuple[ScreeningItem, Assignment | None]:
        with self._lock:
            item = self.screening.get(detection_id)
            if item is None:
                raise NotFoundError(f"no screening item for detection {detection_id!r}",
                                    code="unknown_detection", field="detection_id")
            reason_enum = None
            if reason is not None:
                try:
                    reason_enum = RejectReason(reason)
                except ValueError:
                    allowed = ", ".join(r.value for r in RejectReason)
                    raise ValidationError(f"reason must be one of: {allowed}",
                                          code="invalid_reason", field="reason")
            when = _parse_date(decided_on, "decided_on") if decided_on else self.clock().date()
            decided = routing.decide_screening(item, decision, reason=reason_enum,
                                               note=note, decided_on=when)
            self._commit("screening_decided", {"item": decided.to_dict()})
            assignment = None
            if decided.status is ScreeningStatus.ACCEPTED:
                detection = self.detections[detection_id]
                assignment = Assignment(
                    assignment_id=routing.wdnr_assignment_id(detection_id),
                    detection_id=detection_id,
                    org=Org.WDNR,
                    dispatched_on=when,
                    region_tag=detection.nearest_facility_id or "statewide",
                )
                self._commit("assignment_created", {"assignments": [assignment.to_dict()]})
            return decided, assignment

    def submit_response(self, payload: dict) -> FieldResponse:
        with self._lock:
            assignment = self.assignments.get(payload.get("assignment_id", ""))
            if assignment is None:
                raise NotFoundError(f"unknown assignment {payload.get('assignment_id')!r}",
                                    code="unknown_assignment", field="assignment_id")
            if assignment.org is not Org.ELPC:
                raise ValidationError("field responses belong to the advocacy track",
                                      code="wrong_org", field="assignment_id")
            if assignment.assignment_id in self.response_by_assignment:
                raise ConflictError(
                    f"assignment {assignment.assignment_id} already has a response",
                    code="duplicate_response", field="assignment_id")
            visited_on = _parse_date(payload.get("visited_on"), "visited_on")
            if visited_on < assignment.dispatched_on:
                raise ValidationError("visit precedes dispatch",
                                      code="visit_before_dispatch", field="visited_on")
            confidence = payload.get("reporter_confidence")
            response = FieldResponse(
                response_id=payload.get("response_id") or f"FR{len(self.responses) + 1:05d}",
                assignment_id=assignment.assignment_id,
                visited_on=visited_on,
                location_visible=bool(payload.get("location_visible")),
                manure_present=payload.get("manure_present"),
                site_visited=bool(payload.get("site_visited", True)),
                reporter_confidence=ReporterConfidence(confidence) if confidence else None,
                notes=payload.get("notes", ""),
                photo_uris=tuple(payload.get("photo_uris", ())),
            )
            if response.response_id in self.responses:
                raise ConflictError(f"duplicate response_id {response.response_id!r}",
                                    code="duplicate_response", field="response_id")
            self._commit("response_submitted", {"response": response.to_dict()})
            return response

    def import_responses_csv(self, text: str) -> dict:
        payloads = fieldops.parse_responses_csv(text)
        accepted = 0
        rejected = []
        for i, payload in enumerate(payloads, start=2):
            try:
                self.submit_response(payload)
                accepted += 1
            except (ValidationError, NotFoundError, ConflictError) as exc:
                rejected.append({"row": i, "reason": exc.code})
        return {"accepted": accepted, "rejected": rejected}

    def submit_determination(self, payload: dict) -> Determination:
        with self._lock:
            assignment = self.assignments.get(payload.get("assignment_id", ""))
            if assignment is None:
                raise NotFoundError(f"unknown assignment {payload.get('assignment_id')!r}",
                                    code="unknown_assignment", field="assignment_id")
            if assignment.org is not Org.WDNR:
                raise ValidationError("determinations belong to the regulator track",
                                      code="wrong_org", field="assignment_id")
            if assignment.assignment_id in self.determination_by_assignment:
                raise ConflictError(
                    f"assignment {assignment.assignment_id} already has a determination",
                    code="duplicate_determination", field="assignment_id")
            comp = payload.get("compliance")
            determination = Determination(
                determination_id=payload.get("determination_id")
                or f"DT{len(self.determinations) + 1:05d}",
                assignment_id=assignment.assignment_id,
                decided_on=_parse_date(payload.get("decided_on"), "decided_on"),
                manure_present=bool(payload.get("manure_present")),
                compliance=None if comp is None else self._parse_compliance(comp),
                method_notes=payload.get("method_notes", ""),
            )
            if determination.determination_id in self.determinations:
                raise ConflictError(
                    f"duplicate determination_id {determination.determination_id!r}",
                    code="duplicate_determination", field="determination_id")
            self._commit("determination_submitted",
                         {"determination": determination.to_dict()})
            return determination

    @staticmethod
    def _parse_compliance(raw: str):
        from .compliance import ComplianceOutcome
        try:
            return ComplianceOutcome(raw)
        except ValueError:
            allowed = ", ".join(c.value for c in ComplianceOutcome)
            raise ValidationError(f"compliance must be one of: {allowed}",
                                  code="invalid_compliance", field="compliance")

    def report_incidental(self, payload: dict) -> IncidentalReport:
        with self._lock:
            doc = dict(payload)
            doc.setdefault("report_id", f"IR{len(self.incidentals) + 1:04d}")
            report = IncidentalReport.from_dict(doc)
            if report.report_id in self.incidentals:
                raise ConflictError(f"duplicate report_id {report.report_id!r}",
                                    code="duplicate_report", field="report_id")
            self._commit("incidental_reported", {"report": report.to_dict()})
            return report

    # -- queries -----------------------------------------------------------

    def screening_queue(self, status: str | None = "pending") -> list[tuple[ScreeningItem, Detection]]:
        """Screening items joined to their detections, score descending."""
        if status not in (None, "all"):
            try:
                wanted = ScreeningStatus(status)
            except ValueError:
                raise ValidationError(f"unknown screening status {status!r}",
                                      code="invalid_status", field="status")
            items = [i for i in self.screening.values() if i.status is wanted]
        else:
            items = list(self.screening.values())
        pairs = [(item, self.detections[item.detection_id]) for item in items]
        pairs.sort(key=lambda p: (-p[1].score, p[1].detection_id))
        return pairs

    def list_assignments(self, org: str | None = None, verifier_id: str | None = None,
                         run_id: str | None = None) -> list[Assignment]:
        out = []
        for assignment in self.assignments.values():
            if org and assignment.org.value != org:
                continue
            if verifier_id and assignment.verifier_id != verifier_id:
                continue
            if run_id and self.detections[assignment.detection_id].run_id != run_id:
                continue
            out.append(assignment)
        return out

    def packet(self, assignment_id: str) -> PacketManifest:
        assignment = self.assignments.get(assignment_id)
        if assignment is None:
            raise NotFoundError(f"unknown assignment {assignment_id!r}",
                                code="unknown_assignment", field="assignment_id")
        detection = self.detections[assignment.detection_id]
        run = self.runs[detection.run_id]
        return fieldops.build_packet(assignment, detection, run)

    def incidental_breakdown(self, score_floor: float | None = None):
        if self.registry is None:
            raise ValidationError("no registry loaded", code="registry_missing")
        floor = self.config.score_threshold if score_floor is None else score_floor
        return categorize_incidentals(list(self.incidentals.values()), self.registry,
                                      list(self.detections.values()), floor,
                                      aoi_side_m=self.config.aoi_side_m)

    # -- snapshots and digests ----------------------------------------------

    def state_dict(self) -> dict:
        return {
            "registry": self.registry_docs,
            "runs": [r.to_dict() for r in self.runs.values()],
            "detections": [d.to_dict() for d in self.detections.values()],
            "screening": [s.to_dict() for s in self.screening.values()],
            "assignments": [a.to_dict() for a in self.assignments.values()],
            "responses": [r.to_dict() for r in self.responses.values()],
            "determinations": [d.to_dict() for d in self.determinations.values()],
            "incidentals": [r.to_dict() for r in self.incidentals.values()],
        }

    def state_digest(self) -> str:
        blob = json.dumps(self.state_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def save_snapshot(self) -> Path:
        path = self.config.data_dir / SNAPSHOT_FILE
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"last_seq": self.last_seq, "state": self.state_dict()},
                                  sort_keys=True))
        tmp.replace(path)
        return path

    def _restore_snapshot(self, snapshot: dict) -> None:
        state = snapshot["state"]
        if state.get("registry"):
            docs = state["registry"]
            self.registry = load_registry(docs["facilities"], docs["fields"],
                                          docs["verifiers"])
            self.registry_docs = docs
        for doc in state.get("runs", []):
            run = ModelRun.from_dict(doc)
            self.runs[run.run_id] = run
        for doc in state.get("detections", []):
            det = Detection.from_dict(doc)
            self.detections[det.detection_id] = det
            self.detections_by_run.setdefault(det.run_id, []).append(det.detection_id)
        for doc in state.get("screening", []):
            item = ScreeningItem.from_dict(doc)
            self.screening[item.detection_id] = item
        for doc in state.get("assignments", []):
            assignment = Assignment.from_dict(doc)
            self.assignments[assignment.assignment_id] = assignment
            key = (assignment.org.value, assignment.detection_id)
            self.assignments_by_org_detection.setdefault(key, []).append(
                assignment.assignment_id)
        for doc in state.get("responses", []):
            response = FieldResponse.from_dict(doc)
            self.responses[response.response_id] = response
            self.response_by_assignment[response.assignment_id] = response.response_id
        for doc in state.get("determinations", []):
            det = Determination.from_dict(doc)
            self.determinations[det.determination_id] = det
            self.determination_by_assignment[det.assignment_id] = det.determination_id
        for doc in state.get("incidentals", []):
            report = IncidentalReport.from_dict(doc)
            self.incidentals[report.report_id] = report
        self.last_seq = snapshot["last_seq"]
