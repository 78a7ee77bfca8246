"""HTTP/JSON API over the engine.

All endpoints live under /v1. Validation failures return 400, unknown ids
404, and state conflicts (double screening, duplicate responses) 409, each
with a machine-readable {"code", "field", "message"} body. State-mutating
endpoints honor an Idempotency-Key header: retrying with the same key
returns the original result instead of re-applying the command.

Report endpoints and their JSON shapes:
  confirmation_by_bucket  {org, screened_only, edges, buckets: [{label, low,
                           high, n_sent, n_followed, n_visible, n_confirmed,
                           rate, ci_low, ci_high}], totals}
  lift                    {total_images, sent, confirmed, top_bucket_rate,
                           base_rate, review_reduction, overall_lift,
                           top_lift, notes}
  agreement               {total_overlap, cells: {both_followed, elpc_only,
                           wdnr_only, neither}}
  compliance              {org, confirmed, counts, share_noncompliant,
                           share_cracks, share_afo_post_window}
  process                 {org, followup_rate_by_bucket, responses, visited,
                           visibility_rate, latency_histogram,
                           latency_p_le_1, latency_max}
  group_comparison        {group_by, excluded, groups}
  confidence_crosstab     {buckets, rows: {high, medium, low}}
  incidentals             {total, counts, score_floor}
"""

from __future__ import annotations

import json
from email.parser import BytesParser
from email.policy import HTTP as _HTTP_POLICY

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import analytics
from .engine import Engine
from .errors import ConflictError, LandTriageError, NotFoundError, ValidationError

REPORT_NAMES = ("confirmation_by_bucket", "lift", "agreement", "compliance",
                "process", "group_comparison", "confidence_crosstab", "incidentals")


def _error_response(exc: LandTriageError, status: int) -> JSONResponse:
    return JSONResponse(exc.to_dict(), status_code=status)


async def _json_body(request: Request) -> dict:
    raw = await request.body()
    try:
        body = json.loads(raw) if raw else {}
    except json.JSONDecodeError:
        raise ValidationError("request body is not valid JSON", code="bad_json")
    if not isinstance(body, dict):
        raise ValidationError("request body must be a JSON object", code="bad_json")
    return body


def _parse_multipart(content_type: str, body: bytes) -> dict[str, bytes]:
    """Extract named parts from a multipart/form-data body with the stdlib
    email parser (no third-party form parser needed)."""
    if "multipart" not in (content_type or ""):
        raise ValidationError("expected multipart/form-data", code="bad_multipart")
    envelope = (f"Content-Type: {content_type}\r\n\r\n").encode() + body
    message = BytesParser(policy=_HTTP_POLICY).parsebytes(envelope)
    parts: dict[str, bytes] = {}
    for part in message.iter_parts():
        name = part.get_param("name", header="content-disposition")
        if name:
            parts[name] = part.get_payload(decode=True) or b""
    return parts


def _bool_param(raw: str | None, default: bool = False) -> bool:
    if raw is None:
        return default
    return raw.lower() in ("1", "true", "yes")


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="landtriage", version="0.1.0")
    app.state.engine = engine

    @app.exception_handler(ValidationError)
    async def _validation(request, exc):
        return _error_response(exc, 400)

    @app.exception_handler(NotFoundError)
    async def _not_found(request, exc):
        return _error_response(exc, 404)

    @app.exception_handler(ConflictError)
    async def _conflict(request, exc):
        return _error_response(exc, 409)

    def idempotent(request: Request, status: int, compute):
        key = request.headers.get("Idempotency-Key")
        if key and key in engine.idempotency:
            cached = engine.idempotency[key]
            return JSONResponse(cached["body"], status_code=cached["status"])
        body = compute()
        if key:
            engine.idempotency[key] = {"status": status, "body": body}
        return JSONResponse(body, status_code=status)

    def _screening_view(item, detection) -> dict:
        run = engine.runs[detection.run_id]
        centroid = detection.centroid
        view = item.to_dict()
        view.update({
            "score": detection.score,
            "image_uri": detection.image_uri,
            "summer_image_uri": detection.summer_image_uri,
            "static_map_uri": f"staticmap://{centroid.lat:.6f},{centroid.lon:.6f}?zoom=15",
            "capture_date": run.imagery_date.isoformat(),
            "centroid": {"lat": round(centroid.lat, 6), "lon": round(centroid.lon, 6)},
        })
        return view

    def _assignment_view(assignment) -> dict:
        detection = engine.detections[assignment.detection_id]
        view = assignment.to_dict()
        view["run_id"] = detection.run_id
        view["score"] = detection.score
        return view

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "last_seq": engine.last_seq}

    @app.post("/v1/registry")
    async def load_registry(request: Request):
        parts = _parse_multipart(request.headers.get("content-type", ""),
                                 await request.body())
        missing = [name for name in ("facilities", "fields", "verifiers")
                   if name not in parts]
        if missing:
            raise ValidationError(f"missing multipart parts: {', '.join(missing)}",
                                  code="missing_part", field=missing[0])
        try:
            facilities = json.loads(parts["facilities"])
            fields = json.loads(parts["fields"])
            verifiers = json.loads(parts["verifiers"])
        except json.JSONDecodeError as exc:
            raise ValidationError(f"registry document is not valid JSON: {exc.msg}",
                                  code="bad_json")
        return idempotent(request, 200,
                          lambda: engine.load_registry(facilities, fields, verifiers))

    @app.post("/v1/runs")
    async def register_run(request: Request):
        body = await _json_body(request)
        for key in ("run_id", "imagery_date", "dispatched_on"):
            if key not in body:
                raise ValidationError(f"missing field {key}", code="missing_field", field=key)
        return idempotent(request, 201, lambda: engine.register_run(
            body["run_id"], body["imagery_date"], body["dispatched_on"]))

    @app.post("/v1/runs/{run_id}/detections")
    async def ingest_detections(run_id: str, request: Request):
        text = (await request.body()).decode("utf-8")
        return idempotent(request, 200,
                          lambda: engine.ingest_detections(run_id, text).to_dict())

    @app.post("/v1/route/{run_id}")
    async def route(run_id: str, request: Request):
        org = request.query_params.get("org")
        if org == "wdnr":
            def compute():
                items = engine.route_wdnr(run_id)
                return {"org": "wdnr", "run_id": run_id,
                        "screening_items": [i.to_dict() for i in items]}
        elif org == "elpc":
            def compute():
                assignments = engine.route_elpc(run_id)
                return {"org": "elpc", "run_id": run_id,
                        "assignments": [a.to_dict() for a in assignments]}
        else:
            raise ValidationError("org must be wdnr or elpc", code="invalid_org", field="org")
        return idempotent(request, 200, compute)

    @app.get("/v1/screening")
    async def screening_queue(request: Request):
        status = request.query_params.get("status", "pending")
        pairs = engine.screening_queue(status)
        return [_screening_view(item, det) for item, det in pairs]

    @app.post("/v1/screening/{detection_id}")
    async def decide_screening(detection_id: str, request: Request):
        body = await _json_body(request)
        if "decision" not in body:
            raise ValidationError("missing field decision", code="missing_field",
                                  field="decision")

        def compute():
            item, assignment = engine.record_screening(
                detection_id, body["decision"], reason=body.get("reason"),
                note=body.get("note", ""), decided_on=body.get("decided_on"))
            out = item.to_dict()
            out["assignment"] = assignment.to_dict() if assignment else None
            return out

        return idempotent(request, 200, compute)

    @app.get("/v1/assignments")
    async def assignments(request: Request):
        params = request.query_params
        rows = engine.list_assignments(org=params.get("org") or None,
                                       verifier_id=params.get("verifier_id") or None,
                                       run_id=params.get("run_id") or None)
        return [_assignment_view(a) for a in rows]

    @app.get("/v1/packets/{assignment_id}")
    async def packet(assignment_id: str):
        return engine.packet(assignment_id).to_dict()

    @app.post("/v1/responses")
    async def submit_response(request: Request):
        body = await _json_body(request)
        return idempotent(request, 201, lambda: engine.submit_response(body).to_dict())

    @app.post("/v1/responses/csv")
    async def import_responses(request: Request):
        text = (await request.body()).decode("utf-8")
        return idempotent(request, 200, lambda: engine.import_responses_csv(text))

    @app.post("/v1/determinations")
    async def submit_determination(request: Request):
        body = await _json_body(request)
        return idempotent(request, 201,
                          lambda: engine.submit_determination(body).to_dict())

    @app.post("/v1/incidentals")
    async def report_incidental(request: Request):
        body = await _json_body(request)
        return idempotent(request, 201,
                          lambda: engine.report_incidental(body).to_dict())

    @app.get("/v1/reports/{name}")
    async def report(name: str, request: Request):
        params = request.query_params
        if name == "confirmation_by_bucket":
            org = params.get("org", "elpc")
            screened = _bool_param(params.get("screened_only"))
            return analytics.confirmation_by_bucket(engine, org, screened).to_dict()
        if name == "lift":
            if "total_images" not in params:
                raise ValidationError("missing total_images", code="missing_field",
                                      field="total_images")
            totals = analytics.trial_totals(engine, params.get("org", "wdnr"))
            top_rate = params.get("top_bucket_rate")
            if top_rate is None:
                top = analytics.pooled_rate(engine, params.get("org", "wdnr"), 0.8)
            else:
                top = float(top_rate)
            return analytics.lift_metrics(int(params["total_images"]), totals["sent"],
                                          totals["confirmed"], top or 0.0).to_dict()
        if name == "agreement":
            return analytics.agreement_table(engine).to_dict()
        if name == "compliance":
            return analytics.compliance_breakdown(engine).to_dict()
        if name == "process":
            return analytics.process_metrics(engine, params.get("org", "elpc")).to_dict()
        if name == "group_comparison":
            exclude = tuple((params.get("exclude") or "compliant_other").split(","))
            return analytics.group_comparison(engine, exclude=exclude).to_dict()
        if name == "confidence_crosstab":
            return analytics.reporter_confidence_crosstab(engine).to_dict()
        if name == "incidentals":
            floor = params.get("score_floor")
            breakdown = engine.incidental_breakdown(
                float(floor) if floor is not None else None)
            out = breakdown.to_dict()
            out["score_floor"] = float(floor) if floor is not None else engine.config.score_threshold
            return out
        raise NotFoundError(f"unknown report {name!r}; known: {', '.join(REPORT_NAMES)}",
                            code="unknown_report", field="name")

    return app
