"""Seeded end-to-end scenario generator.

Builds a synthetic season through the normal engine command path:
facilities on a jittered grid (each with a permitted field), verifiers at
random homes, runs of detections whose scores are uniform and whose ground
truth is drawn so that P(true | score) follows an operator-specified
piecewise-linear curve. Ground truth is kept alongside the engine so
oracle checks can compare computed rates against it. Same seed, same
output, byte for byte.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

from . import analytics
from .detections import detection_to_line, Detection
from .engine import Engine, ServiceConfig
from .errors import ValidationError
from .geo import GeoBBox, METERS_PER_DEGREE

import math

DEFAULT_TPR_CURVE = ((0.0, 0.01), (0.5, 0.08), (0.8, 0.35), (1.0, 0.5))

REGION_LAT = (42.6, 44.6)
REGION_LON = (-92.5, -88.5)


def parse_tpr_curve(spec: str) -> tuple[tuple[float, float], ...]:
    """Parse "score:rate,score:rate,..." into curve anchor points."""
    points = []
    for chunk in spec.split(","):
        try:
            score_s, rate_s = chunk.split(":")
            points.append((float(score_s), float(rate_s)))
        except ValueError:
            raise ValidationError(f"bad tpr-curve chunk {chunk!r}; expected score:rate",
                                  code="invalid_curve", field="tpr_curve")
    points.sort()
    if not points:
        raise ValidationError("empty tpr curve", code="invalid_curve", field="tpr_curve")
    return tuple(points)


def tpr_at(curve, score: float) -> float:
    """Piecewise-linear interpolation of P(true | score), clamped at the ends."""
    if score <= curve[0][0]:
        return curve[0][1]
    if score >= curve[-1][0]:
        return curve[-1][1]
    for (x0, y0), (x1, y1) in zip(curve, curve[1:]):
        if x0 <= score <= x1:
            if x1 == x0:
                return y1
            return y0 + (y1 - y0) * (score - x0) / (x1 - x0)
    return curve[-1][1]


@dataclass
class SimulationParams:
    seed: int = 0
    n_facilities: int = 24
    n_runs: int = 6
    n_verifiers: int = 8
    detections_per_run: int = 40
    tpr_curve: tuple = DEFAULT_TPR_CURVE


@dataclass
class SimulationResult:
    engine: Engine
    ground_truth: dict[str, bool]
    summary: dict = field(default_factory=dict)


def _sim_clock():
    base = datetime(2023, 4, 2, 0, 0, 0, tzinfo=timezone.utc)
    state = {"n": 0}

    def clock():
        state["n"] += 1
        return base + timedelta(seconds=state["n"])

    return clock


def simulate(params: SimulationParams) -> SimulationResult:
    rng = random.Random(params.seed)
    engine = Engine(config=ServiceConfig(fsync=False), clock=_sim_clock())

    grid = max(1, math.ceil(math.sqrt(params.n_facilities)))
    lat_step = (REGION_LAT[1] - REGION_LAT[0]) / grid
    lon_step = (REGION_LON[1] - REGION_LON[0]) / grid
    facilities = []
    features = []
    for i in range(params.n_facilities):
        row, col = divmod(i, grid)
        lat = REGION_LAT[0] + (row + 0.5) * lat_step + rng.uniform(-0.2, 0.2) * lat_step
        lon = REGION_LON[0] + (col + 0.5) * lon_step + rng.uniform(-0.2, 0.2) * lon_step
        lat, lon = round(lat, 5), round(lon, 5)
        fid = f"SIMF{i + 1:03d}"
        facilities.append({"facility_id": fid, "lat": lat, "lon": lon, "kind": "cafo",
                           "animal_units": 1000 + rng.randrange(0, 2000, 50)})
        half_lat, half_lon = 0.010, 0.0125
        ring = [[lon - half_lon, lat - half_lat], [lon + half_lon, lat - half_lat],
                [lon + half_lon, lat + half_lat], [lon - half_lon, lat + half_lat],
                [lon - half_lon, lat - half_lat]]
        features.append({"type": "Feature",
                         "properties": {"field_id": f"SIMNMP{i + 1:03d}",
                                        "permittee_facility_id": fid},
                         "geometry": {"type": "Polygon", "coordinates": [ring]}})
    verifiers = [{"verifier_id": f"SIMV{i + 1:02d}",
                  "lat": round(rng.uniform(*REGION_LAT), 5),
                  "lon": round(rng.uniform(*REGION_LON), 5),
                  "org": "elpc", "active": True}
                 for i in range(params.n_verifiers)]
    engine.load_registry(facilities, {"type": "FeatureCollection", "features": features},
                         verifiers)

    ground_truth: dict[str, bool] = {}
    det_seq = 0
    compliance_cycle = ("compliant_pre_window", "compliant_unregulated_entity",
                        "violation", "compliant_unregulated_entity",
                        "compliant_pre_window")
    reasons = ("vegetation", "building", "roadway", "shadow", "other")
    for run_idx in range(params.n_runs):
        dispatched = date(2023, 2, 1) + timedelta(days=3 * run_idx + 1)
        run_id = f"SIMRUN{run_idx + 1:02d}"
        engine.register_run(run_id, dispatched - timedelta(days=1), dispatched)

        lines = []
        for _ in range(params.detections_per_run):
            det_seq += 1
            det_id = f"SIMD{det_seq:05d}"
            fac = facilities[rng.randrange(len(facilities))]
            clat = fac["lat"] + rng.uniform(-0.006, 0.006)
            clon = fac["lon"] + rng.uniform(-0.008, 0.008)
            side = rng.uniform(120, 400)
            half_lat = side / 2 / METERS_PER_DEGREE
            half_lon = side / 2 / (METERS_PER_DEGREE * math.cos(math.radians(clat)))
            score = round(rng.random(), 3)
            ground_truth[det_id] = rng.random() < tpr_at(params.tpr_curve, score)
            det = Detection(
                detection_id=det_id, run_id=run_id,
                bbox=GeoBBox(round(clat - half_lat, 7), round(clon - half_lon, 7),
                             round(clat + half_lat, 7), round(clon + half_lon, 7)),
                score=score, image_uri=f"img://sim/{det_id}.png",
                summer_image_uri=f"img://sim/summer/{det_id}.png")
            lines.append(detection_to_line(det))
        engine.ingest_detections(run_id, "\n".join(lines) + "\n")

        queued = engine.route_wdnr(run_id)
        engine.route_elpc(run_id)

        decision_date = dispatched + timedelta(days=1)
        for j, item in enumerate(queued):
            truth = ground_truth[item.detection_id]
            accept = rng.random() < (0.95 if truth else 0.15)
            if accept:
                engine.record_screening(item.detection_id, "accept",
                                        decided_on=decision_date)
            else:
                engine.record_screening(item.detection_id, "reject",
                                        reason=reasons[j % len(reasons)],
                                        decided_on=decision_date)

        for assignment in engine.list_assignments(org="wdnr", run_id=run_id):
            truth = ground_truth[assignment.detection_id]
            payload = {"assignment_id": assignment.assignment_id,
                       "decided_on": (assignment.dispatched_on
                                      + timedelta(days=rng.randrange(0, 3))).isoformat(),
                       "manure_present": truth,
                       "method_notes": "simulated follow-up"}
            if truth:
                payload["compliance"] = compliance_cycle[det_seq % len(compliance_cycle)]
            engine.submit_determination(payload)

        for assignment in engine.list_assignments(org="elpc", run_id=run_id):
            if rng.random() >= 0.72:
                continue
            truth = ground_truth[assignment.detection_id]
            visited = rng.random() < 0.96
            visible = visited and rng.random() < 0.77
            latency = rng.choices((0, 1, 2, 3, 4), weights=(42, 48, 5, 3, 2))[0]
            payload = {"assignment_id": assignment.assignment_id,
                       "visited_on": (assignment.dispatched_on
                                      + timedelta(days=latency)).isoformat(),
                       "site_visited": visited,
                       "location_visible": visible}
            if visible:
                payload["manure_present"] = truth
                if truth:
                    payload["reporter_confidence"] = rng.choices(
                        ("high", "medium", "low"), weights=(5, 3, 2))[0]
            engine.submit_response(payload)

    summary = {
        "params": {"seed": params.seed, "facilities": params.n_facilities,
                   "runs": params.n_runs, "verifiers": params.n_verifiers,
                   "detections_per_run": params.detections_per_run,
                   "tpr_curve": [list(p) for p in params.tpr_curve]},
        "totals": {"elpc": analytics.trial_totals(engine, "elpc"),
                   "wdnr": analytics.trial_totals(engine, "wdnr")},
        "confirmation_by_bucket": {
            "elpc": analytics.confirmation_by_bucket(engine, "elpc").to_dict(),
            "wdnr": analytics.confirmation_by_bucket(engine, "wdnr").to_dict()},
        "ground_truth_positives": sum(ground_truth.values()),
        "state_digest": engine.state_digest(),
    }
    return SimulationResult(engine=engine, ground_truth=ground_truth, summary=summary)
