"""The bundled desk-scale trial fixture.

Builds a synthetic 2023-season dataset through the normal engine command
path (registry load, run registration, ingestion, routing, screening,
responses, determinations, incidental reports) whose aggregates match the
trial's reported toplines exactly: 536/383/284/93 on the advocacy track,
533/123/64 on the regulator track, the 11/27/23/3 compliance split, the
57-detection overlap crosstab, the 34 incidental reports, and the
confidence-bucket rate shape. Geometry is synthetic but internally real:
every routed detection genuinely passes the routing filters it is supposed
to pass and no other.

Everything here is deterministic; building the fixture twice gives
byte-identical event logs and state digests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone

from .compliance import Observation
from .detections import Detection, detection_to_line
from .engine import Engine, ServiceConfig
from .geo import GeoBBox, METERS_PER_DEGREE

# -- geometry layout -------------------------------------------------------

VERIFIER_LATS = (43.0, 43.6, 44.2)
VERIFIER_LONS = (-92.4, -91.5, -90.6, -89.7, -88.8)

SOUTH_BAND_LAT = 42.52
SOUTH_BAND_LON0 = -92.4
SOUTH_BAND_STEP = 0.066
N_SOUTH = 66          # cafos hosting the regulator-only detections
N_NEAR = 15           # verifier neighborhoods, two cafos each

FIELD_HALF_LAT = 0.0100
FIELD_HALF_LON = 0.0125

# In-field jitter slots keep every box comfortably inside its field.
SLOT_OFFSETS = tuple((dlat, dlon)
                     for dlat in (-0.005, 0.0, 0.005)
                     for dlon in (-0.007, 0.0, 0.007))

RUN_DISPATCH_DATES = tuple(
    date(2023, m, d) for m, d in (
        (2, 2), (2, 6), (2, 9), (2, 13), (2, 16), (2, 20), (2, 23), (2, 27),
        (3, 2), (3, 6), (3, 9), (3, 13), (3, 16), (3, 20), (3, 23), (3, 27)))

# -- quota tables ----------------------------------------------------------
# Buckets: [0.5,0.6) [0.6,0.7) [0.7,0.8) [0.8,0.9) [0.9,1.0]

WDNR_SENT = (190, 140, 103, 60, 40)          # 533
WDNR_ACCEPTED = (17, 19, 21, 39, 27)         # 123
WDNR_CONFIRMED = (9, 10, 11, 20, 14)         # 64

# Compliance classes per bucket over the confirmed pool: 11/27/23/3 overall.
WDNR_VIOLATION = (2, 2, 2, 3, 2)
WDNR_PRE_WINDOW = (4, 4, 4, 9, 6)
WDNR_UNREGULATED = (3, 4, 4, 7, 5)
WDNR_OTHER = (0, 0, 1, 1, 1)

# Advocacy buckets: [0.3,0.4) [0.4,0.5) then the five 0.5+ buckets.
ELPC_EDGE_LOWS = (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
ELPC_SENT = (50, 72, 120, 95, 79, 70, 50)        # 536
ELPC_FOLLOWED = (36, 51, 86, 68, 56, 50, 36)     # 383
ELPC_VISITED = (34, 48, 83, 66, 54, 49, 35)      # 369
ELPC_VISIBLE = (26, 37, 64, 51, 41, 38, 27)      # 284
ELPC_CONFIRMED = (2, 4, 11, 15, 20, 24, 17)      # 93

# Reporter confidence (high, medium, low) among confirmed, per bucket.
ELPC_CONFIDENCE = (
    (1, 1, 0), (2, 1, 1), (4, 4, 3), (7, 5, 3), (11, 6, 3), (16, 6, 2), (13, 3, 1))

# Overlap cohort (sent to both orgs), per 0.5+ bucket.
OVERLAP_BOTH = (0, 0, 0, 3, 2)                   # followed by both; 5
OVERLAP_BOTH_WDNR_CONF = (0, 0, 0, 2, 2)         # 4
OVERLAP_BOTH_ELPC_CONF = (0, 0, 0, 2, 1)         # 3
OVERLAP_ELPC_ONLY = (7, 6, 5, 4, 2)              # 24 followed by elpc only
OVERLAP_ELPC_ONLY_CONF = (0, 2, 2, 2, 2)         # 8
OVERLAP_ELPC_ONLY_VISIBLE = (5, 5, 4, 3, 2)      # 19
OVERLAP_WDNR_ONLY = (3, 3, 3, 3, 2)              # 14 followed by wdnr only
OVERLAP_WDNR_ONLY_CONF = (1, 1, 2, 1, 1)         # 6
OVERLAP_NEITHER = (4, 4, 3, 2, 1)                # 14

LATENCY_MULTISET = (0,) * 160 + (1,) * 190 + (2,) * 20 + (3,) * 9 + (4,) * 4  # 383

# Box side lengths in meters. Violations are larger on average with wide
# spread; everything else stays in a narrow band.
VIOLATION_SIDES = (100, 122, 141, 173, 200, 245, 300, 361, 424, 480, 447)
COMPLIANT_SIDES = (190, 200, 210, 220, 230)
OTHER_SIDES = (215,)
UNCONFIRMED_SIDES = (140, 160, 180, 200, 220)
ELPC_SIDES = (150, 170, 190, 210, 230)

TOTAL_IMAGES_REVIEWED = 40_995


@dataclass
class _Plan:
    """One planned detection and everything that will happen to it."""

    bucket_low: float
    score: float = 0.0
    side_m: float = 180.0
    run_idx: int = 0
    facility_key: tuple = ()          # ("south", i) | ("near_a"|"near_b", verifier_idx)
    slot: int = 0
    detection_id: str = ""
    wdnr_sent: bool = False
    wdnr_accept: bool = False
    wdnr_manure: bool | None = None
    wdnr_compliance: str | None = None
    elpc_sent: bool = False
    verifier_idx: int | None = None
    elpc_followed: bool = False
    site_visited: bool = True
    visible: bool = False
    elpc_manure: bool | None = None
    confidence: str | None = None
    latency: int = 0
    notes: str = ""


def _score(bucket_low: float, k: int) -> float:
    return round(bucket_low + 0.004 + (k % 10) * 0.01, 3)


class _Counter:
    def __init__(self):
        self.n = 0

    def next(self) -> int:
        self.n += 1
        return self.n - 1


def _build_wdnr_only_plans() -> list[_Plan]:
    plans = []
    k = _Counter()
    for b, low in enumerate((0.5, 0.6, 0.7, 0.8, 0.9)):
        sent = WDNR_SENT[b] - (OVERLAP_BOTH[b] + OVERLAP_ELPC_ONLY[b]
                               + OVERLAP_WDNR_ONLY[b] + OVERLAP_NEITHER[b])
        accepted = WDNR_ACCEPTED[b] - OVERLAP_BOTH[b] - OVERLAP_WDNR_ONLY[b]
        confirmed = (WDNR_CONFIRMED[b] - OVERLAP_BOTH_WDNR_CONF[b]
                     - OVERLAP_WDNR_ONLY_CONF[b])
        for i in range(sent):
            plan = _Plan(bucket_low=low, score=_score(low, k.next()), wdnr_sent=True)
            if i < confirmed:
                plan.wdnr_accept = True
                plan.wdnr_manure = True
            elif i < accepted:
                plan.wdnr_accept = True
                plan.wdnr_manure = False
            plans.append(plan)
    # Exercise the inclusive score boundary on a couple of entries.
    plans[0].score = 0.5
    plans[1].score = 0.5
    return plans


def _build_overlap_plans() -> list[_Plan]:
    plans = []
    k = _Counter()
    for b, low in enumerate((0.5, 0.6, 0.7, 0.8, 0.9)):
        cells = (
            ("both", OVERLAP_BOTH[b], OVERLAP_BOTH_WDNR_CONF[b],
             OVERLAP_BOTH_ELPC_CONF[b], OVERLAP_BOTH[b], True, True),
            ("elpc_only", OVERLAP_ELPC_ONLY[b], 0, OVERLAP_ELPC_ONLY_CONF[b],
             OVERLAP_ELPC_ONLY_VISIBLE[b], False, True),
            ("wdnr_only", OVERLAP_WDNR_ONLY[b], OVERLAP_WDNR_ONLY_CONF[b], 0, 0, True, False),
            ("neither", OVERLAP_NEITHER[b], 0, 0, 0, False, False),
        )
        for cell, n, wdnr_conf, elpc_conf, visible_n, wdnr_followed, elpc_followed in cells:
            for i in range(n):
                plan = _Plan(bucket_low=low, score=_score(low, k.next()),
                             wdnr_sent=True, elpc_sent=True)
                plan.wdnr_accept = wdnr_followed
                if wdnr_followed:
                    plan.wdnr_manure = i < wdnr_conf
                plan.elpc_followed = elpc_followed
                if elpc_followed:
                    plan.visible = i < visible_n
                    if plan.visible:
                        plan.elpc_manure = i < elpc_conf
                if (cell == "both" and plan.wdnr_manure and plan.visible
                        and plan.elpc_manure is False):
                    # The disagreement case: regulator confirmed, verifier saw
                    # only fresh snow cover.
                    plan.notes = "field entirely snow covered at visit"
                plans.append(plan)
    return plans


def _build_elpc_only_plans() -> list[_Plan]:
    plans = []
    k = _Counter()
    overlap_sent = dict(zip((0.5, 0.6, 0.7, 0.8, 0.9),
                            (sum(x) for x in zip(OVERLAP_BOTH, OVERLAP_ELPC_ONLY,
                                                 OVERLAP_WDNR_ONLY, OVERLAP_NEITHER))))
    overlap_followed = dict(zip((0.5, 0.6, 0.7, 0.8, 0.9),
                                (a + b for a, b in zip(OVERLAP_BOTH, OVERLAP_ELPC_ONLY))))
    overlap_visited = overlap_followed
    overlap_visible = dict(zip((0.5, 0.6, 0.7, 0.8, 0.9),
                               (a + b for a, b in zip(OVERLAP_BOTH, OVERLAP_ELPC_ONLY_VISIBLE))))
    overlap_conf = dict(zip((0.5, 0.6, 0.7, 0.8, 0.9),
                            (a + b for a, b in zip(OVERLAP_BOTH_ELPC_CONF,
                                                   OVERLAP_ELPC_ONLY_CONF))))
    for b, low in enumerate(ELPC_EDGE_LOWS):
        sent = ELPC_SENT[b] - overlap_sent.get(low, 0)
        followed = ELPC_FOLLOWED[b] - overlap_followed.get(low, 0)
        visited = ELPC_VISITED[b] - overlap_visited.get(low, 0)
        visible = ELPC_VISIBLE[b] - overlap_visible.get(low, 0)
        confirmed = ELPC_CONFIRMED[b] - overlap_conf.get(low, 0)
        assert sent >= followed >= visited >= visible >= confirmed >= 0, (
            f"inconsistent advocacy quotas in bucket {low}")
        for i in range(sent):
            plan = _Plan(bucket_low=low, score=_score(low, k.next()), elpc_sent=True)
            if i < followed:
                plan.elpc_followed = True
                if i < confirmed:
                    plan.visible = True
                    plan.elpc_manure = True
                elif i < visible:
                    plan.visible = True
                    plan.elpc_manure = False
                elif i < visited:
                    plan.visible = False
                else:
                    plan.site_visited = False
                    plan.visible = False
            plans.append(plan)
    return plans


def _assign_confidence(plans: list[_Plan]) -> None:
    pools = {}
    for b, low in enumerate(ELPC_EDGE_LOWS):
        high, medium, lowc = ELPC_CONFIDENCE[b]
        pools[low] = ["high"] * high + ["medium"] * medium + ["low"] * lowc
    for plan in plans:
        if plan.elpc_manure:
            plan.confidence = pools[plan.bucket_low].pop(0)
    leftovers = [p for p in pools.values() if p]
    assert not leftovers, "confidence quota mismatch"


def _assign_compliance(plans: list[_Plan]) -> None:
    pools = {}
    for b, low in enumerate((0.5, 0.6, 0.7, 0.8, 0.9)):
        classes = []
        trio = (["compliant_pre_window"] * WDNR_PRE_WINDOW[b]
                + ["compliant_unregulated_entity"] * WDNR_UNREGULATED[b]
                + ["violation"] * WDNR_VIOLATION[b])
        # Interleave so no run or cohort is all one class.
        step = 3
        for offset in range(step):
            classes.extend(trio[offset::step])
        classes.extend(["compliant_other"] * WDNR_OTHER[b])
        pools[low] = classes
    sides = {"violation": list(VIOLATION_SIDES), "compliant_other": list(OTHER_SIDES)}
    compliant_cycle = _Counter()
    unconfirmed_cycle = _Counter()
    for plan in plans:
        if plan.wdnr_manure:
            plan.wdnr_compliance = pools[plan.bucket_low].pop(0)
            if plan.wdnr_compliance == "violation":
                plan.side_m = sides["violation"].pop(0)
            elif plan.wdnr_compliance == "compliant_other":
                plan.side_m = OTHER_SIDES[0]
            else:
                plan.side_m = COMPLIANT_SIDES[compliant_cycle.next() % len(COMPLIANT_SIDES)]
        elif plan.wdnr_sent:
            plan.side_m = UNCONFIRMED_SIDES[unconfirmed_cycle.next() % len(UNCONFIRMED_SIDES)]
    leftovers = [p for p in pools.values() if p]
    assert not leftovers and not sides["violation"], "compliance quota mismatch"


def _assign_latencies(plans: list[_Plan]) -> None:
    latencies = list(LATENCY_MULTISET)
    for plan in plans:
        if plan.elpc_followed:
            plan.latency = latencies.pop(0)
    assert not latencies, "latency quota mismatch"


def _facility_center(key: tuple) -> tuple[float, float]:
    kind, idx = key
    if kind == "south":
        return (SOUTH_BAND_LAT, SOUTH_BAND_LON0 + SOUTH_BAND_STEP * idx)
    vlat = VERIFIER_LATS[idx // len(VERIFIER_LONS)]
    vlon = VERIFIER_LONS[idx % len(VERIFIER_LONS)]
    if kind == "near_a":
        return (vlat + 0.030, vlon + 0.030)
    return (vlat - 0.040, vlon + 0.050)  # near_b


def _plan_bbox(plan: _Plan) -> dict:
    clat, clon = _facility_center(plan.facility_key)
    dlat, dlon = SLOT_OFFSETS[plan.slot % len(SLOT_OFFSETS)]
    clat, clon = clat + dlat, clon + dlon
    half_lat = plan.side_m / 2.0 / METERS_PER_DEGREE
    half_lon = plan.side_m / 2.0 / (METERS_PER_DEGREE * math.cos(math.radians(clat)))
    return {"min_lat": round(clat - half_lat, 7), "min_lon": round(clon - half_lon, 7),
            "max_lat": round(clat + half_lat, 7), "max_lon": round(clon + half_lon, 7)}


def build_plans() -> list[_Plan]:
    """Lay out every detection: quotas, scores, sides, runs, and placement."""
    wdnr_only = _build_wdnr_only_plans()
    overlap = _build_overlap_plans()
    elpc_only = _build_elpc_only_plans()

    elpc_bound = overlap + elpc_only
    _assign_confidence(elpc_bound)
    _assign_latencies(elpc_bound)

    # Regulator-only detections cycle through the southern facilities/runs.
    for i, plan in enumerate(wdnr_only):
        plan.run_idx = i % len(RUN_DISPATCH_DATES)
        plan.facility_key = ("south", i % 60)
        plan.slot = i // 240

    # Advocacy-bound detections round-robin over (run, verifier) slots.
    per_run_verifier: dict[tuple[int, int], int] = {}
    for i, plan in enumerate(elpc_bound):
        verifier_idx = i % N_NEAR
        run_idx = (i // N_NEAR) % len(RUN_DISPATCH_DATES)
        plan.run_idx = run_idx
        plan.verifier_idx = verifier_idx
        plan.facility_key = ("near_a" if plan.wdnr_sent else "near_b", verifier_idx)
        count = per_run_verifier.get((run_idx, verifier_idx), 0)
        plan.slot = count
        per_run_verifier[(run_idx, verifier_idx)] = count + 1
    assert max(per_run_verifier.values()) <= 5, "verifier top-k capacity exceeded"

    cycle = _Counter()
    for plan in elpc_bound:
        if not plan.wdnr_sent:
            plan.side_m = ELPC_SIDES[cycle.next() % len(ELPC_SIDES)]

    _assign_compliance(wdnr_only + overlap)

    # Two stray low-score detections that nobody routes: they back the
    # "detected below threshold" incidental category.
    stray = [
        _Plan(bucket_low=0.3, score=0.30, side_m=200, run_idx=0,
              facility_key=("south", 61), slot=4),
        _Plan(bucket_low=0.4, score=0.42, side_m=200, run_idx=0,
              facility_key=("south", 62), slot=4),
    ]

    plans = elpc_bound + wdnr_only + stray
    for i, plan in enumerate(plans, start=1):
        plan.detection_id = f"D{i:05d}"
    return plans


# -- registry documents ----------------------------------------------------

def registry_docs() -> tuple[list, dict, list]:
    facilities = []
    features = []
    for i in range(N_SOUTH):
        fid = f"FS{i + 1:02d}"
        lat, lon = _facility_center(("south", i))
        facilities.append({"facility_id": fid, "lat": lat, "lon": lon, "kind": "cafo",
                           "animal_units": 1000 + 25 * (i % 40),
                           "waste_phase": ("liquid", "solid", "both")[i % 3],
                           "permit_id": f"WPDES-{4000 + i}"})
        if i == 63:
            features.append(_multipolygon_feature(fid, lat, lon))
        elif i == 64:
            features.append(_holed_feature(fid, lat, lon))
        else:
            features.append(_rect_feature(f"NMP-{fid}", fid, lat, lon))
    for v in range(N_NEAR):
        fid_a = f"FN{v + 1:02d}A"
        lat_a, lon_a = _facility_center(("near_a", v))
        facilities.append({"facility_id": fid_a, "lat": lat_a, "lon": lon_a,
                           "kind": "cafo", "animal_units": 1200 + 50 * v,
                           "waste_phase": ("liquid", "solid")[v % 2],
                           "permit_id": f"WPDES-{4600 + v}"})
        features.append(_rect_feature(f"NMP-{fid_a}", fid_a, lat_a, lon_a))
        fid_b = f"FN{v + 1:02d}B"
        lat_b, lon_b = _facility_center(("near_b", v))
        facilities.append({"facility_id": fid_b, "lat": lat_b, "lon": lon_b,
                           "kind": "cafo", "animal_units": 1100 + 30 * v})
    for i in range(6):
        facilities.append({"facility_id": f"SAT{i + 1:02d}", "lat": 42.56,
                           "lon": -92.2 + 0.5 * i, "kind": "cafo_satellite"})
    for i in range(4):
        lat, lon = VERIFIER_LATS[0], VERIFIER_LONS[i]
        facilities.append({"facility_id": f"AFO{i + 1:02d}", "lat": lat + 0.06,
                           "lon": lon - 0.05, "kind": "afo",
                           "animal_units": 400 + 150 * i})
    for i in range(3):
        facilities.append({"facility_id": f"DC{i + 1:02d}", "lat": 45.0 + 0.05 * i,
                           "lon": -87.3 + 0.1 * i, "kind": "unknown"})

    verifiers = []
    idx = 0
    for lat in VERIFIER_LATS:
        for lon in VERIFIER_LONS:
            idx += 1
            verifiers.append({"verifier_id": f"V{idx:02d}", "lat": lat, "lon": lon,
                              "org": "elpc", "active": True})

    fields_fc = {"type": "FeatureCollection", "features": features}
    return facilities, fields_fc, verifiers


def _rect_ring(lat: float, lon: float, half_lat: float = FIELD_HALF_LAT,
               half_lon: float = FIELD_HALF_LON) -> list:
    return [[lon - half_lon, lat - half_lat], [lon + half_lon, lat - half_lat],
            [lon + half_lon, lat + half_lat], [lon - half_lon, lat + half_lat],
            [lon - half_lon, lat - half_lat]]


def _rect_feature(field_id: str, facility_id: str, lat: float, lon: float) -> dict:
    return {"type": "Feature",
            "properties": {"field_id": field_id, "permittee_facility_id": facility_id},
            "geometry": {"type": "Polygon", "coordinates": [_rect_ring(lat, lon)]}}


def _multipolygon_feature(facility_id: str, lat: float, lon: float) -> dict:
    part1 = _rect_ring(lat, lon, 0.008, 0.005)
    part2 = _rect_ring(lat, lon + 0.018, 0.008, 0.005)
    return {"type": "Feature",
            "properties": {"field_id": f"NMP-{facility_id}",
                           "permittee_facility_id": facility_id},
            "geometry": {"type": "MultiPolygon", "coordinates": [[part1], [part2]]}}


def _holed_feature(facility_id: str, lat: float, lon: float) -> dict:
    outer = _rect_ring(lat, lon)
    hole = _rect_ring(lat, lon, 0.002, 0.002)
    return {"type": "Feature",
            "properties": {"field_id": f"NMP-{facility_id}",
                           "permittee_facility_id": facility_id},
            "geometry": {"type": "Polygon", "coordinates": [outer, hole]}}


# -- incidental reports ----------------------------------------------------

def incidental_payloads(plans: list[_Plan]) -> list[dict]:
    payloads = []
    n = _Counter()

    def add(**kwargs):
        payloads.append({"report_id": f"IR{n.next() + 1:04d}",
                         "observed_on": date(2023, 3, 1 + (n.n % 28)).isoformat(),
                         "reporter_verifier_id": f"V{(n.n % 15) + 1:02d}", **kwargs})

    for i in range(5):
        add(notes=f"roadside sighting, no cross street recalled ({i + 1})")
    strays = [p for p in plans if p.facility_key[0] == "south" and p.facility_key[1] >= 61]
    assert len(strays) == 2, "expected the two stray low-score detections"
    for plan in strays:
        bbox = _plan_bbox(plan)
        add(lat=round((bbox["min_lat"] + bbox["max_lat"]) / 2, 7),
            lon=round((bbox["min_lon"] + bbox["max_lon"]) / 2, 7),
            notes="spread seen next to storage lagoon")
    for i in range(14):
        add(lat=43.30, lon=round(-92.3 + 0.1 * i, 4),
            notes="spotted while driving between assignments")
    for i in range(13):
        lat, lon = _facility_center(("south", 40 + i))
        add(lat=round(lat + 0.020, 7), lon=round(lon - 0.025, 7),
            notes="fresh rows on snow near permitted operation")
    return payloads


# -- pre-window corroboration series ---------------------------------------

def pre_window_series() -> list[tuple[str, list[Observation]]]:
    """27 imagery time series for the claimed pre-window sites: 11 support
    the claim outright, 7 pin it to the window boundary, 5 contradict it,
    and 4 cannot say."""
    series: list[tuple[str, list[Observation]]] = []
    k = _Counter()

    def add(obs):
        series.append((f"PW{k.next() + 1:02d}", obs))

    for i in range(11):
        add([Observation(date(2023, 1, 8 + i), False),
             Observation(date(2023, 1, 18 + i % 10), True),
             Observation(date(2023, 2, 3 + i % 5), True)])
    for i in range(7):
        add([Observation(date(2023, 1, 20), False),
             Observation(date(2023, 1, 30 + i % 2), False),
             Observation(date(2023, 2, 1 + i % 4), True)])
    for i in range(5):
        add([Observation(date(2023, 1, 28), False),
             Observation(date(2023, 2, 2 + i), False),
             Observation(date(2023, 2, 6 + i), True)])
    add([Observation(date(2023, 1, 15), False),
         Observation(date(2023, 2, 8), False, usable=False),
         Observation(date(2023, 2, 14), False)])
    add([Observation(date(2023, 1, 10), False),
         Observation(date(2023, 2, 9), True)])
    add([Observation(date(2023, 2, 6), True)])
    add([Observation(date(2023, 1, 25), True, usable=False),
         Observation(date(2023, 2, 20), False)])
    assert len(series) == 27
    return series


# -- engine construction ---------------------------------------------------

def _fixture_clock():
    base = datetime(2023, 4, 1, 12, 0, 0, tzinfo=timezone.utc)
    counter = _Counter()

    def clock() -> datetime:
        return base + timedelta(seconds=counter.next())

    return clock


def detection_file_for_run(plans: list[_Plan], run_idx: int) -> str:
    lines = []
    for plan in sorted((p for p in plans if p.run_idx == run_idx),
                       key=lambda p: p.detection_id):
        bbox = _plan_bbox(plan)
        obj = {"detection_id": plan.detection_id,
               "run_id": f"RUN-{run_idx + 1:02d}",
               "score": plan.score, "bbox": bbox,
               "image_uri": f"img://runs/RUN-{run_idx + 1:02d}/{plan.detection_id}.png"}
        seq = int(plan.detection_id[1:])
        if seq % 17 != 3:
            obj["summer_image_uri"] = f"img://summer/{plan.detection_id}.png"
        det = Detection(detection_id=obj["detection_id"], run_id=obj["run_id"],
                        bbox=GeoBBox.from_dict(obj["bbox"]), score=obj["score"],
                        image_uri=obj["image_uri"],
                        summer_image_uri=obj.get("summer_image_uri"))
        lines.append(detection_to_line(det))
    return "\n".join(lines) + "\n" if lines else ""


def build_trial_engine(data_dir=None, config: ServiceConfig | None = None) -> Engine:
    """Construct the full trial fixture through engine commands.

    With data_dir=None the engine is in-memory; otherwise events land in
    the given directory and the engine can be reopened from disk.
    """
    plans = build_plans()
    if config is None:
        config = ServiceConfig(fsync=False)
    if data_dir is not None:
        engine = Engine.open(data_dir, config=config, clock=_fixture_clock())
    else:
        engine = Engine(config=config, clock=_fixture_clock())

    facilities, fields_fc, verifiers = registry_docs()
    summary = engine.load_registry(facilities, fields_fc, verifiers)
    assert summary["facilities"] == 109 and summary["verifiers"] == 15

    reject_reasons = ("vegetation", "building", "roadway", "shadow", "other")
    response_seq = _Counter()
    determination_seq = _Counter()
    for run_idx, dispatched in enumerate(RUN_DISPATCH_DATES):
        run_id = f"RUN-{run_idx + 1:02d}"
        engine.register_run(run_id, dispatched - timedelta(days=1), dispatched)
        text = detection_file_for_run(plans, run_idx)
        run_plans = [p for p in plans if p.run_idx == run_idx]
        result = engine.ingest_detections(run_id, text)
        assert result.accepted == len(run_plans), (
            f"{run_id}: ingested {result.accepted} of {len(run_plans)}: {result.rejected[:3]}")

        queued = engine.route_wdnr(run_id)
        expected_wdnr = {p.detection_id for p in run_plans if p.wdnr_sent}
        assert {i.detection_id for i in queued} == expected_wdnr, (
            f"{run_id}: regulator queue mismatch")

        assignments = engine.route_elpc(run_id)
        expected_elpc = {p.detection_id for p in run_plans if p.elpc_sent}
        assert {a.detection_id for a in assignments} == expected_elpc, (
            f"{run_id}: advocacy assignment mismatch")
        verifier_of = {a.detection_id: a.verifier_id for a in assignments}
        for plan in run_plans:
            if plan.elpc_sent:
                expected_verifier = f"V{plan.verifier_idx + 1:02d}"
                assert verifier_of[plan.detection_id] == expected_verifier, (
                    f"{plan.detection_id}: routed to {verifier_of[plan.detection_id]}, "
                    f"planned {expected_verifier}")

        decision_date = dispatched + timedelta(days=1)
        for j, plan in enumerate(sorted((p for p in run_plans if p.wdnr_sent),
                                        key=lambda p: p.detection_id)):
            if plan.wdnr_accept:
                engine.record_screening(plan.detection_id, "accept",
                                        decided_on=decision_date)
            else:
                engine.record_screening(plan.detection_id, "reject",
                                        reason=reject_reasons[j % len(reject_reasons)],
                                        note="screened out at desk review",
                                        decided_on=decision_date)

        for j, plan in enumerate(sorted((p for p in run_plans if p.wdnr_accept),
                                        key=lambda p: p.detection_id)):
            payload = {"determination_id": f"DT{determination_seq.next() + 1:05d}",
                       "assignment_id": f"A-wdnr-{plan.detection_id}",
                       "decided_on": (decision_date + timedelta(days=j % 3)).isoformat(),
                       "manure_present": bool(plan.wdnr_manure),
                       "method_notes": "site visit and permittee records"}
            if plan.wdnr_manure:
                payload["compliance"] = plan.wdnr_compliance
            engine.submit_determination(payload)

        for plan in sorted((p for p in run_plans if p.elpc_followed),
                           key=lambda p: p.detection_id):
            verifier_id = f"V{plan.verifier_idx + 1:02d}"
            payload = {"response_id": f"FR{response_seq.next() + 1:05d}",
                       "assignment_id": f"A-elpc-{plan.detection_id}-{verifier_id}",
                       "visited_on": (dispatched + timedelta(days=plan.latency)).isoformat(),
                       "location_visible": plan.visible,
                       "site_visited": plan.site_visited,
                       "notes": plan.notes}
            if plan.visible:
                payload["manure_present"] = plan.elpc_manure
            if plan.confidence:
                payload["reporter_confidence"] = plan.confidence
            engine.submit_response(payload)

    for payload in incidental_payloads(plans):
        engine.report_incidental(payload)
    return engine
