"""Registries of facilities, permitted-spreading fields, and field verifiers.

Ingests plain JSON documents (facilities and verifiers as arrays, fields as
a GeoJSON FeatureCollection), validates referential integrity, and indexes
field geometry in a fixed 0.05-degree grid for spatial lookups. A loaded
registry is immutable; reloading swaps the whole object atomically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ValidationError
from .geo import GeoBBox, GeoPoint, GeoPolygon, bbox_intersects_polygon, haversine_m

GRID_CELL_DEG = 0.05

CAFO_ANIMAL_UNIT_THRESHOLD = 1_000.0


class FacilityKind(str, Enum):
    CAFO = "cafo"
    CAFO_SATELLITE = "cafo_satellite"
    AFO = "afo"
    UNKNOWN = "unknown"


class WastePhase(str, Enum):
    LIQUID = "liquid"
    SOLID = "solid"
    BOTH = "both"
    UNKNOWN = "unknown"


class Org(str, Enum):
    ELPC = "elpc"
    WDNR = "wdnr"


@dataclass(frozen=True)
class Facility:
    facility_id: str
    location: GeoPoint
    kind: FacilityKind
    animal_units: float | None = None
    waste_phase: WastePhase = WastePhase.UNKNOWN
    permit_id: str | None = None

    def __post_init__(self):
        if not self.facility_id:
            raise ValidationError("facility_id must be non-empty",
                                  code="invalid_facility", field="facility_id")
        if self.animal_units is not None:
            if self.animal_units < 0 or not math.isfinite(self.animal_units):
                raise ValidationError("animal_units must be non-negative",
                                      code="invalid_facility", field="animal_units")
            if self.kind is FacilityKind.CAFO and self.animal_units < CAFO_ANIMAL_UNIT_THRESHOLD:
                raise ValidationError(
                    f"facility {self.facility_id}: a CAFO has at least 1,000 animal units",
                    code="invalid_facility", field="animal_units")
            if self.kind is FacilityKind.AFO and self.animal_units >= CAFO_ANIMAL_UNIT_THRESHOLD:
                raise ValidationError(
                    f"facility {self.facility_id}: an AFO has under 1,000 animal units",
                    code="invalid_facility", field="animal_units")

    def to_dict(self) -> dict:
        d = {"facility_id": self.facility_id, "lat": self.location.lat,
             "lon": self.location.lon, "kind": self.kind.value}
        if self.animal_units is not None:
            d["animal_units"] = self.animal_units
        if self.waste_phase is not WastePhase.UNKNOWN:
            d["waste_phase"] = self.waste_phase.value
        if self.permit_id is not None:
            d["permit_id"] = self.permit_id
        return d


@dataclass(frozen=True)
class NmpField:
    """A field permitted for manure spreading in a nutrient management plan.

    geometry holds one polygon per part; MultiPolygon features load as a
    single field with several parts.
    """

    field_id: str
    geometry: tuple[GeoPolygon, ...]
    permittee_facility_id: str

    def __post_init__(self):
        if not self.field_id:
            raise ValidationError("field_id must be non-empty",
                                  code="invalid_field", field="field_id")
        if not self.geometry:
            raise ValidationError(f"field {self.field_id} has no geometry",
                                  code="invalid_field", field="geometry")

    def bbox(self) -> GeoBBox:
        boxes = [poly.bbox() for poly in self.geometry]
        return GeoBBox(min(b.min_lat for b in boxes), min(b.min_lon for b in boxes),
                       max(b.max_lat for b in boxes), max(b.max_lon for b in boxes))

    def intersects_bbox(self, box: GeoBBox) -> bool:
        return any(bbox_intersects_polygon(box, poly) for poly in self.geometry)


@dataclass(frozen=True)
class Verifier:
    verifier_id: str
    home: GeoPoint
    org: Org
    active: bool = True

    def __post_init__(self):
        if not self.verifier_id:
            raise ValidationError("verifier_id must be non-empty",
                                  code="invalid_verifier", field="verifier_id")

    def to_dict(self) -> dict:
        return {"verifier_id": self.verifier_id, "lat": self.home.lat,
                "lon": self.home.lon, "org": self.org.value, "active": self.active}


def _cell_of(lat: float, lon: float) -> tuple[int, int]:
    return (math.floor(lat / GRID_CELL_DEG), math.floor(lon / GRID_CELL_DEG))


def _cells_covering(box: GeoBBox):
    i0, j0 = _cell_of(box.min_lat, box.min_lon)
    i1, j1 = _cell_of(box.max_lat, box.max_lon)
    for i in range(i0, i1 + 1):
        for j in range(j0, j1 + 1):
            yield (i, j)


class Registry:
    """Immutable, indexed view of facilities, fields, and verifiers."""

    def __init__(self, facilities: list[Facility], fields: list[NmpField],
                 verifiers: list[Verifier]):
        self.facilities: dict[str, Facility] = {f.facility_id: f for f in facilities}
        self.fields: dict[str, NmpField] = {f.field_id: f for f in fields}
        self.verifiers: dict[str, Verifier] = {v.verifier_id: v for v in verifiers}
        self._field_grid: dict[tuple[int, int], list[str]] = {}
        for f in fields:
            for cell in _cells_covering(f.bbox()):
                self._field_grid.setdefault(cell, []).append(f.field_id)

    def fields_intersecting(self, box: GeoBBox) -> list[NmpField]:
        """All fields whose geometry shares area or boundary with the box,
        ordered by field_id. Grid-accelerated but oracle-identical to a
        linear scan."""
        candidates: set[str] = set()
        for cell in _cells_covering(box):
            candidates.update(self._field_grid.get(cell, ()))
        hits = [self.fields[fid] for fid in sorted(candidates)
                if self.fields[fid].intersects_bbox(box)]
        return hits

    def verifiers_within(self, pt: GeoPoint, radius_m: float) -> list[tuple[Verifier, float]]:
        """Active verifiers within radius_m of a point, ascending by
        distance with verifier_id breaking ties. Boundary inclusive."""
        out = []
        for v in self.verifiers.values():
            if not v.active:
                continue
            d = haversine_m(pt, v.home)
            if d <= radius_m:
                out.append((v, d))
        out.sort(key=lambda pair: (pair[1], pair[0].verifier_id))
        return out

    def nearest_facility(self, pt: GeoPoint) -> tuple[Facility, float] | None:
        best = None
        for f in self.facilities.values():
            d = haversine_m(pt, f.location)
            if best is None or d < best[1] or (d == best[1] and f.facility_id < best[0].facility_id):
                best = (f, d)
        return best


def _parse_enum(enum_cls, raw, *, field: str, default=None):
    if raw is None and default is not None:
        return default
    try:
        return enum_cls(raw)
    except ValueError:
        allowed = ", ".join(e.value for e in enum_cls)
        raise ValidationError(f"{field} must be one of: {allowed}, got {raw!r}",
                              code="invalid_enum", field=field)


def parse_facility(doc: dict) -> Facility:
    try:
        location = GeoPoint(doc["lat"], doc["lon"])
    except KeyError as exc:
        raise ValidationError(f"facility missing {exc}", code="invalid_facility", field=str(exc))
    return Facility(
        facility_id=str(doc.get("facility_id", "")),
        location=location,
        kind=_parse_enum(FacilityKind, doc.get("kind"), field="kind", default=FacilityKind.UNKNOWN),
        animal_units=float(doc["animal_units"]) if doc.get("animal_units") is not None else None,
        waste_phase=_parse_enum(WastePhase, doc.get("waste_phase"), field="waste_phase",
                                default=WastePhase.UNKNOWN),
        permit_id=doc.get("permit_id"),
    )


def parse_verifier(doc: dict) -> Verifier:
    try:
        home = GeoPoint(doc["lat"], doc["lon"])
    except KeyError as exc:
        raise ValidationError(f"verifier missing {exc}", code="invalid_verifier", field=str(exc))
    return Verifier(
        verifier_id=str(doc.get("verifier_id", "")),
        home=home,
        org=_parse_enum(Org, doc.get("org"), field="org"),
        active=bool(doc.get("active", True)),
    )


def _ring_from_geojson(coords) -> tuple[GeoPoint, ...]:
    # GeoJSON positions are [lon, lat].
    return tuple(GeoPoint(lat, lon) for lon, lat in coords)


def _polygons_from_geojson(geometry: dict) -> tuple[GeoPolygon, ...]:
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "Polygon":
        rings = [coords]
    elif gtype == "MultiPolygon":
        rings = coords
    else:
        raise ValidationError(f"unsupported geometry type {gtype!r}",
                              code="invalid_geometry", field="geometry")
    polys = []
    for poly_coords in rings:
        exterior = _ring_from_geojson(poly_coords[0])
        holes = tuple(_ring_from_geojson(ring) for ring in poly_coords[1:])
        polys.append(GeoPolygon(exterior=exterior, holes=holes))
    return tuple(polys)


def parse_field_feature(feature: dict, index: int) -> NmpField:
    props = feature.get("properties") or {}
    try:
        geometry = _polygons_from_geojson(feature.get("geometry") or {})
    except (ValidationError, TypeError, IndexError, KeyError) as exc:
        msg = exc.message if isinstance(exc, ValidationError) else str(exc)
        raise ValidationError(f"feature {index}: malformed geometry ({msg})",
                              code="invalid_geometry", field=f"features[{index}]")
    return NmpField(
        field_id=str(props.get("field_id", "")),
        geometry=geometry,
        permittee_facility_id=str(props.get("permittee_facility_id", "")),
    )


def load_registry(facilities_doc: list, fields_doc: dict, verifiers_doc: list) -> Registry:
    """Build an indexed registry from raw documents.

    Rejects duplicate ids (naming the id), dangling permittee references,
    and malformed geometry (naming the feature index).
    """
    facilities: list[Facility] = []
    seen: set[str] = set()
    for doc in facilities_doc or []:
        fac = parse_facility(doc)
        if fac.facility_id in seen:
            raise ValidationError(f"duplicate facility_id {fac.facility_id!r}",
                                  code="duplicate_id", field="facility_id")
        seen.add(fac.facility_id)
        facilities.append(fac)

    features = (fields_doc or {}).get("features", [])
    fields: list[NmpField] = []
    seen_fields: set[str] = set()
    for i, feature in enumerate(features):
        fld = parse_field_feature(feature, i)
        if fld.field_id in seen_fields:
            raise ValidationError(f"duplicate field_id {fld.field_id!r}",
                                  code="duplicate_id", field="field_id")
        if fld.permittee_facility_id not in {f.facility_id for f in facilities}:
            raise ValidationError(
                f"field {fld.field_id!r} references unknown facility "
                f"{fld.permittee_facility_id!r}",
                code="dangling_reference", field="permittee_facility_id")
        seen_fields.add(fld.field_id)
        fields.append(fld)

    verifiers: list[Verifier] = []
    seen_verifiers: set[str] = set()
    for doc in verifiers_doc or []:
        ver = parse_verifier(doc)
        if ver.verifier_id in seen_verifiers:
            raise ValidationError(f"duplicate verifier_id {ver.verifier_id!r}",
                                  code="duplicate_id", field="verifier_id")
        seen_verifiers.add(ver.verifier_id)
        verifiers.append(ver)

    return Registry(facilities, fields, verifiers)
