"""Geographic primitives: points, boxes, polygons, and the spatial tests
the triage pipeline is built on.

Distances use the haversine formula on a sphere of mean radius 6,371,000 m.
Local constructions (AOI boxes, box areas, IoU) use an equirectangular
approximation: one degree of latitude is 111,320 m everywhere, and one
degree of longitude is 111,320 m scaled by cos(latitude). At county scale
the error is well under 0.1%, and every quantity has a closed form a test
can recompute independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError

EARTH_RADIUS_M = 6_371_000.0
METERS_PER_DEGREE = 111_320.0

# Tolerance for "on the boundary" decisions, in degrees. Point-in-polygon
# and intersection tests treat boundary contact as inside: routing should
# over-include, humans screen downstream.
_EDGE_EPS = 1e-12


def _check_finite(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise ValidationError(f"{name} must be a finite number, got {value!r}",
                              code="invalid_coordinate", field=name)
    return float(value)


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        lat = _check_finite("lat", self.lat)
        lon = _check_finite("lon", self.lon)
        if not -90.0 <= lat <= 90.0:
            raise ValidationError(f"lat {lat} outside [-90, 90]", code="invalid_coordinate", field="lat")
        if not -180.0 <= lon <= 180.0:
            raise ValidationError(f"lon {lon} outside [-180, 180]", code="invalid_coordinate", field="lon")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def to_dict(self) -> dict:
        return {"lat": self.lat, "lon": self.lon}


@dataclass(frozen=True)
class GeoBBox:
    """An axis-aligned box in degree space."""

    min_lat: float
    min_lon: float
    max_lat: float
    max_lon: float

    def __post_init__(self):
        GeoPoint(self.min_lat, self.min_lon)
        GeoPoint(self.max_lat, self.max_lon)
        if self.min_lat > self.max_lat:
            raise ValidationError("min_lat > max_lat", code="invalid_bbox", field="min_lat")
        if self.min_lon > self.max_lon:
            raise ValidationError("min_lon > max_lon", code="invalid_bbox", field="min_lon")

    @property
    def center(self) -> GeoPoint:
        return GeoPoint((self.min_lat + self.max_lat) / 2.0, (self.min_lon + self.max_lon) / 2.0)

    def contains_point(self, pt: GeoPoint) -> bool:
        """Boundary-inclusive containment."""
        return (self.min_lat <= pt.lat <= self.max_lat
                and self.min_lon <= pt.lon <= self.max_lon)

    def intersects_bbox(self, other: "GeoBBox") -> bool:
        """Boundary contact counts as intersection."""
        return not (other.max_lat < self.min_lat or other.min_lat > self.max_lat
                    or other.max_lon < self.min_lon or other.min_lon > self.max_lon)

    def corners(self) -> tuple[GeoPoint, GeoPoint, GeoPoint, GeoPoint]:
        return (GeoPoint(self.min_lat, self.min_lon), GeoPoint(self.min_lat, self.max_lon),
                GeoPoint(self.max_lat, self.max_lon), GeoPoint(self.max_lat, self.min_lon))

    def to_dict(self) -> dict:
        return {"min_lat": self.min_lat, "min_lon": self.min_lon,
                "max_lat": self.max_lat, "max_lon": self.max_lon}

    @classmethod
    def from_dict(cls, d: dict) -> "GeoBBox":
        try:
            return cls(d["min_lat"], d["min_lon"], d["max_lat"], d["max_lon"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bbox missing key: {exc}", code="invalid_bbox", field="bbox")


Ring = tuple[GeoPoint, ...]


def _as_ring(points) -> Ring:
    ring = tuple(p if isinstance(p, GeoPoint) else GeoPoint(p[0], p[1]) for p in points)
    # Drop an explicit closing vertex; rings are implicitly closed.
    if len(ring) > 1 and ring[0] == ring[-1]:
        ring = ring[:-1]
    return ring


def _ring_area_deg2(ring: Ring) -> float:
    """Signed shoelace area in square degrees (lon as x, lat as y)."""
    total = 0.0
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        total += a.lon * b.lat - b.lon * a.lat
    return total / 2.0


def _segments_properly_cross(p1, p2, p3, p4) -> bool:
    """True when the open segments cross at an interior point."""

    def orient(a, b, c):
        return (b.lon - a.lon) * (c.lat - a.lat) - (b.lat - a.lat) * (c.lon - a.lon)

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 != 0 and d2 != 0 and d3 != 0 and d4 != 0


def _ring_self_intersects(ring: Ring) -> bool:
    n = len(ring)
    for i in range(n):
        a1, a2 = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            # Adjacent edges share a vertex; skip them.
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            b1, b2 = ring[j], ring[(j + 1) % n]
            if _segments_properly_cross(a1, a2, b1, b2):
                return True
    return False


@dataclass(frozen=True)
class GeoPolygon:
    """A simple polygon with optional holes; rings are implicitly closed."""

    exterior: Ring
    holes: tuple[Ring, ...] = field(default=())

    def __post_init__(self):
        exterior = _as_ring(self.exterior)
        holes = tuple(_as_ring(h) for h in self.holes)
        if len(exterior) < 3:
            raise ValidationError("polygon exterior needs at least 3 points",
                                  code="invalid_polygon", field="exterior")
        if abs(_ring_area_deg2(exterior)) == 0.0:
            raise ValidationError("polygon exterior has zero area",
                                  code="invalid_polygon", field="exterior")
        for ring in (exterior, *holes):
            if len(ring) < 3:
                raise ValidationError("polygon ring needs at least 3 points",
                                      code="invalid_polygon", field="holes")
            if _ring_self_intersects(ring):
                raise ValidationError("polygon ring is self-intersecting",
                                      code="invalid_polygon", field="exterior")
        object.__setattr__(self, "exterior", exterior)
        object.__setattr__(self, "holes", holes)

    def bbox(self) -> GeoBBox:
        lats = [p.lat for p in self.exterior]
        lons = [p.lon for p in self.exterior]
        return GeoBBox(min(lats), min(lons), max(lats), max(lons))

    def to_dict(self) -> dict:
        return {
            "exterior": [[p.lat, p.lon] for p in self.exterior],
            "holes": [[[p.lat, p.lon] for p in ring] for ring in self.holes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeoPolygon":
        return cls(
            exterior=tuple(GeoPoint(lat, lon) for lat, lon in d["exterior"]),
            holes=tuple(tuple(GeoPoint(lat, lon) for lat, lon in ring) for ring in d.get("holes", [])),
        )


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on the mean-radius sphere."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = math.radians(b.lat - a.lat)
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def make_aoi(center: GeoPoint, side_m: float = 6_000.0) -> GeoBBox:
    """Square area-of-interest of the given side length centered on a point.

    The box is built in degree space with the local equirectangular scale,
    so its north-south angular extent is exactly side_m / 111,320 degrees.
    Degenerate within a degree of the poles, where cos(lat) vanishes.
    """
    if side_m < 0:
        raise ValidationError("side_m must be >= 0", code="invalid_aoi", field="side_m")
    if abs(center.lat) > 89.0:
        raise ValidationError("AOI scaling degenerate within 1 degree of a pole",
                              code="invalid_aoi", field="center")
    half_lat = (side_m / 2.0) / METERS_PER_DEGREE
    half_lon = (side_m / 2.0) / (METERS_PER_DEGREE * math.cos(math.radians(center.lat)))
    return GeoBBox(center.lat - half_lat, center.lon - half_lon,
                   center.lat + half_lat, center.lon + half_lon)


def _point_on_segment(pt: GeoPoint, a: GeoPoint, b: GeoPoint) -> bool:
    cross = (b.lon - a.lon) * (pt.lat - a.lat) - (b.lat - a.lat) * (pt.lon - a.lon)
    if abs(cross) > _EDGE_EPS:
        return False
    return (min(a.lat, b.lat) - _EDGE_EPS <= pt.lat <= max(a.lat, b.lat) + _EDGE_EPS
            and min(a.lon, b.lon) - _EDGE_EPS <= pt.lon <= max(a.lon, b.lon) + _EDGE_EPS)


def _point_in_ring(pt: GeoPoint, ring: Ring) -> bool:
    """Even-odd ray cast; boundary points handled by the caller."""
    inside = False
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if (a.lat > pt.lat) != (b.lat > pt.lat):
            x_cross = a.lon + (pt.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat)
            if pt.lon < x_cross:
                inside = not inside
    return inside


def _point_on_polygon_boundary(pt: GeoPoint, poly: GeoPolygon) -> bool:
    for ring in (poly.exterior, *poly.holes):
        n = len(ring)
        for i in range(n):
            if _point_on_segment(pt, ring[i], ring[(i + 1) % n]):
                return True
    return False


def point_in_polygon(pt: GeoPoint, poly: GeoPolygon) -> bool:
    """Ray-casting containment; on any ring boundary counts as inside,
    strictly inside a hole counts as outside."""
    if _point_on_polygon_boundary(pt, poly):
        return True
    if not _point_in_ring(pt, poly.exterior):
        return False
    for hole in poly.holes:
        if _point_in_ring(pt, hole):
            return False
    return True


def _bbox_edge_segments(b: GeoBBox):
    c1, c2, c3, c4 = b.corners()
    return ((c1, c2), (c2, c3), (c3, c4), (c4, c1))


def _segments_touch(p1, p2, p3, p4) -> bool:
    if _segments_properly_cross(p1, p2, p3, p4):
        return True
    return (_point_on_segment(p1, p3, p4) or _point_on_segment(p2, p3, p4)
            or _point_on_segment(p3, p1, p2) or _point_on_segment(p4, p1, p2))


def bbox_intersects_polygon(b: GeoBBox, poly: GeoPolygon) -> bool:
    """True iff the box and polygon share any area or boundary point.

    Exact for the polygonal model in degree space: checks vertex
    containment both ways, then edge contact. A box entirely inside a hole
    does not intersect.
    """
    if not b.intersects_bbox(poly.bbox()):
        return False
    for p in poly.exterior:
        if b.contains_point(p):
            return True
    for corner in b.corners():
        if point_in_polygon(corner, poly):
            return True
    for ring in (poly.exterior, *poly.holes):
        n = len(ring)
        for i in range(n):
            e1, e2 = ring[i], ring[(i + 1) % n]
            for s1, s2 in _bbox_edge_segments(b):
                if _segments_touch(e1, e2, s1, s2):
                    return True
    return False


def bbox_area_m2(b: GeoBBox) -> float:
    """Equirectangular box area: dlat_m x dlon_m, longitude scaled at mid-latitude."""
    dlat_m = (b.max_lat - b.min_lat) * METERS_PER_DEGREE
    mid_lat = (b.min_lat + b.max_lat) / 2.0
    dlon_m = (b.max_lon - b.min_lon) * METERS_PER_DEGREE * math.cos(math.radians(mid_lat))
    return dlat_m * dlon_m


def bbox_iou(a: GeoBBox, b: GeoBBox) -> float:
    """Geographic intersection-over-union in degree space with cos-latitude
    scaling, the same metric family as bbox_area_m2."""
    inter_min_lat = max(a.min_lat, b.min_lat)
    inter_max_lat = min(a.max_lat, b.max_lat)
    inter_min_lon = max(a.min_lon, b.min_lon)
    inter_max_lon = min(a.max_lon, b.max_lon)
    if inter_min_lat >= inter_max_lat or inter_min_lon >= inter_max_lon:
        return 0.0
    inter = bbox_area_m2(GeoBBox(inter_min_lat, inter_min_lon, inter_max_lat, inter_max_lon))
    union = bbox_area_m2(a) + bbox_area_m2(b) - inter
    if union <= 0.0:
        return 0.0
    return inter / union
