"""Partition schemes over a study area: uniform grids and irregular zones.

A partition scheme resolves points to regions and, for zone schemes,
regions to per-cell area fractions on a grid.  All geometry is planar
lon/lat: only area *ratios* are consumed downstream, so projection
distortion cancels within a zone.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

# Consecutive clip-output vertices closer than this (degrees) are merged.
SNAP_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid polygon geometry, tagged with the offending zone id."""

    def __init__(self, message: str, zone_id: int | None = None):
        if zone_id is not None:
            message = f"zone {zone_id}: {message}"
        super().__init__(message)
        self.zone_id = zone_id


@dataclass(frozen=True)
class BBox:
    """Axis-aligned study extent in degrees."""

    lon_min: float
    lon_max: float
    lat_min: float
    lat_max: float

    def __post_init__(self):
        if not (self.lon_min < self.lon_max):
            raise ValueError(f"degenerate bbox: lon_min {self.lon_min} >= lon_max {self.lon_max}")
        if not (self.lat_min < self.lat_max):
            raise ValueError(f"degenerate bbox: lat_min {self.lat_min} >= lat_max {self.lat_max}")

    @property
    def width(self) -> float:
        return self.lon_max - self.lon_min

    @property
    def height(self) -> float:
        return self.lat_max - self.lat_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def contains(self, lon: float, lat: float) -> bool:
        """Closed containment: boundary points count as inside."""
        return (self.lon_min <= lon <= self.lon_max) and (self.lat_min <= lat <= self.lat_max)

    def to_json(self) -> dict:
        return {
            "lon_min": self.lon_min,
            "lon_max": self.lon_max,
            "lat_min": self.lat_min,
            "lat_max": self.lat_max,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BBox":
        return cls(obj["lon_min"], obj["lon_max"], obj["lat_min"], obj["lat_max"])


@dataclass(frozen=True)
class RegionId:
    """A region reference: grid cell (row-major index) or zone ordinal."""

    scheme_kind: str  # "grid" | "zone"
    index: int


@dataclass(frozen=True)
class GridScheme:
    """w x h uniform grid over a bbox.

    Cell (0, 0) sits at (lon_min, lat_min); the row-major cell index is
    iy * w + ix.  Cell edges come from a single linspace per axis so
    neighbouring cells share bit-identical boundaries and cell areas
    telescope exactly to the bbox area.
    """

    bbox: BBox
    w: int
    h: int
    lon_edges: np.ndarray = field(init=False, repr=False, compare=False)
    lat_edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.w}x{self.h}")
        object.__setattr__(self, "lon_edges", np.linspace(self.bbox.lon_min, self.bbox.lon_max, self.w + 1))
        object.__setattr__(self, "lat_edges", np.linspace(self.bbox.lat_min, self.bbox.lat_max, self.h + 1))

    @property
    def n_cells(self) -> int:
        return self.w * self.h

    @property
    def cell_width(self) -> float:
        return self.bbox.width / self.w

    @property
    def cell_height(self) -> float:
        return self.bbox.height / self.h

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.w + ix

    def cell_bounds(self, index: int) -> tuple[float, float, float, float]:
        """(lon0, lon1, lat0, lat1) of a cell by row-major index."""
        ix = index % self.w
        iy = index // self.w
        return (
            float(self.lon_edges[ix]),
            float(self.lon_edges[ix + 1]),
            float(self.lat_edges[iy]),
            float(self.lat_edges[iy + 1]),
        )

    def cell_center(self, index: int) -> tuple[float, float]:
        x0, x1, y0, y1 = self.cell_bounds(index)
        return (0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def assign(self, lon: float, lat: float) -> int | None:
        """Cell containing a point, or None outside the bbox.

        Points on interior shared edges belong to the higher-index cell;
        points on the bbox max edges belong to the last row/column.
        """
        out = self.assign_many(np.asarray([lon]), np.asarray([lat]))
        return int(out[0]) if out[0] >= 0 else None

    def assign_many(self, lons: np.ndarray, lats: np.ndarray) -> np.ndarray:
        """Vectorised assign; -1 marks points outside the bbox."""
        lons = np.asarray(lons, dtype=np.float64)
        lats = np.asarray(lats, dtype=np.float64)
        ix = np.searchsorted(self.lon_edges, lons, side="right") - 1
        iy = np.searchsorted(self.lat_edges, lats, side="right") - 1
        # max-edge points fold into the last cell, everything else outside -> -1
        ix = np.where(lons == self.bbox.lon_max, self.w - 1, ix)
        iy = np.where(lats == self.bbox.lat_max, self.h - 1, iy)
        inside = (ix >= 0) & (ix < self.w) & (iy >= 0) & (iy < self.h)
        return np.where(inside, iy * self.w + ix, -1)


def build_grid(bbox: BBox, w: int, h: int) -> GridScheme:
    """Uniform w x h grid tessellating the bbox with no gaps or overlaps."""
    return GridScheme(bbox=bbox, w=w, h=h)


# ---------------------------------------------------------------------------
# Zone polygons


def _normalize_ring(coords, zone_id=None) -> np.ndarray:
    ring = np.asarray(coords, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise GeometryError("ring must be a sequence of (lon, lat) pairs", zone_id)
    # GeoJSON rings repeat the first vertex; store open rings
    if len(ring) >= 2 and ring[0][0] == ring[-1][0] and ring[0][1] == ring[-1][1]:
        ring = ring[:-1]
    if len(ring) < 3:
        raise GeometryError("ring has fewer than 3 distinct vertices", zone_id)
    if not np.all(np.isfinite(ring)):
        raise GeometryError("ring has non-finite coordinates", zone_id)
    return ring


def _segments_properly_cross(a, b, c, d) -> bool:
    """True when segments ab and cd cross at an interior point of both."""

    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


def _check_simple(ring: np.ndarray, zone_id=None) -> None:
    """Reject rings whose non-adjacent edges properly cross."""
    n = len(ring)
    closed = np.vstack([ring, ring[:1]])
    for i in range(n):
        for j in range(i + 1, n):
            # skip adjacent edges (shared endpoint), including the wrap pair
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_properly_cross(closed[i], closed[i + 1], closed[j], closed[j + 1]):
                raise GeometryError(f"self-intersecting ring (edges {i} and {j})", zone_id)


def ring_area(ring: np.ndarray) -> float:
    """Unsigned shoelace area; invariant to vertex orientation."""
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


@dataclass(frozen=True)
class ZonePart:
    """One polygon part: an outer ring plus zero or more hole rings."""

    outer: np.ndarray
    holes: tuple[np.ndarray, ...] = ()

    @property
    def area(self) -> float:
        return ring_area(self.outer) - sum(ring_area(h) for h in self.holes)

    def bounds(self) -> tuple[float, float, float, float]:
        return (
            float(self.outer[:, 0].min()),
            float(self.outer[:, 0].max()),
            float(self.outer[:, 1].min()),
            float(self.outer[:, 1].max()),
        )


@dataclass(frozen=True)
class Zone:
    zone_id: int
    parts: tuple[ZonePart, ...]

    @property
    def area(self) -> float:
        return sum(p.area for p in self.parts)


def _point_on_ring(ring: np.ndarray, lon: float, lat: float) -> bool:
    n = len(ring)
    for i in range(n):
        ax, ay = ring[i]
        bx, by = ring[(i + 1) % n]
        if (min(ax, bx) <= lon <= max(ax, bx)) and (min(ay, by) <= lat <= max(ay, by)):
            cross = (bx - ax) * (lat - ay) - (by - ay) * (lon - ax)
            if cross == 0.0:
                return True
    return False


def _point_in_ring(ring: np.ndarray, lon: float, lat: float) -> bool:
    """Even-odd crossing test; boundary points are NOT handled here."""
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i]
        xj, yj = ring[j]
        if (yi > lat) != (yj > lat):
            x_cross = (xj - xi) * (lat - yi) / (yj - yi) + xi
            if lon < x_cross:
                inside = not inside
        j = i
    return inside


class ZoneScheme:
    """Irregular partition of the study area into interior-disjoint zones.

    Zones are kept sorted by zone_id; the zone *ordinal* (list position)
    is the RegionId index.  Pairwise interior-disjointness is an input
    contract and is not verified; per-polygon validity is.
    """

    def __init__(self, zones: list[tuple[int, list]]):
        """zones: list of (zone_id, parts) with parts = [(outer, holes), ...]."""
        seen: set[int] = set()
        built: list[Zone] = []
        for zone_id, parts in zones:
            if zone_id in seen:
                raise GeometryError("duplicate zone_id", zone_id)
            seen.add(zone_id)
            norm_parts = []
            for outer, holes in parts:
                outer_ring = _normalize_ring(outer, zone_id)
                _check_simple(outer_ring, zone_id)
                hole_rings = []
                for hole in holes:
                    hr = _normalize_ring(hole, zone_id)
                    _check_simple(hr, zone_id)
                    hole_rings.append(hr)
                norm_parts.append(ZonePart(outer=outer_ring, holes=tuple(hole_rings)))
            zone = Zone(zone_id=zone_id, parts=tuple(norm_parts))
            if zone.area <= 0.0:
                raise GeometryError("zone area is not positive", zone_id)
            built.append(zone)
        built.sort(key=lambda z: z.zone_id)
        self.zones: list[Zone] = built
        self._index = None

    def __len__(self) -> int:
        return len(self.zones)

    @property
    def zone_ids(self) -> list[int]:
        return [z.zone_id for z in self.zones]

    def bounds(self) -> tuple[float, float, float, float]:
        bs = [p.bounds() for z in self.zones for p in z.parts]
        return (
            min(b[0] for b in bs),
            max(b[1] for b in bs),
            min(b[2] for b in bs),
            max(b[3] for b in bs),
        )

    def contains(self, ordinal: int, lon: float, lat: float) -> bool:
        """Boundary-inclusive containment in one zone."""
        zone = self.zones[ordinal]
        for part in zone.parts:
            if _point_on_ring(part.outer, lon, lat):
                return True
            if _point_in_ring(part.outer, lon, lat):
                on_hole = False
                in_hole = False
                for hole in part.holes:
                    if _point_on_ring(hole, lon, lat):
                        on_hole = True
                        break
                    if _point_in_ring(hole, lon, lat):
                        in_hole = True
                        break
                if on_hole:
                    return True
                if not in_hole:
                    return True
        return False

    def _bucket_index(self, nx: int = 64, ny: int = 64):
        """Coarse bucket grid over zone bounding boxes for point queries."""
        if self._index is not None:
            return self._index
        x0, x1, y0, y1 = self.bounds()
        # pad so max-edge points land in the last bucket
        buckets: dict[tuple[int, int], list[int]] = {}
        dx = (x1 - x0) / nx or 1.0
        dy = (y1 - y0) / ny or 1.0
        for ordinal, zone in enumerate(self.zones):
            for part in zone.parts:
                bx0, bx1, by0, by1 = part.bounds()
                i0 = max(0, min(nx - 1, int((bx0 - x0) / dx)))
                i1 = max(0, min(nx - 1, int((bx1 - x0) / dx)))
                j0 = max(0, min(ny - 1, int((by0 - y0) / dy)))
                j1 = max(0, min(ny - 1, int((by1 - y0) / dy)))
                for i in range(i0, i1 + 1):
                    for j in range(j0, j1 + 1):
                        buckets.setdefault((i, j), []).append(ordinal)
        for key in buckets:
            buckets[key] = sorted(set(buckets[key]))
        self._index = (x0, y0, dx, dy, nx, ny, buckets)
        return self._index

    def assign(self, lon: float, lat: float) -> int | None:
        """Ordinal of the zone containing the point (lowest zone_id wins ties)."""
        x0, y0, dx, dy, nx, ny, buckets = self._bucket_index()
        i = int((lon - x0) / dx)
        j = int((lat - y0) / dy)
        if i < 0 or i >= nx + 1 or j < 0 or j >= ny + 1:
            # allow max-edge points one bucket over
            pass
        i = min(max(i, 0), nx - 1)
        j = min(max(j, 0), ny - 1)
        for ordinal in buckets.get((i, j), ()):
            if self.contains(ordinal, lon, lat):
                return ordinal
        return None

    def assign_many(self, lons: np.ndarray, lats: np.ndarray) -> np.ndarray:
        out = np.full(len(lons), -1, dtype=np.int64)
        for k in range(len(lons)):
            ordinal = self.assign(float(lons[k]), float(lats[k]))
            if ordinal is not None:
                out[k] = ordinal
        return out


def assign_point(scheme: GridScheme | ZoneScheme, lon: float, lat: float) -> RegionId | None:
    """Resolve a point to a region of either scheme kind, or None if outside."""
    if isinstance(scheme, GridScheme):
        idx = scheme.assign(lon, lat)
        return RegionId("grid", idx) if idx is not None else None
    idx = scheme.assign(lon, lat)
    return RegionId("zone", idx) if idx is not None else None


# ---------------------------------------------------------------------------
# Polygon clipping against grid cells

def _clip_halfplane(ring: list, axis: int, bound: float, keep_ge: bool) -> list:
    """One Sutherland-Hodgman pass against an axis-aligned half-plane."""
    if not ring:
        return []
    out: list = []
    prev = ring[-1]
    prev_in = (prev[axis] >= bound) if keep_ge else (prev[axis] <= bound)
    for cur in ring:
        cur_in = (cur[axis] >= bound) if keep_ge else (cur[axis] <= bound)
        if cur_in != prev_in:
            t = (bound - prev[axis]) / (cur[axis] - prev[axis])
            if axis == 0:
                out.append((bound, prev[1] + t * (cur[1] - prev[1])))
            else:
                out.append((prev[0] + t * (cur[0] - prev[0]), bound))
        if cur_in:
            out.append(cur)
        prev = cur
        prev_in = cur_in
    return out


def clip_ring_to_rect(ring: np.ndarray, x0: float, x1: float, y0: float, y1: float) -> float:
    """Area of ring ∩ [x0,x1]x[y0,y1].

    Sutherland-Hodgman against the four half-planes; the clip window is
    convex so arbitrary (possibly concave) subject rings are fine: any
    degenerate connector edges lie on the window boundary and cancel in
    the shoelace sum.  Consecutive output vertices within SNAP_TOL are
    merged before the area is taken.
    """
    pts = [(float(x), float(y)) for x, y in ring]
    pts = _clip_halfplane(pts, 0, x0, keep_ge=True)
    pts = _clip_halfplane(pts, 0, x1, keep_ge=False)
    pts = _clip_halfplane(pts, 1, y0, keep_ge=True)
    pts = _clip_halfplane(pts, 1, y1, keep_ge=False)
    if len(pts) < 3:
        return 0.0
    snapped = [pts[0]]
    for p in pts[1:]:
        q = snapped[-1]
        if abs(p[0] - q[0]) > SNAP_TOL or abs(p[1] - q[1]) > SNAP_TOL:
            snapped.append(p)
    while len(snapped) > 1 and abs(snapped[0][0] - snapped[-1][0]) <= SNAP_TOL and abs(snapped[0][1] - snapped[-1][1]) <= SNAP_TOL:
        snapped.pop()
    if len(snapped) < 3:
        return 0.0
    area2 = 0.0
    for i in range(len(snapped)):
        xa, ya = snapped[i]
        xb, yb = snapped[(i + 1) % len(snapped)]
        area2 += xa * yb - xb * ya
    return 0.5 * abs(area2)


@dataclass
class FractionMap:
    """Sparse (zone ordinal, cell) -> S(r∩g)/S(r) map for one grid."""

    w: int
    h: int
    n_zones: int
    zone_idx: np.ndarray
    cell_idx: np.ndarray
    frac: np.ndarray

    def matrix(self):
        """scipy CSR of shape (n_zones, w*h)."""
        from scipy.sparse import coo_matrix

        return coo_matrix(
            (self.frac, (self.zone_idx, self.cell_idx)),
            shape=(self.n_zones, self.w * self.h),
        ).tocsr()

    def coverage(self) -> np.ndarray:
        """Per-zone fraction sums (1.0 for zones fully inside the grid)."""
        cov = np.zeros(self.n_zones)
        np.add.at(cov, self.zone_idx, self.frac)
        return cov

    def as_dict(self) -> dict[tuple[int, int], float]:
        return {
            (int(z), int(c)): float(f)
            for z, c, f in zip(self.zone_idx, self.cell_idx, self.frac)
        }


def intersection_fractions(zones: ZoneScheme, grid: GridScheme) -> FractionMap:
    """Area fractions of zone-cell intersections by exact planar clipping.

    For each zone r and cell g the entry is S(r∩g)/S(r); per-zone sums
    equal 1 (within float error) whenever the zone lies inside the grid
    bbox.  Mass outside the bbox is dropped with a warning.
    """
    zi: list[int] = []
    ci: list[int] = []
    fr: list[float] = []
    lon_edges = grid.lon_edges
    lat_edges = grid.lat_edges
    for ordinal, zone in enumerate(zones.zones):
        s_r = zone.area
        cell_areas: dict[int, float] = {}
        for part in zone.parts:
            bx0, bx1, by0, by1 = part.bounds()
            ix_lo = max(0, int(np.searchsorted(lon_edges, bx0, side="right")) - 1)
            ix_hi = min(grid.w - 1, max(0, int(np.searchsorted(lon_edges, bx1, side="left")) - 1))
            iy_lo = max(0, int(np.searchsorted(lat_edges, by0, side="right")) - 1)
            iy_hi = min(grid.h - 1, max(0, int(np.searchsorted(lat_edges, by1, side="left")) - 1))
            if bx1 < lon_edges[0] or bx0 > lon_edges[-1] or by1 < lat_edges[0] or by0 > lat_edges[-1]:
                continue
            for iy in range(iy_lo, iy_hi + 1):
                for ix in range(ix_lo, ix_hi + 1):
                    x0, x1 = float(lon_edges[ix]), float(lon_edges[ix + 1])
                    y0, y1 = float(lat_edges[iy]), float(lat_edges[iy + 1])
                    a = clip_ring_to_rect(part.outer, x0, x1, y0, y1)
                    if a == 0.0:
                        continue
                    for hole in part.holes:
                        a -= clip_ring_to_rect(hole, x0, x1, y0, y1)
                    if a > 0.0:
                        cell_areas[grid.cell_index(ix, iy)] = cell_areas.get(grid.cell_index(ix, iy), 0.0) + a
        covered = 0.0
        for cell, a in sorted(cell_areas.items()):
            zi.append(ordinal)
            ci.append(cell)
            fr.append(a / s_r)
            covered += a / s_r
        if covered < 1.0 - 1e-9:
            logger.warning(
                "zone %s: %.9f of its area lies outside the grid bbox and is dropped",
                zone.zone_id,
                1.0 - covered,
            )
    return FractionMap(
        w=grid.w,
        h=grid.h,
        n_zones=len(zones),
        zone_idx=np.asarray(zi, dtype=np.int64),
        cell_idx=np.asarray(ci, dtype=np.int64),
        frac=np.asarray(fr, dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# GeoJSON zone input

def load_zones_geojson(path: str | Path) -> ZoneScheme:
    """Read a FeatureCollection of Polygon/MultiPolygon features.

    Every feature must carry an integer "zone_id" property.
    """
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if obj.get("type") != "FeatureCollection":
        raise GeometryError("expected a GeoJSON FeatureCollection")
    zones: list[tuple[int, list]] = []
    for feature in obj.get("features", []):
        props = feature.get("properties") or {}
        if "zone_id" not in props:
            raise GeometryError("feature missing required integer property 'zone_id'")
        zone_id = props["zone_id"]
        if not isinstance(zone_id, int) or isinstance(zone_id, bool):
            raise GeometryError("property 'zone_id' must be an integer", zone_id)
        geom = feature.get("geometry") or {}
        gtype = geom.get("type")
        if gtype == "Polygon":
            polys = [geom["coordinates"]]
        elif gtype == "MultiPolygon":
            polys = geom["coordinates"]
        else:
            raise GeometryError(f"unsupported geometry type {gtype!r}", zone_id)
        parts = []
        for rings in polys:
            if not rings:
                raise GeometryError("polygon without rings", zone_id)
            parts.append((rings[0], list(rings[1:])))
        zones.append((zone_id, parts))
    return ZoneScheme(zones)


def zones_to_geojson(zones: ZoneScheme) -> dict:
    """Inverse of load_zones_geojson (rings re-closed)."""
    features = []
    for zone in zones.zones:
        polys = []
        for part in zone.parts:
            rings = [part.outer] + list(part.holes)
            polys.append([[list(map(float, v)) for v in np.vstack([r, r[:1]])] for r in rings])
        geom = (
            {"type": "Polygon", "coordinates": polys[0]}
            if len(polys) == 1
            else {"type": "MultiPolygon", "coordinates": polys}
        )
        features.append({"type": "Feature", "properties": {"zone_id": zone.zone_id}, "geometry": geom})
    return {"type": "FeatureCollection", "features": features}
