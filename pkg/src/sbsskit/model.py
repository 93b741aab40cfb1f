"""Domain types for spatial datasets and parameter settings.

A parameter setting pairs a regionalization (disjoint polygons covering all
measurement locations) with a ring-kernel configuration. The types here are
immutable after construction; validity checks are reported through
:class:`ValidationReport` rather than raised, so partially-invalid inputs can
be inspected and shown to a user.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import Polygon

from ._validation import check_coords, check_values
from .errors import DataError, GeometryError

#: Two coordinates are considered equal when within this distance (meters).
#: Point-in-polygon boundary tests use the same epsilon.
GEOMETRIC_TOLERANCE = 1e-9

SCHEMA_VERSION = 1


class SpatialDataset:
    """Immutable analysis subject: n planar locations with a n x p value matrix.

    Parameters
    ----------
    locations : array-like, shape (n, 2)
        Planar coordinates in meters (project geographic input first).
    values : array-like, shape (n, p)
        Measured variables, complete (no missing entries).
    variable_names : sequence of str, optional
        Defaults to ``var_1 .. var_p``.
    crs_note : str
        Free-text note on the original coordinate system.
    """

    def __init__(self, locations, values, variable_names=None, crs_note: str = "planar meters"):
        locations = check_coords(locations, min_locations=2)
        values = check_values(values, n_locations=locations.shape[0])
        if variable_names is None:
            variable_names = tuple(f"var_{i + 1}" for i in range(values.shape[1]))
        else:
            variable_names = tuple(str(v) for v in variable_names)
        if len(variable_names) != values.shape[1]:
            raise DataError(
                f"{len(variable_names)} variable names for {values.shape[1]} variables",
                field="variable_names",
            )
        dup = cKDTree(locations).query_pairs(r=GEOMETRIC_TOLERANCE)
        if dup:
            pairs = sorted(dup)[:5]
            raise DataError(
                f"duplicate coordinates at location index pairs {pairs}"
                + (" (truncated)" if len(dup) > 5 else ""),
                code="duplicate_locations",
                field="locations",
            )
        locations.setflags(write=False)
        values.setflags(write=False)
        self.locations = locations
        self.values = values
        self.variable_names = variable_names
        self.crs_note = str(crs_note)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the locations."""
        mn = self.locations.min(axis=0)
        mx = self.locations.max(axis=0)
        return (float(mn[0]), float(mn[1]), float(mx[0]), float(mx[1]))

    def __repr__(self) -> str:  # pragma: no cover
        return f"SpatialDataset(n={self.n}, p={self.p})"


@dataclass(frozen=True)
class KernelRing:
    """Annulus (inner, outer) in meters selecting location pairs by distance."""

    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "inner", float(self.inner))
        object.__setattr__(self, "outer", float(self.outer))

    def contains_distance(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=np.float64)
        return (d >= self.inner) & (d <= self.outer)


@dataclass(frozen=True)
class KernelConfig:
    """Ordered collection of pairwise non-overlapping rings."""

    rings: tuple[KernelRing, ...]

    def __init__(self, rings: Iterable[KernelRing | Sequence[float]]):
        normalized = tuple(
            r if isinstance(r, KernelRing) else KernelRing(*r) for r in rings
        )
        object.__setattr__(self, "rings", normalized)

    def __len__(self) -> int:
        return len(self.rings)


@dataclass(frozen=True)
class Region:
    """Simple polygon without holes, stored counterclockwise, plus an id.

    ``vertices`` excludes the closing vertex; a closed input ring is accepted
    and unclosed automatically.
    """

    vertices: np.ndarray
    id: str

    def __init__(self, vertices, id: str):
        arr = np.asarray(vertices, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise GeometryError(f"polygon vertices must have shape (m, 2), got {arr.shape}")
        if arr.shape[0] >= 2 and np.allclose(arr[0], arr[-1], atol=GEOMETRIC_TOLERANCE, rtol=0.0):
            arr = arr[:-1]
        if arr.shape[0] < 3:
            raise GeometryError("polygon needs at least 3 distinct vertices")
        if not np.all(np.isfinite(arr)):
            raise GeometryError("polygon vertices contain non-finite values")
        if _signed_area(arr) < 0.0:
            arr = arr[::-1].copy()
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", arr)
        object.__setattr__(self, "id", str(id))

    @cached_property
    def polygon(self) -> Polygon:
        return Polygon(self.vertices)

    def area(self) -> float:
        return abs(_signed_area(self.vertices))

    def violations(self) -> list[str]:
        """Invariant violations: zero area, self-intersection, holes are
        excluded by construction."""
        problems = []
        if self.area() <= GEOMETRIC_TOLERANCE**2:
            problems.append(f"region {self.id}: polygon area is not positive")
        if not self.polygon.is_simple or not self.polygon.is_valid:
            problems.append(f"region {self.id}: polygon is self-intersecting")
        return problems


def _signed_area(vertices: np.ndarray) -> float:
    """Shoelace signed area; positive for counterclockwise rings."""
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Regionalization:
    """Sequence of regions partitioning the spatial domain."""

    regions: tuple[Region, ...]

    def __init__(self, regions: Iterable[Region]):
        regions = tuple(regions)
        ids = [r.id for r in regions]
        if len(set(ids)) != len(ids):
            raise GeometryError("region ids must be unique")
        object.__setattr__(self, "regions", regions)

    def __len__(self) -> int:
        return len(self.regions)

    def region_ids(self) -> list[str]:
        return [r.id for r in self.regions]

    def by_id(self, region_id: str) -> Region:
        for r in self.regions:
            if r.id == region_id:
                return r
        raise GeometryError(f"no region with id {region_id!r}", code="unknown_region")


@dataclass(frozen=True)
class ParameterSetting:
    """A regionalization plus a kernel configuration, ready to be run.

    ``extra`` holds unknown top-level fields from a loaded document so they
    survive a save/load round trip.
    """

    regionalization: Regionalization
    kernel: KernelConfig
    label: str = ""
    created_at: _dt.datetime = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc))
    extra: dict = field(default_factory=dict)


@dataclass
class ValidationReport:
    """Outcome of a validity check; never raised, always returned."""

    ok: bool
    violations: list[str] = field(default_factory=list)
    unassigned: list[int] = field(default_factory=list)
    multiply_assigned: list[int] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "violations": list(self.violations),
            "unassigned": list(self.unassigned),
            "multiply_assigned": list(self.multiply_assigned),
        }


def validate_kernel(config: KernelConfig) -> ValidationReport:
    """Check ring validity and pairwise non-overlap.

    The ok/violation status does not depend on ring order; violation messages
    reference the original ring indices.
    """
    violations = []
    rings = config.rings
    if len(rings) == 0:
        violations.append("kernel must contain at least one ring")
    for i, ring in enumerate(rings):
        if ring.inner < 0.0:
            violations.append(f"ring {i}: inner radius must be non-negative")
        if not ring.inner < ring.outer:
            violations.append(f"ring {i}: inner < outer required")
    for a in range(len(rings)):
        for b in range(a + 1, len(rings)):
            # open-interval overlap: touching radii (outer == next inner) are fine
            if max(rings[a].inner, rings[b].inner) < min(rings[a].outer, rings[b].outer):
                violations.append(f"rings {a} and {b} overlap")
    return ValidationReport(ok=not violations, violations=violations)


def _locations_of(dataset_or_coords) -> np.ndarray:
    if isinstance(dataset_or_coords, SpatialDataset):
        return dataset_or_coords.locations
    return check_coords(dataset_or_coords)


def _containment_matrices(regionalization: Regionalization, coords: np.ndarray):
    """Closed-polygon and strict-interior containment, regions x points.

    Closed containment uses the geometric tolerance on boundary tests; strict
    interior additionally requires the point to be farther than the tolerance
    from the boundary.
    """
    points = shapely.points(coords)
    n_regions = len(regionalization.regions)
    closed = np.zeros((n_regions, len(points)), dtype=bool)
    interior = np.zeros_like(closed)
    for k, region in enumerate(regionalization.regions):
        poly = region.polygon
        shapely.prepare(poly)
        closed[k] = shapely.dwithin(poly, points, GEOMETRIC_TOLERANCE)
        near_boundary = shapely.dwithin(poly.boundary, points, GEOMETRIC_TOLERANCE)
        interior[k] = closed[k] & ~near_boundary
    return closed, interior


def validate_regionalization(
    regionalization: Regionalization, dataset
) -> ValidationReport:
    """Check that every location falls in exactly one region.

    Locations on shared boundaries are fine (resolved by the tie rule in
    :func:`assign_locations`); locations strictly inside two regions indicate
    overlap and are reported as multiply assigned. ``dataset`` may also be a
    raw (n, 2) coordinate array.
    """
    violations = []
    for region in regionalization.regions:
        violations.extend(region.violations())
    closed, interior = _containment_matrices(regionalization, _locations_of(dataset))
    unassigned = np.flatnonzero(closed.sum(axis=0) == 0)
    multiple = np.flatnonzero(interior.sum(axis=0) > 1)
    for i in unassigned:
        violations.append(f"location {i} is not covered by any region")
    for i in multiple:
        violations.append(f"location {i} lies inside more than one region")
    return ValidationReport(
        ok=not violations,
        violations=violations,
        unassigned=[int(i) for i in unassigned],
        multiply_assigned=[int(i) for i in multiple],
    )


def assign_locations(regionalization: Regionalization, dataset) -> list[str]:
    """Map every location to the id of the region containing it.

    Boundary ties go to the lexicographically smallest region id among the
    closed polygons containing the point, which makes the assignment
    deterministic and independent of region order. ``dataset`` may also be a
    raw (n, 2) coordinate array.
    """
    coords = _locations_of(dataset)
    closed, interior = _containment_matrices(regionalization, coords)
    if np.any(closed.sum(axis=0) == 0) or np.any(interior.sum(axis=0) > 1):
        report = validate_regionalization(regionalization, coords)
        raise GeometryError(
            "regionalization invalid: " + "; ".join(report.violations[:3]),
            code="invalid_regionalization",
        )
    ids = np.array(regionalization.region_ids(), dtype=object)
    assigned = []
    for j in range(coords.shape[0]):
        candidates = ids[closed[:, j]]
        assigned.append(min(candidates))
    return assigned


def locations_by_region(regionalization: Regionalization, dataset) -> dict[str, np.ndarray]:
    """Region id -> sorted array of member location indices (possibly empty)."""
    assigned = assign_locations(regionalization, dataset)
    out: dict[str, np.ndarray] = {
        rid: [] for rid in regionalization.region_ids()
    }
    for i, rid in enumerate(assigned):
        out[rid].append(i)
    return {rid: np.asarray(idx, dtype=np.intp) for rid, idx in out.items()}


# ---------------------------------------------------------------------------
# JSON interchange (on-disk and wire format for parameter settings)


def region_to_geojson(region: Region) -> dict:
    ring = np.vstack([region.vertices, region.vertices[:1]])
    return {
        "type": "Feature",
        "properties": {"id": region.id},
        "geometry": {
            "type": "Polygon",
            "coordinates": [[[float(x), float(y)] for x, y in ring]],
        },
    }


def regionalization_to_geojson(regionalization: Regionalization) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [region_to_geojson(r) for r in regionalization.regions],
    }


def setting_to_json(setting: ParameterSetting) -> dict:
    doc = dict(setting.extra)
    doc.update(
        {
            "schema_version": SCHEMA_VERSION,
            "label": setting.label,
            "created_at": setting.created_at.isoformat(),
            "regionalization": regionalization_to_geojson(setting.regionalization),
            "kernel": [
                {"inner": ring.inner, "outer": ring.outer} for ring in setting.kernel.rings
            ],
        }
    )
    return doc


def _region_from_feature(feature: dict, index: int) -> Region:
    pointer = f"regionalization.features[{index}]"
    geometry = feature.get("geometry")
    if not isinstance(geometry, dict) or geometry.get("type") != "Polygon":
        raise DataError(
            "region geometry must be a GeoJSON Polygon",
            code="invalid_setting",
            field=pointer + ".geometry",
        )
    coordinates = geometry.get("coordinates")
    if not coordinates or not isinstance(coordinates, list):
        raise DataError(
            "polygon has no coordinates", code="invalid_setting", field=pointer + ".geometry"
        )
    if len(coordinates) > 1:
        raise DataError(
            "polygons with holes are not supported",
            code="invalid_setting",
            field=pointer + ".geometry",
        )
    region_id = (feature.get("properties") or {}).get("id")
    if region_id is None:
        raise DataError(
            "region feature is missing the id property",
            code="invalid_setting",
            field=pointer + ".properties.id",
        )
    try:
        return Region(np.asarray(coordinates[0], dtype=np.float64), str(region_id))
    except (GeometryError, ValueError) as exc:
        raise DataError(str(exc), code="invalid_setting", field=pointer + ".geometry") from exc


def setting_from_json(doc: dict) -> ParameterSetting:
    """Parse and validate a setting document; unknown fields are kept."""
    if not isinstance(doc, dict):
        raise DataError("setting document must be a JSON object", code="invalid_setting")
    known = {"schema_version", "label", "created_at", "regionalization", "kernel"}
    extra = {k: v for k, v in doc.items() if k not in known}

    fc = doc.get("regionalization")
    if not isinstance(fc, dict) or fc.get("type") != "FeatureCollection":
        raise DataError(
            "regionalization must be a GeoJSON FeatureCollection",
            code="invalid_setting",
            field="regionalization",
        )
    features = fc.get("features")
    if not isinstance(features, list) or not features:
        raise DataError(
            "regionalization needs at least one region feature",
            code="invalid_setting",
            field="regionalization.features",
        )
    regions = [_region_from_feature(f, i) for i, f in enumerate(features)]
    try:
        regionalization = Regionalization(regions)
    except GeometryError as exc:
        raise DataError(str(exc), code="invalid_setting", field="regionalization") from exc

    rings_doc = doc.get("kernel")
    if not isinstance(rings_doc, list):
        raise DataError("kernel must be a list of rings", code="invalid_setting", field="kernel")
    rings = []
    for i, ring in enumerate(rings_doc):
        if not isinstance(ring, dict) or "inner" not in ring or "outer" not in ring:
            raise DataError(
                "each kernel ring needs inner and outer radii",
                code="invalid_setting",
                field=f"kernel[{i}]",
            )
        try:
            rings.append(KernelRing(float(ring["inner"]), float(ring["outer"])))
        except (TypeError, ValueError):
            raise DataError(
                "ring radii must be numbers", code="invalid_setting", field=f"kernel[{i}]"
            ) from None
    kernel = KernelConfig(rings)
    report = validate_kernel(kernel)
    if not report.ok:
        raise DataError(
            "invalid kernel: " + "; ".join(report.violations),
            code="invalid_setting",
            field="kernel",
        )

    created_raw = doc.get("created_at")
    if created_raw is None:
        created_at = _dt.datetime.now(_dt.timezone.utc)
    else:
        try:
            created_at = _dt.datetime.fromisoformat(str(created_raw))
        except ValueError:
            raise DataError(
                "created_at must be an ISO-8601 timestamp",
                code="invalid_setting",
                field="created_at",
            ) from None

    return ParameterSetting(
        regionalization=regionalization,
        kernel=kernel,
        label=str(doc.get("label", "")),
        created_at=created_at,
        extra=extra,
    )
