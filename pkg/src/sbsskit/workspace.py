"""Ingestion, projection, workspace persistence, annotations, and exports.

A workspace is a plain directory:

    workspace.json          metadata (schema_version, names, crs note)
    dataset.csv             projected planar coordinates plus variables
    guidance.json           cached guidance bundle with its parameters
    history/NNN.json        append-only parameter settings (+ result refs)
    results/NNN/            exported unmixing matrix, scores, diagnostics
    annotations/NNN.geojson stored verbatim, served back byte-identical

Writes are serialized behind a per-workspace file lock; reads operate on
immutable snapshots.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock

from .core import SbssResult
from .errors import DataError
from .model import (
    GEOMETRIC_TOLERANCE,
    ParameterSetting,
    SpatialDataset,
    SCHEMA_VERSION,
    setting_from_json,
    setting_to_json,
    validate_kernel,
    validate_regionalization,
)

EARTH_RADIUS_M = 6371000.0

#: Fixed significant digits so repeated exports are byte-identical and
#: doubles survive a round trip exactly.
FLOAT_FORMAT = "%.17g"


def fmt(value: float) -> str:
    return FLOAT_FORMAT % float(value)


def project_lonlat(lon: np.ndarray, lat: np.ndarray) -> tuple[np.ndarray, str]:
    """Local equirectangular projection about the dataset centroid.

    x = R * dlon * cos(lat0), y = R * dlat, angles in radians. Metric
    distances are preserved near the centroid, which is what kernels and
    variograms consume.
    """
    lon = np.asarray(lon, dtype=np.float64)
    lat = np.asarray(lat, dtype=np.float64)
    lon0 = float(lon.mean())
    lat0 = float(lat.mean())
    x = EARTH_RADIUS_M * np.radians(lon - lon0) * math.cos(math.radians(lat0))
    y = EARTH_RADIUS_M * np.radians(lat - lat0)
    note = f"equirectangular about lon={lon0:.6f}, lat={lat0:.6f} (R={EARTH_RADIUS_M:g} m)"
    return np.column_stack([x, y]), note


def _parse_float(raw: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        return None
    if not math.isfinite(value):
        return None
    return value


def ingest_csv(
    path, x_column: str, y_column: str, coordinate_kind: str = "planar"
) -> SpatialDataset:
    """Read a CSV point table into a dataset, projecting lon/lat if asked.

    All non-coordinate columns become variables and must be numeric; rows
    with missing or unparseable values are rejected with a row listing, as
    are duplicate coordinates.
    """
    if coordinate_kind not in ("planar", "lonlat"):
        raise DataError(
            f"coordinate_kind must be planar or lonlat, got {coordinate_kind!r}",
            field="coordinate_kind",
        )
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}", code="unreadable_file") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not UTF-8 text", code="unparseable_file") from exc
    return ingest_csv_text(text, x_column, y_column, coordinate_kind)


def ingest_csv_text(
    text: str, x_column: str, y_column: str, coordinate_kind: str = "planar"
) -> SpatialDataset:
    try:
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
    except csv.Error as exc:
        raise DataError(f"CSV parse failure: {exc}", code="unparseable_file") from exc
    if not rows:
        raise DataError("CSV file is empty", code="unparseable_file")
    header = [h.strip() for h in rows[0]]
    for col in (x_column, y_column):
        if col not in header:
            raise DataError(
                f"missing column {col!r}", code="missing_column", field=col
            )
    if x_column == y_column:
        raise DataError("x and y columns must differ", field="y_column")
    xi = header.index(x_column)
    yi = header.index(y_column)
    var_cols = [i for i in range(len(header)) if i not in (xi, yi)]
    if not var_cols:
        raise DataError("no variable columns besides the coordinates", code="no_variables")

    data_rows = [r for r in rows[1:] if any(cell.strip() for cell in r)]
    if len(data_rows) < 2:
        raise DataError("need at least 2 data rows", code="too_few_rows")

    xs, ys = [], []
    values = []
    bad_rows = []
    for r, row in enumerate(data_rows, start=1):
        if len(row) != len(header):
            bad_rows.append(r)
            continue
        x = _parse_float(row[xi])
        y = _parse_float(row[yi])
        vals = [_parse_float(row[i]) for i in var_cols]
        if x is None or y is None or any(v is None for v in vals):
            bad_rows.append(r)
            continue
        xs.append(x)
        ys.append(y)
        values.append(vals)
    if bad_rows:
        shown = ", ".join(str(r) for r in bad_rows[:10])
        raise DataError(
            f"rows with missing or non-numeric values: {shown}"
            + (" ..." if len(bad_rows) > 10 else ""),
            code="missing_values",
        )

    if coordinate_kind == "lonlat":
        coords, note = project_lonlat(np.asarray(xs), np.asarray(ys))
    else:
        coords = np.column_stack([np.asarray(xs), np.asarray(ys)])
        note = "planar meters (as ingested)"

    names = [header[i] for i in var_cols]
    try:
        return SpatialDataset(coords, np.asarray(values), names, crs_note=note)
    except DataError as exc:
        if exc.code == "duplicate_locations":
            raise DataError(
                "duplicate coordinates: " + str(exc), code="duplicate_locations"
            ) from exc
        raise


@dataclass
class HistoryEntry:
    entry_id: str
    setting: ParameterSetting
    result_id: str | None
    raw: dict


class Workspace:
    """Directory-backed workspace with an append-only setting history."""

    def __init__(self, root: Path, dataset: SpatialDataset):
        self.root = Path(root)
        self.dataset = dataset
        self._lock = FileLock(str(self.root / ".lock"))

    # -- creation / opening -------------------------------------------------

    @classmethod
    def create(cls, root, dataset: SpatialDataset, *, force: bool = False) -> "Workspace":
        root = Path(root)
        if root.exists() and any(root.iterdir()) and not force:
            raise DataError(
                f"workspace directory {root} already exists (use force to overwrite)",
                code="workspace_exists",
            )
        root.mkdir(parents=True, exist_ok=True)
        (root / "history").mkdir(exist_ok=True)
        (root / "annotations").mkdir(exist_ok=True)
        (root / "results").mkdir(exist_ok=True)
        write_dataset_csv(root / "dataset.csv", dataset)
        meta = {
            "schema_version": SCHEMA_VERSION,
            "n": dataset.n,
            "p": dataset.p,
            "variable_names": list(dataset.variable_names),
            "crs_note": dataset.crs_note,
        }
        _write_json(root / "workspace.json", meta)
        return cls(root, dataset)

    @classmethod
    def open(cls, root) -> "Workspace":
        root = Path(root)
        meta_path = root / "workspace.json"
        if not meta_path.exists():
            raise DataError(f"{root} is not a workspace", code="unknown_workspace")
        meta = json.loads(meta_path.read_text())
        dataset = read_dataset_csv(root / "dataset.csv", meta["variable_names"])
        dataset.crs_note = meta.get("crs_note", dataset.crs_note)
        return cls(root, dataset)

    # -- history ------------------------------------------------------------

    def _next_id(self, directory: Path, suffix: str) -> str:
        taken = [p.stem for p in directory.glob(f"*{suffix}")]
        number = 1 + max((int(s) for s in taken if s.isdigit()), default=0)
        return f"{number:03d}"

    def save_setting(self, setting: ParameterSetting, *, result_id: str | None = None) -> str:
        """Append a setting to the history; returns the entry id."""
        self.validate_setting(setting)
        with self._lock:
            entry_id = self._next_id(self.root / "history", ".json")
            doc = {
                "schema_version": SCHEMA_VERSION,
                "setting": setting_to_json(setting),
            }
            if result_id is not None:
                doc["result_id"] = result_id
            _write_json(self.root / "history" / f"{entry_id}.json", doc)
        return entry_id

    def load_setting(self, entry_id: str) -> ParameterSetting:
        return self.history_entry(entry_id).setting

    def history_entry(self, entry_id: str) -> HistoryEntry:
        path = self.root / "history" / f"{entry_id}.json"
        if not path.exists():
            raise DataError(f"no history entry {entry_id}", code="unknown_entry")
        doc = json.loads(path.read_text())
        setting = setting_from_json(doc.get("setting", {}))
        self.validate_setting(setting)
        return HistoryEntry(
            entry_id=entry_id,
            setting=setting,
            result_id=doc.get("result_id"),
            raw=doc,
        )

    def history(self) -> list[HistoryEntry]:
        directory = self.root / "history"
        entries = sorted(p.stem for p in directory.glob("*.json"))
        return [self.history_entry(e) for e in entries]

    def validate_setting(self, setting: ParameterSetting) -> None:
        report = validate_kernel(setting.kernel)
        if not report.ok:
            raise DataError(
                "invalid kernel: " + "; ".join(report.violations),
                code="invalid_setting",
                field="kernel",
            )
        report = validate_regionalization(setting.regionalization, self.dataset)
        if not report.ok:
            raise DataError(
                "invalid regionalization: " + "; ".join(report.violations[:5]),
                code="invalid_setting",
                field="regionalization",
            )

    # -- annotations ----------------------------------------------------------

    def store_annotation(self, payload: bytes) -> str:
        """Validate and store a GeoJSON feature collection verbatim."""
        validate_feature_collection(payload)
        with self._lock:
            annotation_id = self._next_id(self.root / "annotations", ".geojson")
            (self.root / "annotations" / f"{annotation_id}.geojson").write_bytes(payload)
        return annotation_id

    def annotation_ids(self) -> list[str]:
        return sorted(p.stem for p in (self.root / "annotations").glob("*.geojson"))

    def annotation_bytes(self, annotation_id: str) -> bytes:
        path = self.root / "annotations" / f"{annotation_id}.geojson"
        if not path.exists():
            raise DataError(f"no annotation {annotation_id}", code="unknown_annotation")
        return path.read_bytes()

    def annotation_boundaries(self, annotation_id: str) -> list[list[list[float]]]:
        """Feature boundary coordinate arrays, for UI snapping."""
        doc = json.loads(self.annotation_bytes(annotation_id))
        boundaries: list[list[list[float]]] = []
        for feature in doc.get("features", []):
            geom = feature.get("geometry") or {}
            boundaries.extend(_geometry_paths(geom))
        return boundaries

    # -- guidance cache -------------------------------------------------------

    def store_guidance(self, params_json: dict, bundle_json: dict) -> None:
        with self._lock:
            _write_json(
                self.root / "guidance.json",
                {"schema_version": SCHEMA_VERSION, "params": params_json, "bundle": bundle_json},
            )

    def load_guidance(self) -> tuple[dict, dict] | None:
        path = self.root / "guidance.json"
        if not path.exists():
            return None
        doc = json.loads(path.read_text())
        return doc.get("params", {}), doc.get("bundle", {})

    # -- results ----------------------------------------------------------------

    def store_result(self, result: SbssResult, setting: ParameterSetting) -> str:
        with self._lock:
            result_id = self._next_id(self.root / "results", "")
            out_dir = self.root / "results" / result_id
            export_result(result, out_dir, self.dataset)
        self.save_setting(setting, result_id=result_id)
        return result_id

    def result_dir(self, result_id: str) -> Path:
        path = self.root / "results" / result_id
        if not path.is_dir():
            raise DataError(f"no result {result_id}", code="unknown_result")
        return path


def _geometry_paths(geometry: dict) -> list[list[list[float]]]:
    gtype = geometry.get("type")
    coords = geometry.get("coordinates")
    if gtype == "Polygon":
        return [list(ring) for ring in coords]
    if gtype == "MultiPolygon":
        return [list(ring) for poly in coords for ring in poly]
    if gtype == "LineString":
        return [list(coords)]
    if gtype == "MultiLineString":
        return [list(line) for line in coords]
    if gtype == "Point":
        return [[list(coords)]]
    if gtype == "MultiPoint":
        return [[list(c) for c in coords]]
    return []


_GEOJSON_GEOMETRY_TYPES = {
    "Point",
    "MultiPoint",
    "LineString",
    "MultiLineString",
    "Polygon",
    "MultiPolygon",
    "GeometryCollection",
}


def validate_feature_collection(payload: bytes) -> dict:
    """Structural GeoJSON validation; names the first offending feature."""
    try:
        doc = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"invalid GeoJSON: {exc}", code="invalid_geojson") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise DataError(
            "annotation must be a GeoJSON FeatureCollection", code="invalid_geojson"
        )
    features = doc.get("features")
    if not isinstance(features, list):
        raise DataError("FeatureCollection needs a features list", code="invalid_geojson")
    for i, feature in enumerate(features):
        if not isinstance(feature, dict) or feature.get("type") != "Feature":
            raise DataError(
                f"feature {i} is not a GeoJSON Feature", code="invalid_geojson",
                field=f"features[{i}]",
            )
        geometry = feature.get("geometry")
        if geometry is None:
            continue
        if (
            not isinstance(geometry, dict)
            or geometry.get("type") not in _GEOJSON_GEOMETRY_TYPES
            or (
                geometry.get("type") != "GeometryCollection"
                and not isinstance(geometry.get("coordinates"), list)
            )
        ):
            raise DataError(
                f"feature {i} has a malformed geometry",
                code="invalid_geojson",
                field=f"features[{i}].geometry",
            )
    return doc


def write_dataset_csv(path: Path, dataset: SpatialDataset) -> None:
    lines = [",".join(["x", "y", *map(_csv_quote, dataset.variable_names)])]
    for i in range(dataset.n):
        cells = [fmt(dataset.locations[i, 0]), fmt(dataset.locations[i, 1])]
        cells.extend(fmt(v) for v in dataset.values[i])
        lines.append(",".join(cells))
    Path(path).write_text("\r\n".join(lines) + "\r\n", encoding="utf-8")


def read_dataset_csv(path: Path, variable_names: list[str]) -> SpatialDataset:
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0]
    coords = []
    values = []
    for row in rows[1:]:
        if not row:
            continue
        coords.append((float(row[0]), float(row[1])))
        values.append([float(v) for v in row[2:]])
    names = variable_names if variable_names else header[2:]
    return SpatialDataset(np.asarray(coords), np.asarray(values), names)


def _csv_quote(cell: str) -> str:
    if any(c in cell for c in ",\"\r\n"):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def _write_json(path: Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def export_result(result: SbssResult, out_dir, dataset: SpatialDataset) -> dict[str, Path]:
    """Write W.csv, scores.csv, diagnostics.json with deterministic bytes."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = result.unmixing.shape[0]

    w_path = out_dir / "W.csv"
    lines = [",".join(_csv_quote(n) for n in dataset.variable_names)]
    for row in result.unmixing:
        lines.append(",".join(fmt(v) for v in row))
    w_path.write_text("\r\n".join(lines) + "\r\n", encoding="utf-8")

    scores_path = out_dir / "scores.csv"
    header = ["x", "y"] + [f"comp_{j + 1}" for j in range(p)]
    lines = [",".join(header)]
    for i in range(dataset.n):
        cells = [fmt(dataset.locations[i, 0]), fmt(dataset.locations[i, 1])]
        cells.extend(fmt(v) for v in result.latent_scores[i])
        lines.append(",".join(cells))
    scores_path.write_text("\r\n".join(lines) + "\r\n", encoding="utf-8")

    diagnostics_path = out_dir / "diagnostics.json"
    doc = {
        "schema_version": SCHEMA_VERSION,
        "component_order": result.component_order,
        "pseudo_eigenvalues": [[float(v) for v in row] for row in result.pseudo_eigenvalues],
        "matrix_labels": result.matrix_labels,
        "mean": [float(v) for v in result.mean],
        "unmixing": [[float(v) for v in row] for row in result.unmixing],
        **result.diagnostics,
    }
    _write_json(diagnostics_path, doc)
    return {"W": w_path, "scores": scores_path, "diagnostics": diagnostics_path}
