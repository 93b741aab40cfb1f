"""HTTP API over workspaces, guidance, geometry edits, metrics, and runs.

Configuration comes from environment variables:

    SBSSKIT_WORKSPACE_ROOT   directory holding one subdirectory per workspace
    SBSSKIT_UI_ORIGIN        allowed CORS origin (default: any)
    SBSSKIT_BIND             host:port used by the ``sbsskit serve`` command

Every error response body carries ``status``, ``code``, ``message`` and an
optional ``field`` pointer.
"""

from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse, Response

from .errors import DataError, EstimationError, GeometryError, SbssError
from .core import run_sbss
from .geometry import merge_regions, split_region
from .guidance import (
    GuidanceParams,
    compute_guidance,
    distance_density,
    setting_metrics,
    variable_grid_summary,
    variograms,
)
from .model import (
    ParameterSetting,
    Regionalization,
    setting_from_json,
    setting_to_json,
)
from .workspace import Workspace, ingest_csv_text

_NOT_FOUND_CODES = {
    "unknown_workspace",
    "unknown_entry",
    "unknown_annotation",
    "unknown_result",
    "no_guidance",
}

RESULT_FILES = ("W.csv", "scores.csv", "diagnostics.json")


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, field: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.field = field

    def body(self) -> dict:
        return {
            "status": self.status,
            "code": self.code,
            "message": str(self),
            "field": self.field,
        }


def _wrap(exc: SbssError, default_status: int) -> ApiError:
    status = 404 if exc.code in _NOT_FOUND_CODES else default_status
    return ApiError(status, exc.code, str(exc), exc.field)


def create_app(workspace_root=None, ui_origin: str | None = None) -> FastAPI:
    root = Path(
        workspace_root
        or os.environ.get("SBSSKIT_WORKSPACE_ROOT", "./sbsskit-workspaces")
    )
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="sbsskit service")

    origin = ui_origin or os.environ.get("SBSSKIT_UI_ORIGIN", "*")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=[origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    workspaces: dict[str, Workspace] = {}
    registry_lock = threading.Lock()
    guidance_locks: dict[str, threading.Lock] = {}

    def get_workspace(workspace_id: str) -> Workspace:
        with registry_lock:
            ws = workspaces.get(workspace_id)
            if ws is None:
                path = root / workspace_id
                if not (path / "workspace.json").exists():
                    raise ApiError(404, "unknown_workspace", f"no workspace {workspace_id}")
                ws = Workspace.open(path)
                workspaces[workspace_id] = ws
            return ws

    def guidance_lock(workspace_id: str) -> threading.Lock:
        with registry_lock:
            return guidance_locks.setdefault(workspace_id, threading.Lock())

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse(exc.body(), status_code=exc.status)

    @app.exception_handler(SbssError)
    async def handle_sbss_error(request: Request, exc: SbssError):
        wrapped = _wrap(exc, 422)
        return JSONResponse(wrapped.body(), status_code=wrapped.status)

    @app.exception_handler(RequestValidationError)
    async def handle_validation_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        field = ".".join(str(loc) for loc in first.get("loc", []) if loc != "body")
        return JSONResponse(
            {
                "status": 422,
                "code": "invalid_params",
                "message": first.get("msg", "invalid request"),
                "field": field or None,
            },
            status_code=422,
        )

    # -- workspaces ---------------------------------------------------------

    @app.post("/workspaces", status_code=201)
    async def create_workspace(
        file: UploadFile = File(...),
        x_column: str = Form(...),
        y_column: str = Form(...),
        coordinate_kind: str = Form("planar"),
    ):
        payload = await file.read()
        try:
            text = payload.decode("utf-8")
        except UnicodeDecodeError:
            raise ApiError(400, "unparseable_file", "upload is not UTF-8 text") from None
        try:
            dataset = ingest_csv_text(text, x_column, y_column, coordinate_kind)
            workspace_id = uuid.uuid4().hex[:12]
            ws = Workspace.create(root / workspace_id, dataset)
        except DataError as exc:
            raise _wrap(exc, 400) from exc
        with registry_lock:
            workspaces[workspace_id] = ws
        return {"id": workspace_id}

    @app.get("/workspaces")
    def list_workspaces():
        ids = sorted(
            p.name for p in root.iterdir() if (p / "workspace.json").exists()
        )
        return {"workspaces": ids}

    @app.get("/workspaces/{workspace_id}")
    def workspace_summary(workspace_id: str):
        ws = get_workspace(workspace_id)
        return {
            "id": workspace_id,
            "n": ws.dataset.n,
            "p": ws.dataset.p,
            "variable_names": list(ws.dataset.variable_names),
            "crs_note": ws.dataset.crs_note,
            "bounding_box": list(ws.dataset.bounding_box()),
        }

    # -- guidance -----------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/guidance")
    async def post_guidance(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        try:
            params = GuidanceParams.from_json(body or {})
            params.validate(ws.dataset.n)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        params_json = params.to_json()
        with guidance_lock(workspace_id):
            cached = ws.load_guidance()
            if cached is not None and cached[0] == params_json:
                return cached[1]
            try:
                bundle = compute_guidance(ws.dataset, params)
            except (DataError, GeometryError) as exc:
                raise _wrap(exc, 422) from exc
            bundle_json = bundle.to_json()
            ws.store_guidance(params_json, bundle_json)
            return bundle_json

    @app.get("/workspaces/{workspace_id}/guidance")
    def get_guidance(workspace_id: str):
        ws = get_workspace(workspace_id)
        cached = ws.load_guidance()
        if cached is None:
            raise ApiError(404, "no_guidance", "guidance has not been computed yet")
        return cached[1]

    # -- geometry edits -------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/regions/split")
    async def post_split(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        setting = _parse_setting(body)
        region_id = body.get("region_id")
        if not region_id:
            raise ApiError(422, "invalid_params", "region_id is required", "region_id")
        cut = _parse_line(body.get("cut"))
        try:
            region = setting.regionalization.by_id(str(region_id))
            part_a, part_b = split_region(region, cut)
        except (GeometryError, DataError) as exc:
            raise _wrap(exc, 422) from exc
        regions = []
        for r in setting.regionalization.regions:
            if r.id == region.id:
                regions.extend([part_a, part_b])
            else:
                regions.append(r)
        updated = ParameterSetting(
            regionalization=Regionalization(regions),
            kernel=setting.kernel,
            label=setting.label,
            created_at=setting.created_at,
            extra=setting.extra,
        )
        return {"setting": setting_to_json(updated)}

    @app.post("/workspaces/{workspace_id}/regions/merge")
    async def post_merge(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        setting = _parse_setting(body)
        ids = body.get("region_ids")
        if not isinstance(ids, list) or len(ids) != 2:
            raise ApiError(422, "invalid_params", "region_ids must list two ids", "region_ids")
        try:
            region_a = setting.regionalization.by_id(str(ids[0]))
            region_b = setting.regionalization.by_id(str(ids[1]))
            merged = merge_regions(region_a, region_b)
        except (GeometryError, DataError) as exc:
            raise _wrap(exc, 422) from exc
        regions = []
        for r in setting.regionalization.regions:
            if r.id == region_a.id:
                regions.append(merged)
            elif r.id == region_b.id:
                continue
            else:
                regions.append(r)
        updated = ParameterSetting(
            regionalization=Regionalization(regions),
            kernel=setting.kernel,
            label=setting.label,
            created_at=setting.created_at,
            extra=setting.extra,
        )
        return {"setting": setting_to_json(updated)}

    # -- metrics and runs ------------------------------------------------------

    @app.post("/workspaces/{workspace_id}/metrics")
    async def post_metrics(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        setting = _parse_setting(body)
        threshold = body.get("threshold", 0.05)
        include_experimental = bool(body.get("include_experimental", False))
        try:
            ws.validate_setting(setting)
            return setting_metrics(
                ws.dataset,
                setting,
                threshold=float(threshold),
                include_experimental=include_experimental,
            )
        except (DataError, GeometryError, EstimationError) as exc:
            raise _wrap(exc, 422) from exc

    @app.post("/workspaces/{workspace_id}/sbss")
    async def post_sbss(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        setting = _parse_setting(body)
        try:
            ws.validate_setting(setting)
            result = run_sbss(ws.dataset, setting)
            result_id = ws.store_result(result, setting)
        except (DataError, GeometryError, EstimationError) as exc:
            raise _wrap(exc, 422) from exc
        base = f"/workspaces/{workspace_id}/results/{result_id}"
        return {
            "result_id": result_id,
            "unmixing": [[float(v) for v in row] for row in result.unmixing],
            "component_order": result.component_order,
            "diagnostics": result.diagnostics,
            "urls": {name: f"{base}/{name}" for name in RESULT_FILES},
        }

    @app.get("/workspaces/{workspace_id}/results/{result_id}/{filename}")
    def get_result_file(workspace_id: str, result_id: str, filename: str):
        ws = get_workspace(workspace_id)
        if filename not in RESULT_FILES:
            raise ApiError(404, "unknown_result", f"no result file {filename}")
        try:
            directory = ws.result_dir(result_id)
        except DataError as exc:
            raise _wrap(exc, 404) from exc
        media = "text/csv" if filename.endswith(".csv") else "application/json"
        return FileResponse(directory / filename, media_type=media)

    # -- read-only views ---------------------------------------------------------

    @app.get("/workspaces/{workspace_id}/locations")
    def get_locations(workspace_id: str):
        ws = get_workspace(workspace_id)
        return {
            "locations": [[float(x), float(y)] for x, y in ws.dataset.locations]
        }

    @app.get("/workspaces/{workspace_id}/distance-density")
    def get_distance_density(workspace_id: str, bins: int = 40):
        ws = get_workspace(workspace_id)
        try:
            edges, counts = distance_density(ws.dataset, bins)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}

    @app.get("/workspaces/{workspace_id}/variograms")
    def get_variograms(
        workspace_id: str,
        bins: int = 15,
        max_lag: float | None = None,
        semivariance: bool = True,
    ):
        ws = get_workspace(workspace_id)
        try:
            vset = variograms(ws.dataset, bins, max_lag, semivariance=semivariance)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        return vset.to_json()

    @app.get("/workspaces/{workspace_id}/variable-grid")
    def get_variable_grid(workspace_id: str, variable: str, grid_side: int = 4):
        ws = get_workspace(workspace_id)
        try:
            cells = variable_grid_summary(ws.dataset, variable, grid_side)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        return {"variable": variable, "cells": [c.to_json() for c in cells]}

    # -- history and annotations -----------------------------------------------

    @app.get("/workspaces/{workspace_id}/history")
    def get_history(workspace_id: str):
        ws = get_workspace(workspace_id)
        entries = []
        for entry in ws.history():
            entries.append(
                {
                    "id": entry.entry_id,
                    "label": entry.setting.label,
                    "created_at": entry.setting.created_at.isoformat(),
                    "result_id": entry.result_id,
                }
            )
        return {"entries": entries}

    @app.get("/workspaces/{workspace_id}/history/{entry_id}")
    def get_history_entry(workspace_id: str, entry_id: str):
        ws = get_workspace(workspace_id)
        try:
            entry = ws.history_entry(entry_id)
        except DataError as exc:
            raise _wrap(exc, 404) from exc
        return entry.raw

    @app.post("/workspaces/{workspace_id}/history", status_code=201)
    async def post_history(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        body = await _json_body(request)
        setting = _parse_setting(body)
        try:
            entry_id = ws.save_setting(setting)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        return {"id": entry_id}

    @app.post("/workspaces/{workspace_id}/annotations", status_code=201)
    async def post_annotation(workspace_id: str, request: Request):
        ws = get_workspace(workspace_id)
        payload = await request.body()
        try:
            annotation_id = ws.store_annotation(payload)
        except DataError as exc:
            raise _wrap(exc, 422) from exc
        return {"id": annotation_id}

    @app.get("/workspaces/{workspace_id}/annotations")
    def list_annotations(workspace_id: str):
        ws = get_workspace(workspace_id)
        return {"annotations": ws.annotation_ids()}

    @app.get("/workspaces/{workspace_id}/annotations/{annotation_id}")
    def get_annotation(workspace_id: str, annotation_id: str):
        ws = get_workspace(workspace_id)
        try:
            payload = ws.annotation_bytes(annotation_id)
        except DataError as exc:
            raise _wrap(exc, 404) from exc
        return Response(content=payload, media_type="application/geo+json")

    @app.get("/workspaces/{workspace_id}/annotations/{annotation_id}/boundaries")
    def get_annotation_boundaries(workspace_id: str, annotation_id: str):
        ws = get_workspace(workspace_id)
        try:
            return {"boundaries": ws.annotation_boundaries(annotation_id)}
        except DataError as exc:
            raise _wrap(exc, 404) from exc

    return app


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ApiError(422, "invalid_params", "request body must be JSON") from None
    if not isinstance(body, dict):
        raise ApiError(422, "invalid_params", "request body must be a JSON object")
    return body


def _parse_setting(body: dict) -> ParameterSetting:
    doc = body.get("setting")
    if doc is None:
        raise ApiError(422, "invalid_params", "setting is required", "setting")
    try:
        return setting_from_json(doc)
    except DataError as exc:
        raise _wrap(exc, 422) from exc


def _parse_line(doc) -> np.ndarray:
    if isinstance(doc, dict):
        if doc.get("type") != "LineString":
            raise ApiError(422, "invalid_params", "cut must be a GeoJSON LineString", "cut")
        doc = doc.get("coordinates")
    if not isinstance(doc, list) or len(doc) < 2:
        raise ApiError(422, "invalid_params", "cut needs at least two vertices", "cut")
    try:
        return np.asarray(doc, dtype=np.float64)
    except (TypeError, ValueError):
        raise ApiError(422, "invalid_params", "cut coordinates must be numbers", "cut") from None

