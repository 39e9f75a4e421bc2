"""Read-only JSON service over sealed run directories.

All endpoints serve deterministic payloads: sealed stores never change,
caches only memoize reads, and responses are serialized with a fixed
key order, so identical requests return byte-identical bodies.
Selection resolution lives here rather than in the client so scripted
consumers and the UI share one semantics.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response
from fastapi.staticfiles import StaticFiles

from .config import SHAPES
from .dotplot import CANONICAL_SCALES, SCALE_DIMS, child_cells
from .metrics import VsupScale, diagnostics_from_csv, temporal_cells
from .partition import BBox, build_grid, _normalize_ring, _point_in_ring
from .spatial import scatter_from_csv
from .store import RunStore, StoreError, combo_key, list_runs, project_hierarchy

VIEWS = ("map", "scatter", "attribution")
TOOLS = ("point", "rect", "lasso")
METRICS = ("prmse", "u", "corr")


class SelectionError(ValueError):
    """Malformed selection payload."""


# ---------------------------------------------------------------------------
# store access with memoization


class ServiceState:
    """Sealed stores under one output directory, plus read caches."""

    def __init__(self, out_dir: str | Path, run_id: str | None = None):
        self.out_dir = Path(out_dir)
        self.default_run = run_id
        self._cache: dict = {}
        self.refresh()

    @classmethod
    def for_store(cls, store: RunStore) -> "ServiceState":
        state = cls.__new__(cls)
        state.out_dir = store.root.parent
        state.default_run = store.run_id
        state._cache = {}
        state.stores = {store.run_id: store}
        return state

    def refresh(self) -> None:
        self.stores = {s.run_id: s for s in list_runs(self.out_dir)}
        if self.default_run is not None and self.default_run not in self.stores:
            raise ValueError(f"run {self.default_run!r} not found under {self.out_dir}")

    def run_summaries(self) -> list[dict]:
        out = []
        for run_id in sorted(self.stores):
            store = self.stores[run_id]
            cfg = store.config_json
            out.append(
                {
                    "run_id": run_id,
                    "sealed": store.sealed,
                    "combos": store.combos(),
                    "shapes": store.shapes(),
                    "scales": store.scales(),
                    "days": cfg.get("days"),
                    "train_days": cfg.get("train_days"),
                    "test_days": cfg.get("test_days"),
                    "seed": cfg.get("seed"),
                }
            )
        return out

    def store(self, run: str | None) -> RunStore:
        run = run or self.default_run
        if run is None:
            sealed = [s for s in self.stores.values() if s.sealed]
            if len(sealed) == 1:
                return sealed[0]
            raise HTTPException(
                status_code=400,
                detail=f"{len(sealed)} sealed runs available; pass ?run=<id>",
            )
        if run not in self.stores:
            raise HTTPException(status_code=404, detail=f"unknown run {run!r}")
        store = self.stores[run]
        if not store.sealed:
            raise HTTPException(status_code=409, detail=f"run {run!r} is not sealed")
        return store

    def _get(self, store: RunStore, key: tuple, load):
        full = (store.run_id,) + key
        if full not in self._cache:
            self._cache[full] = load()
        return self._cache[full]

    def diagnostics(self, store: RunStore, shape: str, scale: str):
        rel = f"{combo_key(shape, scale)}/diagnostics.csv"
        return self._get(store, ("diag", shape, scale), lambda: diagnostics_from_csv(store.read_text(rel)))

    def scatter(self, store: RunStore, shape: str, scale: str):
        rel = f"{combo_key(shape, scale)}/scatter.csv"
        return self._get(store, ("scatter", shape, scale), lambda: scatter_from_csv(store.read_text(rel)))

    def sidecar(self, store: RunStore, shape: str, scale: str, name: str):
        rel = f"{combo_key(shape, scale)}/{name}.json"
        return self._get(store, ("json", shape, scale, name), lambda: store.read_json(rel))

    def tensors(self, store: RunStore, shape: str, scale: str):
        def load():
            obs = store.read_combo_tensor(shape, scale, "observed_test")
            pred = store.read_combo_tensor(shape, scale, "predicted_test")
            return obs, pred

        return self._get(store, ("tensors", shape, scale), load)

    def hierarchy(self, store: RunStore, shape: str):
        rel = f"hierarchy_{shape}.json"
        return self._get(store, ("hier", shape), lambda: store.read_json(rel))

    def bbox(self, store: RunStore) -> BBox:
        return self._get(store, ("bbox",), lambda: BBox.from_json(store.config_json["bbox"]))


def _require_combo(store: RunStore, shape: str, scale: str) -> None:
    if shape not in SHAPES:
        raise HTTPException(status_code=400, detail=f"unknown shape {shape!r}")
    if scale not in CANONICAL_SCALES:
        raise HTTPException(status_code=400, detail=f"unknown scale {scale!r}")
    if not store.has_combo(shape, scale):
        raise HTTPException(status_code=404, detail=f"combination {combo_key(shape, scale)} not in run {store.run_id}")


def _json_response(payload) -> Response:
    body = json.dumps(payload, separators=(",", ":"), allow_nan=False)
    return Response(content=body, media_type="application/json")


# ---------------------------------------------------------------------------
# selection resolution

_LADDER = list(CANONICAL_SCALES)


def _scale_step(scale: str) -> int:
    return _LADDER.index(scale)


def expand_down(ids: list[int], from_scale: str, to_scale: str) -> list[int]:
    """Dyadic children, applied per ladder step; pure index arithmetic."""
    level = _scale_step(from_scale)
    target = _scale_step(to_scale)
    current = list(ids)
    while level < target:
        w, h = SCALE_DIMS[_LADDER[level]]
        current = [c for idx in current for c in child_cells(idx, w, h)]
        level += 1
    return sorted(set(current))


def expand_up(ids: list[int], from_scale: str, to_scale: str) -> list[int]:
    """Parents on the coarser grid; a parent is selected if any child is."""
    level = _scale_step(from_scale)
    target = _scale_step(to_scale)
    current = set(ids)
    while level > target:
        w_f, _ = SCALE_DIMS[_LADDER[level]]
        w_c = w_f // 2
        current = {(idx // w_f // 2) * w_c + (idx % w_f) // 2 for idx in current}
        level -= 1
    return sorted(current)


def resolve_ladder(ids: list[int], origin_scale: str, scales: list[str]) -> dict[str, list[int]]:
    out = {}
    o = _scale_step(origin_scale)
    for scale in scales:
        t = _scale_step(scale)
        if t == o:
            out[scale] = sorted(set(ids))
        elif t > o:
            out[scale] = expand_down(ids, origin_scale, scale)
        else:
            out[scale] = expand_up(ids, origin_scale, scale)
    return out


def _num(geometry: dict, key: str) -> float:
    v = geometry.get(key)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise SelectionError(f"geometry field {key!r} must be a finite number")
    return float(v)


def _rect(geometry: dict) -> tuple[float, float, float, float]:
    x0, x1 = sorted((_num(geometry, "x0"), _num(geometry, "x1")))
    y0, y1 = sorted((_num(geometry, "y0"), _num(geometry, "y1")))
    return x0, x1, y0, y1


def _lasso_ring(geometry: dict):
    pts = geometry.get("points")
    if not isinstance(pts, list) or len(pts) < 3:
        raise SelectionError("lasso needs a 'points' list of at least 3 vertices")
    for p in pts:
        if (
            not isinstance(p, (list, tuple))
            or len(p) != 2
            or not all(isinstance(c, (int, float)) and not isinstance(c, bool) and math.isfinite(c) for c in p)
        ):
            raise SelectionError("lasso points must be [x, y] number pairs")
    try:
        return _normalize_ring([(float(x), float(y)) for x, y in pts])
    except ValueError as e:
        raise SelectionError(str(e)) from e


def _pick_from_points(tool: str, geometry: dict, points: list[tuple[int, float, float]]) -> list[int]:
    """points: (id, x, y).  point -> nearest id; rect/lasso -> containment."""
    if tool == "point":
        x, y = _num(geometry, "x"), _num(geometry, "y")
        best = None
        for pid, px, py in points:
            d = (px - x) ** 2 + (py - y) ** 2
            if best is None or d < best[0] or (d == best[0] and pid < best[1]):
                best = (d, pid)
        return [] if best is None else [best[1]]
    if tool == "rect":
        x0, x1, y0, y1 = _rect(geometry)
        return [pid for pid, px, py in points if x0 <= px <= x1 and y0 <= py <= y1]
    ring = _lasso_ring(geometry)
    return [pid for pid, px, py in points if _point_in_ring(ring, px, py)]


def _resolve_map(tool: str, geometry: dict, bbox: BBox, scale: str) -> list[int]:
    w, h = SCALE_DIMS[scale]
    grid = build_grid(bbox, w, h)
    if tool == "point":
        idx = grid.assign(_num(geometry, "x"), _num(geometry, "y"))
        return [] if idx is None else [idx]
    centers = [(idx, *grid.cell_center(idx)) for idx in range(w * h)]
    return _pick_from_points(tool, geometry, centers)


def resolve_selection(sel: dict, store: RunStore, state: ServiceState | None = None) -> dict:
    """Region ids hit by a selection, expanded across the scale ladder.

    Geometry lives in the origin view's coordinate space (map: lon/lat,
    scatter: z planes, attribution: plot-local x/y).  Containment tests
    run against each region's representative point (cell center, scatter
    position, or dot center); the point tool instead takes the containing
    cell on the map and the nearest point elsewhere.  Expansion is pure
    index arithmetic on the dyadic ladder, so target scales need not be
    built in the run.
    """
    if state is None:
        state = ServiceState.for_store(store)
    if not isinstance(sel, dict):
        raise SelectionError("selection must be a JSON object")
    view = sel.get("view")
    tool = sel.get("tool")
    shape = sel.get("shape")
    scale = sel.get("scale")
    if view not in VIEWS:
        raise SelectionError(f"view must be one of {VIEWS}")
    if tool not in TOOLS:
        raise SelectionError(f"tool must be one of {TOOLS}")
    if shape not in SHAPES:
        raise SelectionError(f"shape must be one of {SHAPES}")
    if scale not in CANONICAL_SCALES:
        raise SelectionError(f"scale must be one of {CANONICAL_SCALES}")
    geometry = sel.get("geometry")
    if not isinstance(geometry, dict):
        raise SelectionError("geometry must be a JSON object")
    expand = sel.get("expand", list(CANONICAL_SCALES))
    if not isinstance(expand, list) or any(s not in CANONICAL_SCALES for s in expand):
        raise SelectionError(f"expand must list scales from {CANONICAL_SCALES}")

    origin_scale = scale
    if view == "map":
        ids = _resolve_map(tool, geometry, state.bbox(store), scale)
    elif view == "scatter":
        pts = state.scatter(store, shape, scale)
        ids = _pick_from_points(tool, geometry, [(p.region, p.z_value, p.z_lag) for p in pts])
    else:
        plot_ref = sel.get("plot")
        if not isinstance(plot_ref, dict):
            raise SelectionError("attribution selection needs a 'plot' {scale, subset_index}")
        p_scale = plot_ref.get("scale")
        p_subset = plot_ref.get("subset_index")
        if p_scale not in CANONICAL_SCALES or not isinstance(p_subset, int):
            raise SelectionError("plot reference needs a valid scale and integer subset_index")
        stored = state.hierarchy(store, shape)
        matches = [
            p for p in stored["plots"] if p["scale"] == p_scale and p["subset_index"] == p_subset
        ]
        if not matches:
            raise SelectionError(f"no plot {p_subset} at scale {p_scale}")
        dots = matches[0]["dots"]
        ids = _pick_from_points(tool, geometry, [(d["region_id"], d["x"], d["y"]) for d in dots])
        origin_scale = p_scale

    return {
        "view": view,
        "tool": tool,
        "shape": shape,
        "scale": origin_scale,
        "resolved": resolve_ladder(ids, origin_scale, expand),
    }


# ---------------------------------------------------------------------------
# application


def create_app(out_dir: str | Path, run_id: str | None = None, static_dir: str | Path | None = None) -> FastAPI:
    state = ServiceState(out_dir, run_id=run_id)
    app = FastAPI(title="maupscope", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.service = state

    @app.get("/api/runs")
    def api_runs():
        state.refresh()
        return _json_response(state.run_summaries())

    @app.get("/api/map")
    def api_map(shape: str, scale: str, run: str | None = None):
        store = state.store(run)
        _require_combo(store, shape, scale)
        diags = state.diagnostics(store, shape, scale)
        edges = state.sidecar(store, shape, scale, "vsup")
        vscale = VsupScale(value_max=edges["value_max"], error_max=edges["error_max"])
        w, h = SCALE_DIMS[scale]
        cells = []
        for d in diags:
            cell = vscale.assign(d.mean_volume, d.mean_abs_error)
            cells.append(
                {
                    "region_id": d.region,
                    "vsup": {"level": cell.error_level, "bin": cell.value_bin},
                    "mean_volume": d.mean_volume,
                    "mean_abs_error": d.mean_abs_error,
                }
            )
        return _json_response(
            {
                "run_id": store.run_id,
                "shape": shape,
                "scale": scale,
                "w": w,
                "h": h,
                "bbox": state.bbox(store).to_json(),
                "vsup": edges,
                "cells": cells,
            }
        )

    @app.get("/api/scatter")
    def api_scatter(shape: str, scale: str, run: str | None = None):
        store = state.store(run)
        _require_combo(store, shape, scale)
        points = state.scatter(store, shape, scale)
        return _json_response(
            {
                "run_id": store.run_id,
                "shape": shape,
                "scale": scale,
                "moran": state.sidecar(store, shape, scale, "assoc"),
                "points": [p.to_json() for p in points],
            }
        )

    @app.get("/api/attribution")
    def api_attribution(shape: str, scale: str, metric: str = "prmse", run: str | None = None):
        store = state.store(run)
        _require_combo(store, shape, scale)
        if metric not in METRICS:
            raise HTTPException(status_code=400, detail=f"unknown metric {metric!r}")
        stored = state.hierarchy(store, shape)
        try:
            projected = project_hierarchy(stored, metric, up_to_scale=scale)
        except ValueError as e:
            raise HTTPException(status_code=404, detail=str(e)) from e
        return _json_response({"run_id": store.run_id, **projected})

    @app.get("/api/temporal")
    def api_temporal(shape: str, scale: str, region: int, run: str | None = None):
        store = state.store(run)
        _require_combo(store, shape, scale)
        w, h = SCALE_DIMS[scale]
        if not (0 <= region < w * h):
            raise HTTPException(status_code=404, detail=f"region {region} out of range for {scale}")
        obs, pred = state.tensors(store, shape, scale)
        test_days = obs.n_slots // 48
        edges = state.sidecar(store, shape, scale, "vsup")
        vscale = VsupScale(value_max=edges["value_max"], error_max=edges["error_max"])
        matrix = temporal_cells(obs, pred, region, test_days, scale=vscale)
        x = obs.values[:, region]
        y = pred.values[:, region]
        rows = []
        for day, row in enumerate(matrix):
            out_row = []
            for s, cell in enumerate(row):
                t = day * 48 + s
                out_row.append(
                    {
                        "level": cell.error_level,
                        "bin": cell.value_bin,
                        "volume": float(x[t]),
                        "error": float(abs(y[t] - x[t])),
                    }
                )
            rows.append(out_row)
        return _json_response(
            {
                "run_id": store.run_id,
                "shape": shape,
                "scale": scale,
                "region_id": region,
                "days": test_days,
                "slots": 48,
                "vsup": edges,
                "cells": rows,
            }
        )

    @app.get("/api/meta")
    def api_meta(shape: str, scale: str, run: str | None = None):
        store = state.store(run)
        _require_combo(store, shape, scale)
        cfg = store.config_json
        w, h = SCALE_DIMS[scale]
        train_days = cfg.get("train_days")
        days = cfg.get("days")
        slot_range = None
        if train_days is not None and days is not None:
            slot_range = {"t_first": train_days * 48, "t_last": days * 48 - 1}
        return _json_response(
            {
                "run_id": store.run_id,
                "shape": shape,
                "scale": scale,
                "w": w,
                "h": h,
                "bbox": cfg.get("bbox"),
                "test_slot_range": slot_range,
                "config": cfg,
                "cleaning": store.read_json("cleaning.json"),
                "discards": state.sidecar(store, shape, scale, "discards"),
                "global": state.sidecar(store, shape, scale, "global"),
                "vsup": state.sidecar(store, shape, scale, "vsup"),
            }
        )

    @app.post("/api/selection/resolve")
    def api_resolve(sel: dict):
        run = sel.get("run") if isinstance(sel, dict) else None
        store = state.store(run)
        try:
            return _json_response(resolve_selection(sel, store, state=state))
        except SelectionError as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except StoreError as e:
            # scatter/attribution read run artifacts; absent combo -> 404
            raise HTTPException(status_code=404, detail=str(e)) from e

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():
            return _json_response(
                {
                    "service": "maupscope",
                    "endpoints": [
                        "/api/runs",
                        "/api/map",
                        "/api/scatter",
                        "/api/attribution",
                        "/api/temporal",
                        "/api/meta",
                        "/api/selection/resolve",
                    ],
                }
            )

    return app


def serve(out_dir: str | Path, port: int = 8000, host: str = "127.0.0.1",
          run_id: str | None = None, static_dir: str | Path | None = None) -> None:
    import uvicorn

    app = create_app(out_dir, run_id=run_id, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
