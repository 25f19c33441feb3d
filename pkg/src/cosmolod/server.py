"""HTTP streaming server over a built dataset.

Plain request/response: metadata and index files verbatim, block records
verbatim (CRC included), server-side cut resolution, and selection-set
registration with per-block membership bitmasks. The dataset is opened
read-only; the selection-token table is the only mutable state.
"""

from __future__ import annotations

import math
import secrets
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel, Field

from .dataset import Dataset
from .engine import (
    SELECTION_CAP,
    Camera,
    Cut,
    make_selection,
    select_cut,
    selection_flags,
)

MAX_LIVE_TOKENS = 16
_SSE_INF_JSON = 1e300  # JSON has no Infinity; camera-inside-box sse maps to this


class CameraModel(BaseModel):
    position: list[float] = Field(min_length=3, max_length=3)
    look_at: list[float] = Field(min_length=3, max_length=3)
    up: list[float] = Field(default=[0.0, 1.0, 0.0], min_length=3, max_length=3)
    fov_y: float = 60.0
    width: int = 1024
    height: int = 768
    near: float = 0.01


class ResolveRequest(BaseModel):
    interval: int
    camera: CameraModel
    tau: float = 2.0
    budget: int = 200_000


class SelectionRequest(BaseModel):
    ids: list[int]


class SelectionStore:
    """Concurrent token -> sorted id set map, capacity-bounded with LRU eviction."""

    def __init__(self, capacity: int = MAX_LIVE_TOKENS):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._sets: OrderedDict[str, np.ndarray] = OrderedDict()

    def register(self, ids) -> str:
        selection = make_selection(ids)
        with self._lock:
            while True:
                token = secrets.token_hex(8)
                if token not in self._sets:
                    break
            self._sets[token] = selection
            while len(self._sets) > self.capacity:
                self._sets.popitem(last=False)
            return token

    def get(self, token: str) -> np.ndarray | None:
        with self._lock:
            selection = self._sets.get(token)
            if selection is not None:
                self._sets.move_to_end(token)
            return selection


def cut_to_json(cut: Cut, index) -> dict:
    """Wire form of a cut; shared by the endpoint and equivalence oracles."""
    entries = []
    for e in cut.entries:
        sse = e.sse if math.isfinite(e.sse) else _SSE_INF_JSON
        entries.append(
            {
                "path": e.path,
                "count": e.count,
                "sse": sse,
                "bytes": index.by_path[e.path].byte_length,
            }
        )
    return {
        "cut": entries,
        "total_points": cut.total_points,
        "budget_exceeded": cut.budget_exceeded,
    }


def create_app(dataset_dir, frontend_dir=None) -> FastAPI:
    ds = Dataset(dataset_dir)
    store = SelectionStore()
    app = FastAPI(title="cosmolod", docs_url=None, redoc_url=None)
    app.state.dataset = ds

    def interval_index(s: int):
        if not 0 <= s < ds.n_intervals:
            raise HTTPException(404, f"no interval {s}")
        return ds.index(s)

    @app.get("/api/meta")
    def get_meta():
        return JSONResponse(ds.meta)

    @app.get("/api/index/{s}")
    def get_index(s: int):
        interval_index(s)
        return FileResponse(ds.dir / f"index_{s}.bin", media_type="application/octet-stream")

    @app.get("/api/block/{s}/{path}")
    def get_block(s: int, path: int):
        index = interval_index(s)
        if path not in index.by_path:
            raise HTTPException(404, f"no block {path} in interval {s}")
        return Response(ds.block_bytes(s, path), media_type="application/octet-stream")

    @app.post("/api/resolve")
    def post_resolve(req: ResolveRequest):
        index = interval_index(req.interval)
        try:
            cam = Camera.from_dict(req.camera.model_dump())
            if req.tau <= 0:
                raise ValueError("tau must be positive")
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        cut = select_cut(index, req.interval, ds.root_box, cam, req.tau, req.budget)
        return JSONResponse(cut_to_json(cut, index))

    @app.post("/api/selection")
    def post_selection(req: SelectionRequest):
        if len(req.ids) > SELECTION_CAP:
            raise HTTPException(413, f"selection exceeds the cap of {SELECTION_CAP} ids")
        return {"token": store.register(req.ids)}

    @app.get("/api/selection/{token}/{s}/{path}")
    def get_selection_flags(token: str, s: int, path: int):
        selection = store.get(token)
        if selection is None:
            raise HTTPException(404, "unknown selection token")
        index = interval_index(s)
        if path not in index.by_path:
            raise HTTPException(404, f"no block {path} in interval {s}")
        block = ds.block(s, path)
        return Response(selection_flags(block.ids, selection), media_type="application/octet-stream")

    if frontend_dir is not None and Path(frontend_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")
    return app


def serve(dataset_dir, host: str = "127.0.0.1", port: int = 8000, frontend_dir=None):
    """Run the server until interrupted."""
    import uvicorn

    app = create_app(dataset_dir, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
