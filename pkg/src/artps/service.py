"""Local HTTP service for the operator console.

Frames are uploaded once (content-addressed ids, persisted to the frame
store directory), then runs execute synchronously with caller-supplied
configs. Reports omit timings so identical requests produce identical
bodies; cached results back the overlay/component image endpoints.

Per-frame runs are serialized with non-blocking locks: a second concurrent
run request for the same frame gets 409 instead of queueing.
"""

import hashlib
import io
import json
import os
import tempfile
import threading

import numpy as np

from artps import __version__
from artps.config import ConfigError, PipelineConfig, config_from_dict, default_config_dict
from artps.curiosity import N_FEATURES, CuriosityModel
from artps.depth import load_depth
from artps.pipeline import (
    PipelineResult,
    overlay_annotations,
    render_overlay,
    run_pipeline,
)
from artps.raster import Raster, read_png

MAX_UPLOAD_BYTES = 32 * 1024 * 1024


def _png_bytes(raster: Raster) -> bytes:
    from PIL import Image

    a = np.clip(raster.data.astype(np.float64), 0.0, 1.0)
    q = np.round(a * 255.0).astype(np.uint8)
    mode = "L" if raster.channels == 1 else "RGB"
    buf = io.BytesIO()
    Image.fromarray(q, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


class FrameStore:
    """Content-addressed on-disk frame storage (survives restarts)."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)

    def image_path(self, frame_id: str) -> str:
        return os.path.join(self.root, f"{frame_id}_image.png")

    def depth_path(self, frame_id: str) -> str:
        return os.path.join(self.root, f"{frame_id}_depth.ard1")

    def put(self, image_bytes: bytes, depth_bytes: bytes | None) -> str:
        digest = hashlib.sha256(image_bytes)
        if depth_bytes is not None:
            digest.update(depth_bytes)
        frame_id = digest.hexdigest()[:16]
        with open(self.image_path(frame_id), "wb") as fh:
            fh.write(image_bytes)
        if depth_bytes is not None:
            with open(self.depth_path(frame_id), "wb") as fh:
                fh.write(depth_bytes)
        return frame_id

    def has(self, frame_id: str) -> bool:
        return os.path.exists(self.image_path(frame_id))

    def load(self, frame_id: str):
        image = read_png(self.image_path(frame_id))
        depth = None
        dp = self.depth_path(frame_id)
        if os.path.exists(dp):
            h, w = image.data.shape[:2]
            depth = load_depth(dp, expected_dims=(w, h))
        return image, depth


def create_app(
    cfg: PipelineConfig | None = None,
    frame_dir: str | None = None,
    max_upload_bytes: int = MAX_UPLOAD_BYTES,
):
    from fastapi import FastAPI, File, UploadFile
    from fastapi.middleware.cors import CORSMiddleware
    from fastapi.responses import JSONResponse, Response

    if frame_dir is None:
        frame_dir = os.path.join(tempfile.gettempdir(), "artps_frames")
    store = FrameStore(frame_dir)
    default_doc = cfg.raw if cfg is not None else default_config_dict()

    app = FastAPI(title="artps service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origin_regex=r"http://(localhost|127\.0\.0\.1)(:\d+)?",
        allow_methods=["*"],
        allow_headers=["*"],
    )

    results: dict[str, PipelineResult] = {}
    results_guard = threading.Lock()
    frame_locks: dict[str, threading.Lock] = {}
    frame_locks_guard = threading.Lock()

    def _frame_lock(frame_id: str) -> threading.Lock:
        with frame_locks_guard:
            if frame_id not in frame_locks:
                frame_locks[frame_id] = threading.Lock()
            return frame_locks[frame_id]

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/api/config")
    def get_config():
        from artps.config import CONFIG_SCHEMA

        return {"default": default_doc, "schema": CONFIG_SCHEMA}

    @app.post("/api/frames", status_code=201)
    def upload_frame(image: UploadFile = File(...), depth: UploadFile | None = File(None)):
        image_bytes = image.file.read(max_upload_bytes + 1)
        if len(image_bytes) > max_upload_bytes:
            return JSONResponse({"detail": "image exceeds upload limit"}, status_code=413)
        depth_bytes = None
        if depth is not None:
            depth_bytes = depth.file.read(max_upload_bytes + 1)
            if len(depth_bytes) > max_upload_bytes:
                return JSONResponse({"detail": "depth exceeds upload limit"}, status_code=413)
        # validate before persisting anything
        try:
            import tempfile as _tf

            with _tf.NamedTemporaryFile(suffix=".png") as tf:
                tf.write(image_bytes)
                tf.flush()
                img = read_png(tf.name)
            if depth_bytes is not None:
                with _tf.NamedTemporaryFile(suffix=".ard1") as tf:
                    tf.write(depth_bytes)
                    tf.flush()
                    h, w = img.data.shape[:2]
                    load_depth(tf.name, expected_dims=(w, h))
        except (ValueError, OSError) as exc:
            return JSONResponse({"detail": f"invalid frame upload: {exc}"}, status_code=400)
        frame_id = store.put(image_bytes, depth_bytes)
        return {"frame_id": frame_id}

    @app.get("/api/frames/{frame_id}/image.png")
    def frame_image(frame_id: str):
        if not store.has(frame_id):
            return JSONResponse({"detail": "unknown frame"}, status_code=404)
        with open(store.image_path(frame_id), "rb") as fh:
            return Response(fh.read(), media_type="image/png")

    @app.post("/api/run")
    def run(payload: dict):
        frame_id = payload.get("frame_id")
        if not isinstance(frame_id, str) or not store.has(frame_id):
            return JSONResponse({"detail": "unknown frame"}, status_code=404)
        config_doc = payload.get("config", {})
        if not isinstance(config_doc, dict):
            return JSONResponse({"detail": "config must be an object"}, status_code=422)
        try:
            run_cfg = config_from_dict(config_doc if config_doc else default_doc)
        except ConfigError as exc:
            return JSONResponse({"detail": str(exc)}, status_code=422)
        model_doc = payload.get("model")
        model = None
        if model_doc is not None:
            if not isinstance(model_doc, dict):
                return JSONResponse({"detail": "model must be an object"}, status_code=422)
            try:
                alpha = model_doc.get("alpha")
                if not isinstance(alpha, (list, tuple)) or len(alpha) != N_FEATURES:
                    raise ValueError(f"model.alpha must be a list of {N_FEATURES} weights")
                model = CuriosityModel(
                    alpha=tuple(float(a) for a in alpha),
                    lam=float(model_doc.get("lambda", 0.0)),
                )
            except (TypeError, ValueError) as exc:
                return JSONResponse({"detail": f"invalid model: {exc}"}, status_code=422)

        lock = _frame_lock(frame_id)
        if not lock.acquire(blocking=False):
            return JSONResponse(
                {"detail": "a run is already in flight for this frame"}, status_code=409
            )
        try:
            image, depth = store.load(frame_id)
            try:
                result = run_pipeline(
                    image,
                    depth,
                    run_cfg,
                    model=model,
                    frame_id=frame_id,
                    include_timings=False,
                )
            except ValueError as exc:
                return JSONResponse({"detail": str(exc)}, status_code=422)
            digest_src = frame_id + result.report["config_hash"]
            if model is not None:
                digest_src += json.dumps(
                    {"alpha": list(model.alpha), "lambda": model.lam}, sort_keys=True
                )
            run_id = hashlib.sha256(digest_src.encode()).hexdigest()[:16]
            with results_guard:
                results[run_id] = result
            return {"run_id": run_id, "report": result.report}
        finally:
            lock.release()

    def _get_result(run_id: str) -> PipelineResult | None:
        with results_guard:
            return results.get(run_id)

    @app.get("/api/run/{run_id}/overlay.png")
    def overlay(run_id: str):
        result = _get_result(run_id)
        if result is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        img = render_overlay(result)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        return Response(buf.getvalue(), media_type="image/png")

    @app.get("/api/run/{run_id}/annotations")
    def annotations(run_id: str):
        result = _get_result(run_id)
        if result is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        return overlay_annotations(result)

    @app.get("/api/run/{run_id}/fused.png")
    def fused(run_id: str):
        result = _get_result(run_id)
        if result is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        return Response(_png_bytes(result.fused), media_type="image/png")

    @app.get("/api/run/{run_id}/component/{name}.png")
    def component(run_id: str, name: str):
        result = _get_result(run_id)
        if result is None:
            return JSONResponse({"detail": "unknown run"}, status_code=404)
        comp = result.component(name)
        if comp is None:
            return JSONResponse({"detail": f"unknown component {name!r}"}, status_code=404)
        return Response(_png_bytes(comp.map), media_type="image/png")

    return app


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def dump_report(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_json_default) + "\n"
