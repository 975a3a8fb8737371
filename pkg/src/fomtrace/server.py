"""HTTP service exposing segmentation sessions to the browser UI.

A thin adapter over the pipeline: every state change maps 1:1 to a
pipeline operation. Step runs as a background job polled via /jobs/{id};
one mutating operation per session at a time (409 otherwise), reads are
always allowed.
"""

from __future__ import annotations

import io
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import metrics, pipeline
from .errors import FomtraceError, NothingToAccept
from .imgcore import LabelMap, SeedPixels, disk_offsets, load_label, load_sequence, to_rgb
from .fom import render_model_png


class StrokeModel(BaseModel):
    label: int
    points: list[list[float]]  # [[x, y], ...]
    radius: float = 2.0


class ScribblesModel(BaseModel):
    t: int
    strokes: list[StrokeModel]
    elapsed_s: float = 0.0


class CreateSessionModel(BaseModel):
    frames_dir: str
    init_mask: str
    config: dict | None = None
    gt_dir: str | None = None


class SessionHandle:
    def __init__(self, state, frames_dir, gt_dir=None):
        self.state = state
        self.frames_dir = Path(frames_dir)
        self.gt_dir = Path(gt_dir) if gt_dir else None
        self.lock = threading.Lock()
        self.busy_job: str | None = None


def rasterize_strokes(
    strokes: list[StrokeModel], shape: tuple[int, int]
) -> SeedPixels:
    """Stamp a disk along each stroke polyline; later strokes override.

    Points are (x, y); anything falling outside the frame is clipped away.
    """
    h, w = shape
    stamped: dict[tuple[int, int], int] = {}
    for stroke in strokes:
        offs = disk_offsets(int(round(stroke.radius)))
        pts = stroke.points
        if not pts:
            continue
        samples = []
        if len(pts) == 1:
            samples.append(pts[0])
        for a, b in zip(pts, pts[1:]):
            dist = float(np.hypot(b[0] - a[0], b[1] - a[1]))
            n = max(int(np.ceil(dist * 2)), 1)
            for i in range(n + 1):
                f = i / n
                samples.append((a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f))
        for x, y in samples:
            cy, cx = int(round(y)), int(round(x))
            for dy, dx in offs:
                py, px = cy + dy, cx + dx
                if 0 <= py < h and 0 <= px < w:
                    stamped[(py, px)] = stroke.label
    if not stamped:
        return SeedPixels(np.zeros(0, int), np.zeros(0, int), np.zeros(0, int))
    ys, xs, labels = zip(*[(y, x, l) for (y, x), l in stamped.items()])
    return SeedPixels(np.array(ys), np.array(xs), np.array(labels))


def _label_png(lab: LabelMap) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(lab.labels.astype(np.uint8), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def session_report(handle: SessionHandle) -> dict:
    """Effort columns for every frame, overlap scores where ground truth
    is available."""
    state = handle.state
    markers = {}
    seconds = {}
    for entry in state.log:
        t = int(entry["t"])
        markers[t] = markers.get(t, 0) + int(entry["markers"])
        seconds[t] = seconds.get(t, 0.0) + float(entry["seconds"])
    gts = {}
    if handle.gt_dir is not None and handle.gt_dir.exists():
        for t in range(state.n_frames):
            p = handle.gt_dir / (pipeline.MASK_PATTERN % t)
            if p.exists():
                gts[t] = load_label(p)
    frames = []
    scored = []
    for t in range(state.n_frames):
        row = {
            "t": t,
            "iou": None,
            "f1": None,
            "tp": None,
            "fp": None,
            "fn": None,
            "markers": markers.get(t, 0),
            "seconds": seconds.get(t, 0.0),
        }
        mask = state.accepted.get(t)
        if t > 0 and mask is not None and t in gts:
            s = metrics.frame_score(mask, gts[t], t)
            row.update(iou=s.iou, f1=s.f1, tp=s.tp, fp=s.fp, fn=s.fn)
            scored.append(s)
        frames.append(row)
    n = state.n_frames
    corrected = sum(1 for t in range(n) if markers.get(t, 0) > 0)
    return {
        "sequence": str(handle.frames_dir),
        "mode": state.config.mode,
        "config": state.config.to_dict(),
        "frames": frames,
        "mean_iou": float(np.mean([s.iou for s in scored])) if scored else None,
        "mean_f1": float(np.mean([s.f1 for s in scored])) if scored else None,
        "frames_corrected_fraction": corrected / n if n else 0.0,
    }


def create_app(data_dir) -> FastAPI:
    data_root = Path(data_dir)
    data_root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="fomtrace")
    sessions: dict[str, SessionHandle] = {}
    jobs: dict[str, dict] = {}

    def get_session(sid: str) -> SessionHandle:
        if sid not in sessions:
            raise HTTPException(404, f"unknown session {sid}")
        return sessions[sid]

    def resolve(path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else data_root / p

    @app.get("/health")
    def health():
        return {"ok": True}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionModel):
        frames_dir = resolve(body.frames_dir)
        mask_path = resolve(body.init_mask)
        try:
            frames = load_sequence(frames_dir)
            l0 = load_label(mask_path)
            config = pipeline.SessionConfig.from_dict(body.config or {})
            state = pipeline.init_session(frames, l0, config)
        except FileNotFoundError as exc:
            raise HTTPException(422, str(exc))
        except (ValueError, FomtraceError) as exc:
            raise HTTPException(422, str(exc))
        sid = uuid.uuid4().hex[:12]
        gt = resolve(body.gt_dir) if body.gt_dir else None
        sessions[sid] = SessionHandle(state, frames_dir, gt)
        return {"session_id": sid, "n_frames": state.n_frames, "t": state.t}

    @app.post("/sessions/{sid}/step")
    def step_session(sid: str):
        handle = get_session(sid)
        with handle.lock:
            if handle.busy_job is not None:
                raise HTTPException(409, "a mutating job is already in flight")
            if handle.state.done:
                raise HTTPException(409, "session is finished")
            job_id = uuid.uuid4().hex[:12]
            jobs[job_id] = {
                "job_id": job_id,
                "state": "queued",
                "progress": 0.0,
                "message": f"step frame {handle.state.t}",
            }
            handle.busy_job = job_id

        def run():
            jobs[job_id]["state"] = "running"
            jobs[job_id]["progress"] = 0.1
            try:
                pipeline.step(handle.state)
                jobs[job_id]["progress"] = 1.0
                jobs[job_id]["state"] = "done"
                if handle.state.paused:
                    jobs[job_id]["message"] = "object vanished; empty mask produced"
            except Exception as exc:  # noqa: BLE001 - reported via job state
                jobs[job_id]["state"] = "failed"
                jobs[job_id]["message"] = str(exc)
            finally:
                handle.busy_job = None

        threading.Thread(target=run, daemon=True).start()
        return jobs[job_id]

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        if job_id not in jobs:
            raise HTTPException(404, f"unknown job {job_id}")
        return jobs[job_id]

    @app.get("/sessions/{sid}")
    def session_info(sid: str):
        handle = get_session(sid)
        s = handle.state
        return {
            "session_id": sid,
            "t": s.t,
            "n_frames": s.n_frames,
            "done": s.done,
            "paused": s.paused,
            "mode": s.config.mode,
            "gamma": s.config.gamma,
            "refined": sorted(s.refined),
            "accepted": sorted(s.accepted),
            "busy": handle.busy_job is not None,
        }

    @app.post("/sessions/{sid}/config")
    def update_config(sid: str, body: dict):
        handle = get_session(sid)
        with handle.lock:
            if handle.busy_job is not None:
                raise HTTPException(409, "a mutating job is already in flight")
            merged = handle.state.config.to_dict()
            merged.update(body or {})
            try:
                handle.state.config = pipeline.SessionConfig.from_dict(merged)
                handle.state.cache.config = handle.state.config
            except ValueError as exc:
                raise HTTPException(422, str(exc))
        return handle.state.config.to_dict()

    @app.get("/sessions/{sid}/frames/{t}.png")
    def frame_png(sid: str, t: int):
        handle = get_session(sid)
        if not 0 <= t < handle.state.n_frames:
            raise HTTPException(404, f"frame {t} out of range")
        src = handle.frames_dir / ("frame_%05d.png" % t)
        if src.exists():
            return FileResponse(src, media_type="image/png")
        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(to_rgb(handle.state.frames[t]), mode="RGB").save(
            buf, format="PNG"
        )
        return Response(buf.getvalue(), media_type="image/png")

    @app.get("/sessions/{sid}/masks/{t}.png")
    def mask_png(sid: str, t: int, kind: str = "refined"):
        handle = get_session(sid)
        stores = {
            "refined": handle.state.refined,
            "predicted": handle.state.predicted,
            "accepted": handle.state.accepted,
        }
        if kind not in stores:
            raise HTTPException(422, f"unknown mask kind {kind!r}")
        if t not in stores[kind]:
            raise HTTPException(404, f"no {kind} mask for frame {t}")
        return Response(_label_png(stores[kind][t]), media_type="image/png")

    @app.get("/sessions/{sid}/model/{t}.png")
    def model_png(sid: str, t: int):
        handle = get_session(sid)
        if t not in handle.state.models:
            raise HTTPException(404, f"no model for frame {t}")
        buf = io.BytesIO()
        render_model_png(handle.state.models[t], buf)
        return Response(buf.getvalue(), media_type="image/png")

    @app.post("/sessions/{sid}/scribbles")
    def scribbles(sid: str, body: ScribblesModel):
        handle = get_session(sid)
        with handle.lock:
            if handle.busy_job is not None:
                raise HTTPException(409, "a mutating job is already in flight")
            state = handle.state
            if body.t != state.t or state.t not in state.refined:
                raise HTTPException(409, "scribbles require a stepped current frame")
            seeds = rasterize_strokes(body.strokes, state.frames[0].shape)
            try:
                lab = pipeline.correct(
                    state, seeds, body.elapsed_s, markers=len(body.strokes)
                )
            except NothingToAccept as exc:
                raise HTTPException(409, str(exc))
        return Response(_label_png(lab), media_type="image/png")

    @app.post("/sessions/{sid}/accept")
    def accept_frame(sid: str):
        handle = get_session(sid)
        with handle.lock:
            if handle.busy_job is not None:
                raise HTTPException(409, "a mutating job is already in flight")
            try:
                nxt = pipeline.accept(handle.state)
            except NothingToAccept as exc:
                raise HTTPException(409, str(exc))
        return {"t": nxt, "done": handle.state.done}

    @app.get("/sessions/{sid}/report")
    def report(sid: str):
        return session_report(get_session(sid))

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    return app
