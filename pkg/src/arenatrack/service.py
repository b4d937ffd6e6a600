"""Local HTTP facade for the tuning UI.

Loopback-only by default; JSON bodies in, JSON or PNG out, everything
under /api. Previews are pure functions of their request bodies. One
run at a time: mutating calls during a run answer 409, invalid
parameters answer 422 with field-level messages. A stop lands at the
next safe point and discards all progress (no partial output files).
"""

from __future__ import annotations

import io
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from PIL import Image

from . import imaging
from .arena import ArenaDefinitionError, Rect, define_arenas_manual
from .background import BackgroundModel
from .calibration import build_undistortion_map
from .detection import DetectionParams, candidate_mask, detect, passes_filters
from .pipeline import (RunOptions, RunStopped, define_project_arenas,
                       preprocess_frame, reference_frame, run_project)
from .project_io.config import ConfigError, PARAM_SPECS, ProjectConfig
from .project_io.project import Project


def rle_encode(mask: np.ndarray) -> dict:
    """Row-major run-length encoding of the True pixels."""
    flat = np.asarray(mask, dtype=bool).ravel()
    edges = np.flatnonzero(np.diff(np.r_[False, flat, False]))
    starts = edges[0::2]
    lengths = edges[1::2] - starts
    runs: list[int] = []
    for s, ln in zip(starts.tolist(), lengths.tolist()):
        runs.extend((s, ln))
    return {"width": int(mask.shape[1]), "height": int(mask.shape[0]),
            "runs": runs}


def _png_bytes(image: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return buf.getvalue()


@dataclass
class RunState:
    status: str = "idle"          # idle | running | done | stopped | failed
    stage: str = ""
    sequence: int = 0
    percent: float = 0.0
    error: str | None = None
    thread: threading.Thread | None = None
    stop_event: threading.Event = field(default_factory=threading.Event)

    @property
    def active(self) -> bool:
        return self.status == "running"


class ServiceState:
    def __init__(self, project: Project):
        self.project = project
        self.sources = project.open_sources()
        first = self.sources[0]
        self.undist = build_undistortion_map(project.camera, first.width,
                                             first.height)
        self.run = RunState()
        self.results = None
        self.lock = threading.Lock()

    @property
    def config(self) -> ProjectConfig:
        return self.project.config

    def undistorted(self, seq: int, index: int) -> np.ndarray:
        if not (0 <= seq < len(self.sources)):
            raise HTTPException(404, f"no sequence {seq}")
        source = self.sources[seq]
        if not (0 <= index < source.frame_count):
            raise HTTPException(404, f"no frame {index} in sequence {seq}")
        return self.undist.apply(source.read(index))

    def reference(self) -> np.ndarray:
        return reference_frame(self.project, self.sources, self.undist,
                               self.config)


def _validation_errors(payload: dict) -> dict[str, str]:
    errors: dict[str, str] = {}
    probe = ProjectConfig()
    for code, value in payload.items():
        if code not in PARAM_SPECS:
            errors[code] = "unknown parameter code"
            continue
        try:
            probe[code] = value
        except ConfigError as exc:
            errors[code] = str(exc)
    if not errors:
        try:
            probe.validate()
        except ConfigError as exc:
            errors["config"] = str(exc)
    return errors


def create_app(project: Project) -> FastAPI:
    state = ServiceState(project)
    app = FastAPI(title="arenatrack service", version="1")
    app.state.service = state

    def guard_mutation():
        if state.run.active:
            raise HTTPException(409, "a run is active")

    # ------------------------------------------------------------ frames

    @app.get("/api/frames/{seq}/{index}")
    def get_frame(seq: int, index: int):
        frame = state.undistorted(seq, index)
        return Response(content=_png_bytes(frame), media_type="image/png")

    @app.get("/api/project/info")
    def project_info():
        return {
            "name": state.project.name,
            "sequences": [
                {"index": i, "width": s.width, "height": s.height,
                 "fps": s.fps, "frames": s.frame_count}
                for i, s in enumerate(state.sources)],
        }

    # ----------------------------------------------------------- previews

    @app.post("/api/preview/arenas")
    def preview_arenas(body: dict):
        mode = int(body.get("mode", state.config["roi.mode"]))
        params_over = body.get("params", {})
        base = {
            "thre": state.config["roi.thre"], "poly": state.config["roi.poly"],
            "elms": state.config["roi.elms"], "dilt": state.config["roi.dilt"],
            "erot": state.config["roi.erot"], "mins": state.config["roi.mins"],
            "fite": bool(state.config["roi.fite"]),
            "redr": state.config["roi.redr"],
        }
        for key, value in params_over.items():
            if key not in base:
                raise HTTPException(422, detail={key: "unknown roi parameter"})
            base[key] = type(base[key])(value)
        from .arena import RoiParams, define_arenas_automatic
        reference = state.reference()
        try:
            if mode == 0:
                arenas = define_arenas_automatic(
                    reference, RoiParams(mode=0, **base))
                errors = {}
            else:
                rects = [Rect(*map(int, r)) for r in body.get("rects", [])]
                if not rects:
                    raise HTTPException(
                        422, detail={"rects": "manual mode needs rectangles"})
                names = body.get("names") or None
                arenas, errors = define_arenas_manual(
                    reference, rects, RoiParams(mode=1, **base), names)
        except ArenaDefinitionError as exc:
            return {"arenas": [], "errors": {"all": str(exc)}}
        return {
            "arenas": [
                {"id": a.id, "name": a.name,
                 "rect": [a.rect.x0, a.rect.y0, a.rect.x1, a.rect.y1],
                 "mask": rle_encode(a.area.mask)}
                for a in arenas],
            "errors": {str(k): v for k, v in errors.items()},
        }

    @app.post("/api/preview/detect")
    def preview_detect(body: dict):
        seq = int(body.get("seq", 0))
        frame_index = int(body.get("frame", 0))
        arena_index = int(body.get("arena", 0))
        warmup = int(body.get("warmup", 0))
        over = body.get("det", {})
        values = {code: state.config[code] for code in PARAM_SPECS
                  if code.startswith("det.")}
        for key, value in over.items():
            if key not in values:
                raise HTTPException(422,
                                    detail={key: "unknown detection parameter"})
            errors = _validation_errors({key: value})
            if errors:
                raise HTTPException(422, detail=errors)
            spec = PARAM_SPECS[key]
            values[key] = spec.kind(float(value)) if spec.kind is not str \
                else value
        det_params = DetectionParams(
            thre=values["det.thre"], opcl=values["det.opcl"],
            elms=values["det.elms"], dilt=values["det.dilt"],
            erot=values["det.erot"], erdi=values["det.erdi"],
            elss=values["det.elss"], ertt=values["det.ertt"],
            filt=bool(values["det.filt"]), mins=values["det.mins"],
            maxs=values["det.maxs"], minr=values["det.minr"],
            maxr=values["det.maxr"], mish=values["det.mish"],
            mash=values["det.mash"], minf=values["det.minf"])

        reference = state.reference()
        arenas = define_project_arenas(state.project, reference, state.config)
        if not (0 <= arena_index < len(arenas)):
            raise HTTPException(404, f"no arena {arena_index}")
        arena = arenas[arena_index]

        frame = preprocess_frame(state.sources[seq].read(frame_index),
                                 state.undist, state.config)
        fg = None
        gmm = state.config.gmm_params()
        if gmm.enabled and warmup > 0:
            model = BackgroundModel((arena.rect.height, arena.rect.width),
                                    gmm)
            lo = max(0, frame_index - warmup)
            for i in range(lo, frame_index):
                warm = preprocess_frame(state.sources[seq].read(i),
                                        state.undist, state.config)
                model.update_and_classify(arena.crop(warm))
            fg = model.update_and_classify(arena.crop(frame))

        crop = arena.crop(frame)
        mask = candidate_mask(crop, arena.area.mask, fg, det_params)
        blobs = imaging.connected_components(mask)
        survivors = [b for b in blobs if passes_filters(b, det_params)]
        survivors.sort(key=lambda b: -b.area_px)
        sizes = [b.area_px for b in survivors]
        return {
            "unfiltered_count": len(blobs),
            "filtered_count": len(survivors),
            "size_mean": float(np.mean(sizes)) if sizes else None,
            "size_std": float(np.std(sizes)) if sizes else None,
            "blobs": [
                {"centroid": [b.centroid[0] + arena.rect.x0,
                              b.centroid[1] + arena.rect.y0],
                 "size": b.area_px,
                 "radius": b.enclosing_circle.radius,
                 "axis_ratio": (None if not np.isfinite(
                     b.fitted_ellipse.axis_ratio)
                     else b.fitted_ellipse.axis_ratio),
                 "fill_rate": b.fill_rate}
                for b in survivors],
        }

    # ------------------------------------------------------------- config

    @app.get("/api/project/config")
    def get_config():
        return {"values": dict(state.config.values)}

    @app.put("/api/project/config")
    def put_config(body: dict):
        guard_mutation()
        payload = body.get("values", body)
        errors = _validation_errors(payload)
        if errors:
            raise HTTPException(422, detail=errors)
        with state.lock:
            for code, value in payload.items():
                state.config[code] = value
        return {"values": dict(state.config.values)}

    # --------------------------------------------------------------- runs

    @app.post("/api/run")
    def start_run():
        with state.lock:
            if state.run.active:
                raise HTTPException(409, "a run is already active")
            run = RunState(status="running")
            state.run = run

        def progress(stage, sequence, pct):
            run.stage = stage
            run.sequence = sequence
            run.percent = pct

        def worker():
            options = RunOptions(progress=progress, stop=run.stop_event)
            try:
                results, _, _ = run_project(state.project, options)
                state.results = results
                run.status = "done"
            except RunStopped:
                run.status = "stopped"
            except Exception as exc:  # surfaced through /api/run/status
                run.status = "failed"
                run.error = str(exc)

        run.thread = threading.Thread(target=worker, daemon=True)
        run.thread.start()
        return {"status": run.status}

    @app.get("/api/run/status")
    def run_status():
        run = state.run
        return {"status": run.status, "stage": run.stage,
                "sequence": run.sequence, "percent": run.percent,
                "error": run.error}

    @app.post("/api/run/stop")
    def stop_run():
        run = state.run
        if not run.active:
            return {"status": run.status}
        run.stop_event.set()
        if run.thread is not None:
            run.thread.join(timeout=60)
        return {"status": run.status}

    # ------------------------------------------------------------ results

    def _arena_result(seq: int, arena: int):
        if state.results is None:
            raise HTTPException(404, "no results yet; run the project first")
        try:
            seq_result = state.results.sequences[seq]
        except IndexError:
            raise HTTPException(404, f"no sequence {seq}")
        for res in seq_result.arenas:
            if res.arena.id == arena:
                return seq_result, res
        raise HTTPException(404, f"no arena {arena}")

    @app.get("/api/results/{seq}/{arena}/{metric}")
    def get_results(seq: int, arena: int, metric: str):
        from .project_io import outputs as ow
        seq_result, res = _arena_result(seq, arena)
        if metric == "stats":
            return {"lines": ow.stats_lines(seq_result, res,
                                            state.project.camera.unit_name)}
        if metric == "edges":
            return {name: {"counts": g.counts.tolist(),
                           "seconds": g.seconds.tolist(),
                           "frequency": g.frequency.tolist(),
                           "zone_size": g.zone_size}
                    for name, g in res.edge_grids.items()}
        if metric == "exploration":
            e = res.exploration
            return {"counts": e.grid.counts.tolist(),
                    "explored": e.explored_areas,
                    "areas": e.number_of_areas,
                    "zone_size": e.grid.zone_size}
        if metric in ("mean", "center"):
            g = res.mean_grid if metric == "mean" else res.center_grid
            return {"counts": g.counts.tolist(),
                    "frequency": g.frequency.tolist(),
                    "zone_size": g.zone_size}
        if metric == "speed":
            return {"rows": ow.series_rows(res.speeds)}
        if metric == "accel":
            return {"rows": ow.series_rows(res.accels)}
        if metric == "transitions":
            return {"rows": ow.transition_rows(res.transitions)}
        if metric == "frozen":
            return {"rows": ow.frozen_rows(res.frozen)}
        if metric == "realspace":
            return {"rows": ow.realspace_rows(res.points)}
        raise HTTPException(404, f"unknown metric {metric!r}")

    @app.get("/api/results/images/{seq}/{arena}/{name}")
    def get_result_image(seq: int, arena: int, name: str):
        if not name.replace("_", "").replace("-", "").isalnum():
            raise HTTPException(422, "bad image name")
        seq_dir = state.project.output_dir / f"Seq{seq + 1}"
        for ext in (".png", ".jpg"):
            path = seq_dir / f"{name}_{arena + 1}{ext}"
            if path.is_file():
                media = "image/png" if ext == ".png" else "image/jpeg"
                return Response(content=path.read_bytes(), media_type=media)
        raise HTTPException(404, f"no image {name} for arena {arena}")

    return app
