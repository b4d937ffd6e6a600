"""Throughput benchmark: synthetic HD scene through the full per-frame
path (preprocess, detect, track) with identification off."""

from __future__ import annotations

import platform
import time
from dataclasses import dataclass

from .calibration import CameraModel, build_undistortion_map
from .detection import DetectionParams, detect
from .pipeline import preprocess_frame
from .project_io.config import ProjectConfig
from .synth import ArenaSpec, BlobSpec, SceneRenderer, SceneSpec
from .tracking import MultiTracker, TrackerParams
from .arena import Arena, Rect, TrackingArea

import numpy as np


def make_bench_scene(frames: int, width: int, height: int) -> SceneSpec:
    margin = 40
    rect = (margin, margin, width - margin, height - margin)
    blob = BlobSpec(arena=1, radius=12, texture="stripes", intensity=40,
                    contrast=30, path="linear",
                    params=(width / 2, height / 2, 3.1, 2.3))
    return SceneSpec(width=width, height=height, fps=25.0, frames=frames,
                     seed=7, noise_sigma=2.0, arenas=(ArenaSpec(rect),),
                     blobs=(blob,))


@dataclass(frozen=True)
class BenchReport:
    frames: int
    width: int
    height: int
    elapsed_s: float
    fps: float
    detections: int

    def __str__(self) -> str:
        return (f"benchmark: {self.frames} frames {self.width}x{self.height}, "
                f"{self.elapsed_s:.2f} s, {self.fps:.1f} frames/s\n"
                f"detections: {self.detections}; "
                f"machine: {platform.machine()}, "
                f"python {platform.python_version()}")


def run_benchmark(frames: int = 200, width: int = 1280, height: int = 720,
                  threads: int | None = None) -> BenchReport:
    spec = make_bench_scene(frames, width, height)
    renderer = SceneRenderer(spec)
    rendered = [renderer.frame(i) for i in range(frames)]  # not timed

    config = ProjectConfig()
    camera = CameraModel.manual_scale(1.0, 1.0)
    undist = build_undistortion_map(camera, width, height)
    x0, y0, x1, y1 = spec.arenas[0].rect
    rect = Rect(x0, y0, x1, y1)
    mask = np.ones((rect.height, rect.width), dtype=bool)
    arena = Arena(0, "Arena1", rect, TrackingArea(mask=mask))
    det_params = DetectionParams()
    tracker = MultiTracker(TrackerParams())

    begin = time.perf_counter()
    for i, raw in enumerate(rendered):
        frame = preprocess_frame(raw, undist, config)
        records = detect(frame, i, arena, None, det_params)
        tracker.step(i, records)
    elapsed = time.perf_counter() - begin
    tracker.finish()
    detections = sum(t.length for t in tracker.closed + tracker.active)
    return BenchReport(frames, width, height, elapsed, frames / elapsed,
                       detections)
