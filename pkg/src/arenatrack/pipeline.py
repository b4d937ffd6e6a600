"""End-to-end batch pipeline.

ingest -> undistort -> preprocess -> arena definition -> per-arena
(background, detection, tracking) -> fragment identity -> analytics ->
population aggregation -> output tree. One tracker per arena; arenas can
run on a small thread pool (exe.thre caps the workers). All stages are
deterministic, so two runs over the same inputs produce identical files.

Stops (service/CLI) are honored at safe points between frame batches;
a stopped run writes no output files.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics as ana
from . import imaging
from .arena import Arena, ArenaDefinitionError, Rect, load_arena_rects
from .background import BackgroundModel, GmmParams
from .calibration import CameraModel, build_undistortion_map
from .detection import DetectionParams, detect
from .identity import FragmentIdentifier, IdentityParams, extract_features
from .project_io.config import ProjectConfig
from .project_io.frames import FrameSource, window_frames
from .project_io.outputs import (ArenaResult, PopulationResult, RunResults,
                                 SequenceResult, write_outputs)
from .project_io.project import Project
from .tracking import MultiTracker, TrackerParams


class RunStopped(RuntimeError):
    """Raised when a stop was requested; all progress is discarded."""


@dataclass
class RunOptions:
    threads: int | None = None
    no_identity: bool = False
    out_level: int | None = None
    start_min: float | None = None
    end_min: float | None = None
    progress: object = None       # callable(stage, sequence, percent)
    stop: object = None           # object with is_set() -> bool


def _report(options: RunOptions, stage: str, sequence: int, pct: float):
    if options.progress is not None:
        options.progress(stage, sequence, min(max(pct, 0.0), 100.0))


def _check_stop(options: RunOptions):
    if options.stop is not None and options.stop.is_set():
        raise RunStopped("run stopped at a safe point; progress discarded")


def preprocess_frame(raw: np.ndarray, undist_map, config: ProjectConfig):
    frame = undist_map.apply(raw)
    return imaging.normalize_and_blur(frame, config["pre.gfil"],
                                      bool(config["pre.norm"]))


def reference_frame(project: Project, sources: list[FrameSource],
                    undist_map, config: ProjectConfig) -> np.ndarray:
    seq_i, frame_i = project.reference
    seq_i = min(seq_i, len(sources) - 1)
    frame_i = min(frame_i, sources[seq_i].frame_count - 1)
    raw = sources[seq_i].read(frame_i)
    # Arena definition always works on the normalized undistorted frame.
    return imaging.normalize_and_blur(undist_map.apply(raw), 0, True)


def define_project_arenas(project: Project, reference: np.ndarray,
                          config: ProjectConfig) -> list[Arena]:
    from .arena import define_arenas
    rects: list = []
    names: list = []
    if config["roi.mode"] == 1:
        arena_path = project.root / f"{project.name}_Arena.txt"
        names_path = project.root / f"{project.name}_ArenaNames.txt"
        if not arena_path.is_file():
            raise ArenaDefinitionError(
                f"manual arena mode but {arena_path} is missing")
        rects, names = load_arena_rects(arena_path, names_path)
    params = config.roi_params(rects=[(r.x0, r.y0, r.x1, r.y1) for r in rects],
                               names=names)
    return define_arenas(reference, params)


@dataclass
class _ArenaPipeline:
    arena: Arena
    tracker: MultiTracker
    identifier: FragmentIdentifier | None
    background: BackgroundModel | None
    det_params: DetectionParams
    id_params: IdentityParams
    extract: bool

    def process(self, frame: np.ndarray, index: int) -> None:
        crop = self.arena.crop(frame)
        fg = None
        if self.background is not None:
            fg = self.background.update_and_classify(crop)
        records = detect(frame, index, self.arena, fg, self.det_params)
        if self.extract:
            rect = self.arena.rect
            for rec in records:
                rec.features = extract_features(rec.blob, crop, index,
                                                self.id_params)
        self.tracker.step(index, records)
        if self.identifier is not None and self.tracker.needs_flush():
            self.identifier.flush(self.tracker.emitted_tracks())


def run_sequences(project: Project, sources: list[FrameSource],
                  arenas: list[Arena], camera: CameraModel,
                  options: RunOptions) -> RunResults:
    config = project.config
    det_params = config.detection_params()
    trk_params = config.tracker_params()
    gmm_params = config.gmm_params()
    id_params = config.identity_params()
    ana_params = config.analytics_params()
    identity_on = id_params.enabled and not options.no_identity

    start_min = options.start_min if options.start_min is not None \
        else config["oth.mini"]
    end_min = options.end_min if options.end_min is not None \
        else config["oth.mend"]
    workers = options.threads or int(
        os.environ.get("ARENATRACK_THREADS", 0)) or config["exe.thre"]
    workers = max(1, min(int(workers), len(arenas)))
    step = max(1, config["out.step"])

    results = RunResults(config=config, camera=camera, arenas=arenas)
    all_stats = []
    pop_points: list = []
    pop_transitions: list = []
    pop_frozen: list = []
    pop_speeds: list = []
    pop_accels: list = []
    frame_size = (sources[0].width, sources[0].height)

    for seq_index, source in enumerate(sources):
        undist_map = build_undistortion_map(camera, source.width,
                                            source.height)
        start, stop = window_frames(source, start_min, end_min)
        analyzed = max(stop - start, 0)
        pipelines = [
            _ArenaPipeline(
                arena=arena,
                tracker=MultiTracker(trk_params, arena.id),
                identifier=(FragmentIdentifier(id_params,
                                               trk_params.animals_per_arena)
                            if identity_on else None),
                background=(BackgroundModel(
                    (arena.rect.height, arena.rect.width), gmm_params)
                    if gmm_params.enabled else None),
                det_params=det_params, id_params=id_params,
                extract=identity_on)
            for arena in arenas
        ]
        backdrops: dict[int, np.ndarray] = {}
        pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            done = 0
            for frame in source.frames(start, stop):
                processed = preprocess_frame(frame.data, undist_map, config)
                if not backdrops:
                    for arena in arenas:
                        backdrops[arena.id] = arena.crop(processed).copy()
                if pool is not None:
                    futures = [pool.submit(p.process, processed, frame.index)
                               for p in pipelines]
                    for fut in futures:
                        fut.result()
                else:
                    for p in pipelines:
                        p.process(processed, frame.index)
                done += 1
                if done % step == 0:
                    _check_stop(options)
                    _report(options, "tracking", seq_index,
                            100.0 * done / max(analyzed, 1))
        finally:
            if pool is not None:
                pool.shutdown()
        _check_stop(options)
        _report(options, "tracking", seq_index, 100.0)

        seq_result = SequenceResult(
            name=f"Seq{seq_index + 1}", index=seq_index, fps=source.fps,
            analyzed_frames=analyzed, resolution=(source.width, source.height))
        for p in pipelines:
            p.tracker.finish()
            tracks = p.tracker.emitted_tracks()
            assignment = None
            if p.identifier is not None:
                p.identifier.identify(tracks)
                assignment = p.identifier.result()
            res = analyze_arena(
                p.arena, tracks, assignment, camera, ana_params,
                source.fps, analyzed, start, stop, seq_index,
                config["ana.nzon"], backdrops.get(p.arena.id))
            seq_result.arenas.append(res)
            if res.stats is not None:
                all_stats.append(res.stats)
            projected = ana.project_to_virtual_arena(
                res.points, res.corners,
                arena_center_px=((p.arena.rect.x0 + p.arena.rect.x1) / 2,
                                 (p.arena.rect.y0 + p.arena.rect.y1) / 2),
                frame_size_px=frame_size,
                orientation=ana_params.arena_orientation,
                normalize=ana_params.normalize,
                visibility_rate=(res.stats.visibility_rate
                                 if res.stats else None),
                min_visibility=ana_params.min_visibility)
            pop_points.extend(projected)
            pop_transitions.extend(res.transitions)
            pop_frozen.extend(res.frozen)
            pop_speeds.extend(res.speeds)
            pop_accels.extend(res.accels)
        results.sequences.append(seq_result)
        _report(options, "analytics", seq_index, 100.0)

    results.population = build_population(
        pop_points, pop_transitions, pop_frozen, pop_speeds, pop_accels,
        [res for seq in results.sequences for res in seq.arenas],
        all_stats, ana_params, sources[0].fps, config["ana.nzon"])
    return results


def analyze_arena(arena: Arena, tracks, assignment, camera: CameraModel,
                  params: ana.AnalyticsParams, fps: float,
                  analyzed_frames: int, start_frame: int, stop_frame: int,
                  seq_index: int, nzon: int,
                  backdrop: np.ndarray | None) -> ArenaResult:
    corners = ana.corners_from_rect(arena.rect, camera)
    raw_points: list = []
    for track in tracks:
        individual = assignment.individual_of(track.id) if assignment else None
        raw_points.extend(ana.to_real_space(track, arena.id + 1, camera, fps,
                                            individual))
    points = ana.postprocess(raw_points, params, fps)
    speeds = ana.instantaneous_speed(points, params.speed_sampling)
    accels = ana.instantaneous_accel(speeds, params.speed_sampling)
    confirmed = [p for p in points if p.label == ana.LABEL_CONFIRMED]
    visibility = len(confirmed) / analyzed_frames if analyzed_frames else None
    normalize = params.normalize and visibility is not None and \
        visibility >= params.min_visibility
    edge_grids = ana.edge_zone_histograms(points, corners, params.zone_size,
                                          nzon, fps)
    exploration = ana.exploration_grid(points, corners, params.zone_size,
                                       fps, normalize=normalize)
    mean_grid = ana.radial_zone_histogram(points, corners, "mean",
                                          params.zone_size, fps)
    center_grid = ana.radial_zone_histogram(points, corners, "center",
                                            params.zone_size, fps)
    start_s = start_frame / fps
    end_s = max(stop_frame - 1, start_frame) / fps
    transitions = ana.detect_transitions(points, params.transition_time,
                                         start_s, end_s, seq_index)
    frozen = ana.detect_frozen_events(points, params.frozen_distance,
                                      params.frozen_time, seq_index)
    stats = ana.compute_stats(points, speeds, accels, exploration,
                              transitions, frozen, analyzed_frames, fps,
                              params.mobility_speed)
    mean_anchor = None
    if points:
        mean_anchor = (float(np.mean([p.x for p in points])),
                       float(np.mean([p.y for p in points])))
    return ArenaResult(
        arena=arena, corners=corners, tracks=tracks, assignment=assignment,
        points=points, speeds=speeds, accels=accels, edge_grids=edge_grids,
        exploration=exploration, mean_grid=mean_grid,
        center_grid=center_grid, transitions=transitions, frozen=frozen,
        stats=stats, backdrop=backdrop, mean_anchor=mean_anchor)


def build_population(points, transitions, frozen, speeds, accels,
                     arena_results, all_stats, params: ana.AnalyticsParams,
                     fps: float, nzon: int) -> PopulationResult:
    from .analytics import ArenaCorners, StatsSummary
    width = max((r.corners.width for r in arena_results), default=1.0)
    height = max((r.corners.height for r in arena_results), default=1.0)
    corners = ArenaCorners((0.0, 0.0), (width, 0.0), (0.0, height),
                           (width, height))
    edge_grids = ana.edge_zone_histograms(points, corners, params.zone_size,
                                          nzon, fps)
    exploration = ana.exploration_grid(points, corners, params.zone_size, fps)
    mean_grid = ana.radial_zone_histogram(points, corners, "mean",
                                          params.zone_size, fps)
    center_grid = ana.radial_zone_histogram(points, corners, "center",
                                            params.zone_size, fps)
    stats_mean = None
    stats_std: dict = {}
    if all_stats:
        values: dict = {}
        for attr, _ in StatsSummary.FIELD_LABELS:
            nums = [getattr(s, attr) for s in all_stats
                    if getattr(s, attr) is not None]
            values[attr] = nums
        kwargs = {}
        for attr, _ in StatsSummary.FIELD_LABELS:
            nums = values[attr]
            kwargs[attr] = float(np.mean(nums)) if nums else None
            stats_std[attr] = float(np.std(nums)) if nums else None
        stats_mean = StatsSummary(**kwargs)
    return PopulationResult(
        points=points, edge_grids=edge_grids, exploration=exploration,
        mean_grid=mean_grid, center_grid=center_grid,
        transitions=transitions, frozen=frozen, stats_mean=stats_mean,
        stats_std=stats_std, corners=corners, speeds=speeds, accels=accels)


def run_project(project: Project, options: RunOptions | None = None,
                write: bool = True):
    """Full batch run; returns (results, output_dir, written paths)."""
    options = options or RunOptions()
    config = project.config
    config.values["out.pnam"] = project.name
    if options.out_level is not None:
        config.values["out.ftxt"] = options.out_level
    config.validate()
    output_dir = project.output_dir
    if write:
        output_dir.mkdir(parents=True, exist_ok=True)
        probe = output_dir / ".write_probe"
        try:
            probe.write_text("ok")
            probe.unlink()
        except OSError as exc:
            raise PermissionError(
                f"cannot write project outputs under {output_dir}: {exc}")
    sources = project.open_sources()
    undist_map = build_undistortion_map(project.camera, sources[0].width,
                                        sources[0].height)
    reference = reference_frame(project, sources, undist_map, config)
    arenas = define_project_arenas(project, reference, config)
    _report(options, "arenas", 0, 100.0)
    results = run_sequences(project, sources, arenas, project.camera, options)
    written = []
    if write:
        _report(options, "write", 0, 0.0)
        written = write_outputs(results, output_dir)
        _report(options, "write", 0, 100.0)
    return results, output_dir, written
