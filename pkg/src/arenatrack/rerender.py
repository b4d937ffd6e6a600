"""Recompute analytics and images from stored Tracking files.

Interpolation, smoothing, zone sizes and the other analysis parameters
can change without redoing detection/tracking: the per-arena
``Tracking_<k>.txt`` files are re-read, trajectories rebuilt, and every
analytics output rewritten. Tracking files themselves are re-emitted
byte-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .calibration import build_undistortion_map
from .pipeline import (analyze_arena, build_population, define_project_arenas,
                       reference_frame)
from .project_io.frames import window_frames
from .project_io.outputs import RunResults, SequenceResult, write_outputs
from .project_io.project import Project, ProjectError
from .tracking import TrackRow
from . import analytics as ana


@dataclass
class StoredTrack:
    """Just enough of a track to re-run analytics and re-emit rows."""

    id: int
    rows: list[TrackRow] = field(default_factory=list)


def read_tracking_file(path: Path, rect) -> list[StoredTrack]:
    tracks: dict[int, StoredTrack] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8")
                                  .splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 6:
            raise ProjectError(f"{path}:{lineno}: expected 6 columns")
        frame, _arena0, track_id = int(parts[0]), int(parts[1]), int(parts[2])
        x, y, label = float(parts[3]), float(parts[4]), int(parts[5])
        track = tracks.setdefault(track_id, StoredTrack(track_id))
        track.rows.append(TrackRow(frame, x + rect.x0, y + rect.y0, label))
    return [tracks[k] for k in sorted(tracks)]


def reanalyze_project(project: Project) -> list[Path]:
    config = project.config
    config.validate()
    sources = project.open_sources()
    undist = build_undistortion_map(project.camera, sources[0].width,
                                    sources[0].height)
    reference = reference_frame(project, sources, undist, config)
    arenas = define_project_arenas(project, reference, config)
    ana_params = config.analytics_params()
    outdir = project.output_dir
    if not outdir.is_dir():
        raise ProjectError(f"{outdir}: no previous run outputs to re-render")

    results = RunResults(config=config, camera=project.camera, arenas=arenas)
    all_stats = []
    pop_points: list = []
    pop_transitions: list = []
    pop_frozen: list = []
    pop_speeds: list = []
    pop_accels: list = []
    frame_size = (sources[0].width, sources[0].height)

    for seq_index, source in enumerate(sources):
        seq_dir = outdir / f"Seq{seq_index + 1}"
        start, stop = window_frames(source, config["oth.mini"],
                                    config["oth.mend"])
        analyzed = max(stop - start, 0)
        seq_result = SequenceResult(
            name=f"Seq{seq_index + 1}", index=seq_index, fps=source.fps,
            analyzed_frames=analyzed,
            resolution=(source.width, source.height))
        for arena in arenas:
            path = seq_dir / f"Tracking_{arena.id}.txt"
            if not path.is_file():
                raise ProjectError(f"{path}: tracking file missing; "
                                   f"run the project first")
            tracks = read_tracking_file(path, arena.rect)
            backdrop = arena.crop(reference).copy()
            res = analyze_arena(arena, tracks, None, project.camera,
                                ana_params, source.fps, analyzed, start,
                                stop, seq_index, config["ana.nzon"], backdrop)
            seq_result.arenas.append(res)
            if res.stats is not None:
                all_stats.append(res.stats)
            projected = ana.project_to_virtual_arena(
                res.points, res.corners,
                arena_center_px=((arena.rect.x0 + arena.rect.x1) / 2,
                                 (arena.rect.y0 + arena.rect.y1) / 2),
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

    results.population = build_population(
        pop_points, pop_transitions, pop_frozen, pop_speeds, pop_accels,
        [r for seq in results.sequences for r in seq.arenas],
        all_stats, ana_params, sources[0].fps, config["ana.nzon"])
    return write_outputs(results, outdir)
