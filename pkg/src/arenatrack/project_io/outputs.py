"""Output tree writers.

Layout (everything under the project directory):

    <project>/
      <pname>_Configuration.txt, _Arena.txt, _ArenaNames.txt,
      <pname>_Calibrator.txt, <pname>_Output.txt, <pname>.csv
      Tracking.txt, Tracking_RealSpace.txt, Instant_Speed.txt, ...
      Dist_Edge_All.png, Exploration.png, Trajectory.png, ...
      <SeqName>/
        Tracking_0.txt            (arena numbers 0-based, pixel coords)
        Tracking_RealSpace_1.txt  (arena numbers 1-based, world coords)
        Instant_Speed_1.txt, Instant_Accel_1.txt, Dist_Edges_1.txt,
        Exploration_1.txt, Dist_MeanPos_1.txt, Dist_CenterPos_1.txt,
        Transitions_1.txt, FrozenEvents_1.txt, Stats_1.txt
        Dist_Edge_All_1.png, ... Trajectory_1.png

Columns are TAB separated, newline "\n", decimal point '.', floats
printed with 6 significant digits, missing statistics as "n/a".
Internal Tracking files use 0-based arena numbers and arena-relative
pixel coordinates; every real-space/statistics file numbers arenas from
1. The text level controls which text files appear: 0 none, 1 the main
files (Tracking, Tracking_RealSpace, Stats), 2 everything.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import render as render_mod
from ..analytics import (ArenaCorners, ExplorationResult, FrozenEvent,
                         SeriesSample, StatsSummary, TrajectoryPoint,
                         TransitionEvent, ZoneGrid)
from ..arena import Arena, save_arenas
from ..calibration import CameraModel, save_calibrator
from .config import ProjectConfig, write_configuration


def fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


@dataclass
class ArenaResult:
    arena: Arena
    corners: ArenaCorners
    tracks: list = field(default_factory=list)
    assignment: object = None
    points: list = field(default_factory=list)       # TrajectoryPoint
    speeds: list = field(default_factory=list)       # SeriesSample
    accels: list = field(default_factory=list)
    edge_grids: dict = field(default_factory=dict)   # N/W/S/E/ALL -> ZoneGrid
    exploration: ExplorationResult | None = None
    mean_grid: ZoneGrid | None = None
    center_grid: ZoneGrid | None = None
    transitions: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    stats: StatsSummary | None = None
    backdrop: np.ndarray | None = None
    mean_anchor: tuple | None = None


@dataclass
class SequenceResult:
    name: str
    index: int
    fps: float
    analyzed_frames: int
    resolution: tuple[int, int]
    arenas: list[ArenaResult] = field(default_factory=list)


@dataclass
class PopulationResult:
    points: list = field(default_factory=list)
    edge_grids: dict = field(default_factory=dict)
    exploration: ExplorationResult | None = None
    mean_grid: ZoneGrid | None = None
    center_grid: ZoneGrid | None = None
    transitions: list = field(default_factory=list)
    frozen: list = field(default_factory=list)
    stats_mean: StatsSummary | None = None
    stats_std: dict = field(default_factory=dict)
    corners: ArenaCorners | None = None
    speeds: list = field(default_factory=list)
    accels: list = field(default_factory=list)


@dataclass
class RunResults:
    config: ProjectConfig
    camera: CameraModel
    arenas: list[Arena]
    sequences: list[SequenceResult] = field(default_factory=list)
    population: PopulationResult | None = None


# ------------------------------------------------------------- text pieces

def _write(path: Path, lines: list[str]) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def tracking_rows(tracks: list, arena_index0: int, rect) -> list[str]:
    rows = []
    for track in sorted(tracks, key=lambda t: t.id):
        for r in track.rows:
            rows.append((r.frame, f"{r.frame}\t{arena_index0}\t{track.id}\t"
                         f"{fmt(r.x - rect.x0)}\t{fmt(r.y - rect.y0)}\t"
                         f"{r.label}"))
    rows.sort(key=lambda item: item[0])
    return [text for _, text in rows]


def realspace_rows(points: list[TrajectoryPoint]) -> list[str]:
    pts = sorted(points, key=lambda p: (p.arena, p.track, p.frame))
    return [f"{fmt(p.time_s)}\t{p.arena}\t{p.track}\t{fmt(p.x)}\t"
            f"{fmt(p.y)}\t{p.label}" for p in pts]


def series_rows(samples: list[SeriesSample]) -> list[str]:
    return [f"{fmt(s.time_s)}\t{s.arena}\t{s.track}\t{fmt(s.value)}"
            for s in samples]


def _zone_labels(n: int, dst: float) -> list[str]:
    return [f"{(k + 1) * dst:g}mm" for k in range(n)]


def edge_table_lines(grids: dict[str, ZoneGrid]) -> list[str]:
    order = ["N", "W", "S", "E", "ALL"]
    nzones = len(grids["N"].counts)
    dst = grids["N"].zone_size
    header = "\t" + "\t".join(_zone_labels(nzones, dst))
    blocks = [
        ("Frame Count", lambda g: g.counts),
        ("Time Count (sec)", lambda g: g.seconds),
        ("Frequency (Zone Detections/Total Detections)", lambda g: g.frequency),
    ]
    lines: list[str] = []
    for title, metric in blocks:
        lines.append(title)
        lines.append(header)
        for name in order:
            values = metric(grids[name])
            lines.append(f"Edge {name}\t" + "\t".join(fmt(v) for v in values))
        lines.append("")
    return lines[:-1]


def exploration_table_lines(result: ExplorationResult) -> list[str]:
    grid = result.grid
    rows, cols = grid.counts.shape
    dst = grid.zone_size
    header = "\t" + "\t".join(_zone_labels(cols, dst))
    row_labels = _zone_labels(rows, dst)
    blocks = [
        ("Frame Count", grid.counts),
        ("Time Count (sec)", grid.seconds),
        ("Frequency (Zone Detections/Total Detections)", grid.frequency),
    ]
    lines: list[str] = []
    for title, matrix in blocks:
        lines.append(title)
        lines.append(header)
        for label, row in zip(row_labels, matrix):
            lines.append(label + "\t" + "\t".join(fmt(v) for v in row))
        lines.append("")
    return lines[:-1]


def radial_table_lines(grid: ZoneGrid) -> list[str]:
    n = len(grid.counts)
    header = "\t" + "\t".join(_zone_labels(n, grid.zone_size))
    return [
        header,
        "Frame Count\t" + "\t".join(fmt(v) for v in grid.counts),
        "Time Count (sec)\t" + "\t".join(fmt(v) for v in grid.seconds),
        "Frequency (Zone Det./Total Det.)\t"
        + "\t".join(fmt(v) for v in grid.frequency),
    ]


def transition_rows(events: list[TransitionEvent]) -> list[str]:
    return [f"{fmt(e.time_s)}\t{e.sequence}\t{e.arena}\t{e.track}\t"
            f"{fmt(e.x)}\t{fmt(e.y)}\t{e.label}" for e in events]


def frozen_rows(events: list[FrozenEvent]) -> list[str]:
    return [f"{fmt(e.time_s)}\t{e.sequence}\t{e.arena}\t{e.track}\t"
            f"{fmt(e.mean_x)}\t{fmt(e.mean_y)}\t{fmt(e.duration_s)}"
            for e in events]


def stats_lines(seq: SequenceResult, result: ArenaResult,
                unit: str) -> list[str]:
    a = result.arena
    c = result.corners
    r = a.rect
    lines = [
        f"Video Resolution\t[{seq.resolution[0]} x {seq.resolution[1]}]",
        f"Video FrameRate\t{fmt(seq.fps)}",
        f"Analysed Video Frames\t{seq.analyzed_frames}",
        f"Analysed Video Time\t{fmt(seq.analyzed_frames / seq.fps)}",
        (f"Arena\t{a.id + 1} {a.name} "
         f"[{r.x0}, {r.y0}] [{r.x1}, {r.y0}] [{r.x0}, {r.y1}] "
         f"[{r.x1}, {r.y1}] "
         f"[{fmt(c.nw[0])}, {fmt(c.nw[1])}] [{fmt(c.ne[0])}, {fmt(c.ne[1])}] "
         f"[{fmt(c.sw[0])}, {fmt(c.sw[1])}] [{fmt(c.se[0])}, {fmt(c.se[1])}]"),
        (f"Arena Size\t[{r.width} x {r.height}] "
         f"[{fmt(c.width)} x {fmt(c.height)}]"),
        f"Arena Center\t[{fmt(c.center[0])}, {fmt(c.center[1])}]",
    ]
    if result.mean_anchor is not None:
        lines.append(f"Mean Position\t[{fmt(result.mean_anchor[0])}, "
                     f"{fmt(result.mean_anchor[1])}]")
    else:
        lines.append("Mean Position\tn/a")
    if result.stats is not None:
        for attr, label in StatsSummary.FIELD_LABELS:
            lines.append(f"{label}\t{fmt(getattr(result.stats, attr))}")
    return lines


def population_stats_lines(pop: PopulationResult) -> list[str]:
    lines = ["Parameter\tMean\tStd"]
    if pop.stats_mean is None:
        return lines
    for attr, label in StatsSummary.FIELD_LABELS:
        mean = getattr(pop.stats_mean, attr)
        std = pop.stats_std.get(attr)
        lines.append(f"{label}\t{fmt(mean)}\t{fmt(std)}")
    return lines


def csv_lines(results: RunResults) -> list[str]:
    header = ["Sequence", "Arena", "Arena Name"] + \
        [label for _, label in StatsSummary.FIELD_LABELS]
    lines = [",".join(header)]
    for seq in results.sequences:
        for res in seq.arenas:
            row = [seq.name, str(res.arena.id + 1), res.arena.name]
            for attr, _ in StatsSummary.FIELD_LABELS:
                value = getattr(res.stats, attr) if res.stats else None
                row.append(fmt(value))
            lines.append(",".join(row))
    return lines


# ------------------------------------------------------------ tree writer

def _image_name(stem: str, config: ProjectConfig) -> str:
    return f"{stem}.jpg" if config["out.imgf"] == 1 else f"{stem}.png"


def _save_image(image, path: Path) -> None:
    if path.suffix == ".jpg":
        image.save(path, quality=92)
    else:
        image.save(path)


def _arena_images(res: ArenaResult, seq_dir: Path, suffix: str,
                  camera, config: ProjectConfig, style) -> None:
    if res.backdrop is None:
        return
    rect = res.arena.rect
    for edge in ("N", "W", "S", "E", "All"):
        grid = res.edge_grids.get(edge.upper())
        if grid is None:
            continue
        img = render_mod.render_heatmap(grid, edge.upper(), res.backdrop,
                                        rect, camera, res.corners, style)
        _save_image(img, seq_dir / _image_name(f"Dist_Edge_{edge}{suffix}",
                                               config))
    if res.exploration is not None:
        img = render_mod.render_exploration(res.exploration, res.backdrop,
                                            rect, camera, res.corners, style)
        _save_image(img, seq_dir / _image_name(f"Exploration{suffix}", config))
    if res.mean_grid is not None and res.mean_anchor is not None:
        img = render_mod.render_heatmap(res.mean_grid, "radial", res.backdrop,
                                        rect, camera, res.corners, style,
                                        anchor=res.mean_anchor)
        _save_image(img, seq_dir / _image_name(f"Dist_Mean_Pos{suffix}",
                                               config))
    if res.center_grid is not None:
        img = render_mod.render_heatmap(res.center_grid, "radial",
                                        res.backdrop, rect, camera,
                                        res.corners, style,
                                        anchor=res.corners.center)
        _save_image(img, seq_dir / _image_name(f"Dist_Center_Pos{suffix}",
                                               config))
    by_track: dict[int, list] = {}
    for p in res.points:
        by_track.setdefault(p.track, []).append(p)
    img = render_mod.render_trajectory(by_track, res.backdrop, rect, camera,
                                       style)
    _save_image(img, seq_dir / _image_name(f"Trajectory{suffix}", config))


def _population_images(pop: PopulationResult, project_dir: Path,
                       config: ProjectConfig, style) -> None:
    """Population renders on a flat virtual arena, 1 px per world unit."""
    import math

    from ..arena import Rect
    vw = max(int(math.ceil(pop.corners.width)), 8)
    vh = max(int(math.ceil(pop.corners.height)), 8)
    backdrop = render_mod.virtual_arena_backdrop(vw, vh, style)
    vcam = CameraModel.manual_scale(1.0, 1.0)
    vrect = Rect(0, 0, vw, vh)
    for edge in ("N", "W", "S", "E", "All"):
        grid = pop.edge_grids.get(edge.upper())
        if grid is None:
            continue
        img = render_mod.render_heatmap(grid, edge.upper(), backdrop, vrect,
                                        vcam, pop.corners, style)
        _save_image(img, project_dir / _image_name(f"Dist_Edge_{edge}",
                                                   config))
    if pop.exploration is not None:
        img = render_mod.render_exploration(pop.exploration, backdrop, vrect,
                                            vcam, pop.corners, style)
        _save_image(img, project_dir / _image_name("Exploration", config))
    if pop.mean_grid is not None and pop.points:
        ax = float(np.mean([p.x for p in pop.points]))
        ay = float(np.mean([p.y for p in pop.points]))
        img = render_mod.render_heatmap(pop.mean_grid, "radial", backdrop,
                                        vrect, vcam, pop.corners, style,
                                        anchor=(ax, ay))
        _save_image(img, project_dir / _image_name("Dist_Mean_Pos", config))
    if pop.center_grid is not None:
        img = render_mod.render_heatmap(pop.center_grid, "radial", backdrop,
                                        vrect, vcam, pop.corners, style,
                                        anchor=pop.corners.center)
        _save_image(img, project_dir / _image_name("Dist_Center_Pos", config))
    by_track: dict[int, list] = {}
    for p in pop.points:
        by_track.setdefault(p.track, []).append(p)
    img = render_mod.render_trajectory(by_track, backdrop, vrect, vcam, style)
    _save_image(img, project_dir / _image_name("Trajectory", config))


def write_project_files(results: RunResults, project_dir: Path) -> None:
    pname = results.config["out.pnam"]
    _write(project_dir / f"{pname}_Configuration.txt",
           write_configuration(results.config).splitlines())
    save_arenas(results.arenas, project_dir / f"{pname}_Arena.txt",
                project_dir / f"{pname}_ArenaNames.txt")
    save_calibrator(results.camera, project_dir / f"{pname}_Calibrator.txt")


def write_outputs(results: RunResults, project_dir,
                  style=None) -> list[Path]:
    """Write the whole output tree; returns the files written."""
    style = style or render_mod.RenderStyle()
    project_dir = Path(project_dir)
    project_dir.mkdir(parents=True, exist_ok=True)
    config = results.config
    pname = config["out.pnam"]
    camera = results.camera
    level = config["out.ftxt"]
    images = config["out.fjpg"] >= 1
    written: list[Path] = []

    def emit(path: Path, lines: list[str]) -> None:
        _write(path, lines)
        written.append(path)

    write_project_files(results, project_dir)

    tracking_files: list[Path] = []
    for seq in results.sequences:
        seq_dir = project_dir / seq.name
        seq_dir.mkdir(exist_ok=True)
        for res in seq.arenas:
            n = res.arena.id + 1
            k = res.arena.id
            if level >= 1:
                path = seq_dir / f"Tracking_{k}.txt"
                emit(path, tracking_rows(res.tracks, k, res.arena.rect))
                tracking_files.append(path)
                emit(seq_dir / f"Tracking_RealSpace_{n}.txt",
                     realspace_rows(res.points))
                emit(seq_dir / f"Stats_{n}.txt",
                     stats_lines(seq, res, camera.unit_name))
            if level >= 2:
                emit(seq_dir / f"Instant_Speed_{n}.txt",
                     series_rows(res.speeds))
                emit(seq_dir / f"Instant_Accel_{n}.txt",
                     series_rows(res.accels))
                if res.edge_grids:
                    emit(seq_dir / f"Dist_Edges_{n}.txt",
                         edge_table_lines(res.edge_grids))
                if res.exploration is not None:
                    emit(seq_dir / f"Exploration_{n}.txt",
                         exploration_table_lines(res.exploration))
                if res.mean_grid is not None:
                    emit(seq_dir / f"Dist_MeanPos_{n}.txt",
                         radial_table_lines(res.mean_grid))
                if res.center_grid is not None:
                    emit(seq_dir / f"Dist_CenterPos_{n}.txt",
                         radial_table_lines(res.center_grid))
                emit(seq_dir / f"Transitions_{n}.txt",
                     transition_rows(res.transitions))
                emit(seq_dir / f"FrozenEvents_{n}.txt",
                     frozen_rows(res.frozen))
            if images:
                _arena_images(res, seq_dir, f"_{n}", camera, config, style)

    pop = results.population
    if pop is not None:
        if images and pop.corners is not None:
            _population_images(pop, project_dir, config, style)
        if level >= 1:
            all_tracking = []
            for seq in results.sequences:
                for res in seq.arenas:
                    all_tracking.extend(
                        tracking_rows(res.tracks, res.arena.id,
                                      res.arena.rect))
            emit(project_dir / "Tracking.txt", all_tracking)
            emit(project_dir / "Tracking_RealSpace.txt",
                 realspace_rows(pop.points))
            emit(project_dir / "Stats.txt", population_stats_lines(pop))
        if level >= 2:
            emit(project_dir / "Instant_Speed.txt", series_rows(pop.speeds))
            emit(project_dir / "Instant_Accel.txt", series_rows(pop.accels))
            if pop.edge_grids:
                emit(project_dir / "Dist_Edges.txt",
                     edge_table_lines(pop.edge_grids))
            if pop.exploration is not None:
                emit(project_dir / "Exploration.txt",
                     exploration_table_lines(pop.exploration))
            if pop.mean_grid is not None:
                emit(project_dir / "Dist_MeanPos.txt",
                     radial_table_lines(pop.mean_grid))
            if pop.center_grid is not None:
                emit(project_dir / "Dist_CenterPos.txt",
                     radial_table_lines(pop.center_grid))
            emit(project_dir / "Transitions.txt",
                 transition_rows(pop.transitions))
            emit(project_dir / "FrozenEvents.txt", frozen_rows(pop.frozen))
        if level >= 1:
            emit(project_dir / f"{pname}.csv", csv_lines(results))

    emit(project_dir / f"{pname}_Output.txt",
         ["arenatrack output v1", str(len(tracking_files))]
         + [str(p.relative_to(project_dir)) for p in tracking_files])
    return written
