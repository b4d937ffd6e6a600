"""Real-space trajectories and the behavioral statistics derived from them.

Zone conventions: a distance ``d`` falls in zone k when
k * dst < d <= (k + 1) * dst (d = 0 counts as zone 0), with k clamped
into the configured zone count. Zone grids report three metrics: frame
counts, seconds (counts / fps) and frequency (counts / total points).

The exploration grid cell of a point is
(floor(dist_to_north_wall / dst), floor(dist_to_west_wall / dst)).

Trajectory point labels: 0 predicted, 1 confirmed, 2 interpolated over
an occlusion gap, 3 mirrored by the population projection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LABEL_PREDICTED = 0
LABEL_CONFIRMED = 1
LABEL_OCCLUDED = 2
LABEL_MIRROR = 3

SMOOTHING_WINDOW = 5


@dataclass(frozen=True)
class AnalyticsParams:
    normalize: bool = False       # ana.norm
    arena_orientation: int = 3   # ana.aror: 0 same, 1 horiz, 2 vert, 3 both
    zone_count: int = 30         # ana.nzon
    zone_size: float = 50.0      # ana.zsizq (mm)
    speed_sampling: int = 2      # ana.spsa
    mobility_speed: float = 1.0  # ana.mobs (mm/s)
    frozen_distance: float = 5.0  # ana.fmmt (mm)
    frozen_time: float = 3.0     # ana.ftim (s)
    transition_time: float = 7.0  # ana.ttim (s)
    interpolate: bool = False    # ana.inte
    max_gap: int = 25            # ana.intf (frames)
    smooth: bool = False         # ana.smoo
    min_visibility: float = 0.05  # ana.rvis


@dataclass
class TrajectoryPoint:
    time_s: float
    arena: int          # 1-based in every real-space output
    track: int
    x: float
    y: float
    label: int
    frame: int
    individual: int | None = None


@dataclass(frozen=True)
class ArenaCorners:
    """World-space corners, NW/NE/SW/SE."""

    nw: tuple[float, float]
    ne: tuple[float, float]
    sw: tuple[float, float]
    se: tuple[float, float]

    @property
    def center(self) -> tuple[float, float]:
        return ((self.nw[0] + self.ne[0] + self.sw[0] + self.se[0]) / 4.0,
                (self.nw[1] + self.ne[1] + self.sw[1] + self.se[1]) / 4.0)

    @property
    def width(self) -> float:
        return math.hypot(self.ne[0] - self.nw[0], self.ne[1] - self.nw[1])

    @property
    def height(self) -> float:
        return math.hypot(self.sw[0] - self.nw[0], self.sw[1] - self.nw[1])


def corners_from_rect(rect, camera) -> ArenaCorners:
    nw = camera.pixel_to_world(rect.x0, rect.y0)
    ne = camera.pixel_to_world(rect.x1, rect.y0)
    sw = camera.pixel_to_world(rect.x0, rect.y1)
    se = camera.pixel_to_world(rect.x1, rect.y1)
    return ArenaCorners(nw, ne, sw, se)


def to_real_space(track, arena_number: int, camera, fps: float,
                  individual: int | None = None) -> list[TrajectoryPoint]:
    """Convert a track's rows (confirmed + predicted) to world space."""
    points = []
    for row in track.rows:
        wx, wy = camera.pixel_to_world(row.x, row.y)
        points.append(TrajectoryPoint(
            time_s=row.frame / fps, arena=arena_number, track=track.id,
            x=wx, y=wy, label=row.label, frame=row.frame,
            individual=individual))
    return points


# ------------------------------------------------------------ postprocess

def _interpolate_track(points: list[TrajectoryPoint],
                       max_gap: int, fps: float) -> list[TrajectoryPoint]:
    out: list[TrajectoryPoint] = []
    for prev, cur in zip([None] + points[:-1], points):
        if prev is not None:
            missing = cur.frame - prev.frame - 1
            if 1 <= missing <= max_gap:
                for k in range(1, missing + 1):
                    t = k / (missing + 1)
                    frame = prev.frame + k
                    out.append(TrajectoryPoint(
                        time_s=frame / fps, arena=cur.arena, track=cur.track,
                        x=prev.x + t * (cur.x - prev.x),
                        y=prev.y + t * (cur.y - prev.y),
                        label=LABEL_OCCLUDED, frame=frame,
                        individual=cur.individual))
        out.append(cur)
    return out


def _smooth_track(points: list[TrajectoryPoint]) -> list[TrajectoryPoint]:
    if len(points) < 2:
        return points
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    half = SMOOTHING_WINDOW // 2
    out = []
    for i, p in enumerate(points):
        lo = max(0, i - half)
        hi = min(len(points), i + half + 1)
        out.append(replace(p, x=float(xs[lo:hi].mean()),
                           y=float(ys[lo:hi].mean())))
    return out


def postprocess(points: list[TrajectoryPoint], params: AnalyticsParams,
                fps: float) -> list[TrajectoryPoint]:
    """Per-track linear gap interpolation and moving-average smoothing.

    Both steps can be re-run on stored tracking files without redoing
    the analysis.
    """
    by_track: dict[tuple[int, int], list[TrajectoryPoint]] = {}
    for p in points:
        by_track.setdefault((p.arena, p.track), []).append(p)
    out: list[TrajectoryPoint] = []
    for key in sorted(by_track):
        series = sorted(by_track[key], key=lambda p: p.frame)
        if params.interpolate:
            series = _interpolate_track(series, params.max_gap, fps)
        if params.smooth:
            series = _smooth_track(series)
        out.extend(series)
    return out


# ------------------------------------------------------- speed / accel

@dataclass
class SeriesSample:
    time_s: float
    arena: int
    track: int
    value: float


def instantaneous_speed(points: list[TrajectoryPoint],
                        sampling: int) -> list[SeriesSample]:
    """Central-difference speed with sampling stride c per track."""
    c = max(1, int(sampling))
    out: list[SeriesSample] = []
    by_track: dict[tuple[int, int], list[TrajectoryPoint]] = {}
    for p in points:
        by_track.setdefault((p.arena, p.track), []).append(p)
    for key in sorted(by_track):
        pts = sorted(by_track[key], key=lambda p: p.frame)
        for i in range(c, len(pts) - c):
            a, b = pts[i - c], pts[i + c]
            dt = b.time_s - a.time_s
            if dt <= 0:
                continue
            value = math.hypot(b.x - a.x, b.y - a.y) / dt
            out.append(SeriesSample(pts[i].time_s, pts[i].arena,
                                    pts[i].track, value))
    return out


def instantaneous_accel(speeds: list[SeriesSample],
                        sampling: int) -> list[SeriesSample]:
    """Absolute speed change rate over the speed series (decelerations
    are positive too)."""
    c = max(1, int(sampling))
    out: list[SeriesSample] = []
    by_track: dict[tuple[int, int], list[SeriesSample]] = {}
    for s in speeds:
        by_track.setdefault((s.arena, s.track), []).append(s)
    for key in sorted(by_track):
        series = by_track[key]
        for i in range(c, len(series) - c):
            a, b = series[i - c], series[i + c]
            dt = b.time_s - a.time_s
            if dt <= 0:
                continue
            out.append(SeriesSample(series[i].time_s, series[i].arena,
                                    series[i].track,
                                    abs(b.value - a.value) / dt))
    return out


# ------------------------------------------------------------- zone grids

@dataclass
class ZoneGrid:
    label: str
    zone_size: float
    counts: np.ndarray          # 1D (bands/rings) or 2D (exploration)
    fps: float
    total: int                  # points binned

    @property
    def seconds(self) -> np.ndarray:
        return self.counts / self.fps

    @property
    def frequency(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.counts, dtype=np.float64)
        return self.counts / self.total


def _line_distance(px, py, a, b) -> np.ndarray:
    """Point-to-infinite-line distance through corner points a, b."""
    (xa, ya), (xb, yb) = a, b
    num = np.abs((yb - ya) * px - (xb - xa) * py + xb * ya - yb * xa)
    den = math.hypot(xb - xa, yb - ya)
    return num / den if den > 0 else np.hypot(px - xa, py - ya)


def _zone_of(dist: np.ndarray, dst: float, nzones: int) -> np.ndarray:
    k = np.ceil(dist / dst).astype(np.int64) - 1
    np.clip(k, 0, nzones - 1, out=k)
    return k


def edge_distances(points: list[TrajectoryPoint],
                   corners: ArenaCorners) -> dict[str, np.ndarray]:
    px = np.array([p.x for p in points])
    py = np.array([p.y for p in points])
    d = {
        "N": _line_distance(px, py, corners.nw, corners.ne),
        "W": _line_distance(px, py, corners.nw, corners.sw),
        "S": _line_distance(px, py, corners.sw, corners.se),
        "E": _line_distance(px, py, corners.ne, corners.se),
    }
    d["ALL"] = np.minimum.reduce([d["N"], d["W"], d["S"], d["E"]])
    return d


def edge_zone_histograms(points: list[TrajectoryPoint],
                         corners: ArenaCorners, dst: float, nzones: int,
                         fps: float) -> dict[str, ZoneGrid]:
    """Occupancy per distance band from each wall plus the nearest-wall
    ("ALL") variant."""
    grids: dict[str, ZoneGrid] = {}
    if not points:
        for name in ("N", "W", "S", "E", "ALL"):
            grids[name] = ZoneGrid(f"Edge {name}", dst,
                                   np.zeros(nzones, np.int64), fps, 0)
        return grids
    for name, dist in edge_distances(points, corners).items():
        zones = _zone_of(dist, dst, nzones)
        counts = np.bincount(zones, minlength=nzones)
        grids[name] = ZoneGrid(f"Edge {name}", dst, counts, fps, len(points))
    return grids


@dataclass
class ExplorationResult:
    grid: ZoneGrid              # 2D counts: rows from N wall, cols from W
    explored_areas: int
    number_of_areas: int

    @property
    def exploration_rate(self) -> float | None:
        if self.number_of_areas == 0:
            return None
        return self.explored_areas / self.number_of_areas


def exploration_grid(points: list[TrajectoryPoint], corners: ArenaCorners,
                     dst: float, fps: float,
                     normalize: bool = False) -> ExplorationResult:
    """Square-cell occupancy; cell = (floor(dN/dst), floor(dW/dst)).

    With normalization the grid covers only the detected extent instead
    of the full arena.
    """
    height = corners.height
    width = corners.width
    if points:
        d = edge_distances(points, corners)
        dn, dw = d["N"], d["W"]
    else:
        dn = dw = np.zeros(0)
    if normalize and len(dn):
        n_lo, n_hi = dn.min(), dn.max()
        w_lo, w_hi = dw.min(), dw.max()
        dn = dn - n_lo
        dw = dw - w_lo
        height = max(n_hi - n_lo, 1e-9)
        width = max(w_hi - w_lo, 1e-9)
    rows = max(1, math.ceil(round(height / dst, 9)))
    cols = max(1, math.ceil(round(width / dst, 9)))
    counts = np.zeros((rows, cols), dtype=np.int64)
    if len(dn):
        r = np.clip((dn / dst).astype(np.int64), 0, rows - 1)
        c = np.clip((dw / dst).astype(np.int64), 0, cols - 1)
        np.add.at(counts, (r, c), 1)
    grid = ZoneGrid("Exploration", dst, counts, fps, int(counts.sum()))
    return ExplorationResult(grid, int((counts > 0).sum()), rows * cols)


def radial_zone_histogram(points: list[TrajectoryPoint],
                          corners: ArenaCorners, anchor: str, dst: float,
                          fps: float) -> ZoneGrid:
    """Ring occupancy around the mean position or the arena center."""
    if anchor == "mean":
        if not points:
            return ZoneGrid("Dist Mean", dst, np.zeros(1, np.int64), fps, 0)
        ax = float(np.mean([p.x for p in points]))
        ay = float(np.mean([p.y for p in points]))
        label = "Dist Mean"
    elif anchor == "center":
        ax, ay = corners.center
        label = "Dist Center"
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    corner_d = [math.hypot(cx - ax, cy - ay)
                for cx, cy in (corners.nw, corners.ne, corners.sw, corners.se)]
    nzones = max(1, math.ceil(round(max(corner_d) / dst, 9)))
    if not points:
        return ZoneGrid(label, dst, np.zeros(nzones, np.int64), fps, 0)
    px = np.array([p.x for p in points])
    py = np.array([p.y for p in points])
    dist = np.hypot(px - ax, py - ay)
    zones = _zone_of(dist, dst, nzones)
    counts = np.bincount(zones, minlength=nzones)
    return ZoneGrid(label, dst, counts, fps, len(points))


# ------------------------------------------------- transitions & freezing

@dataclass
class TransitionEvent:
    time_s: float
    sequence: int
    arena: int
    track: int
    x: float
    y: float
    label: int      # 1 appears, 0 disappears


def detect_transitions(points: list[TrajectoryPoint], ttim: float,
                       video_start_s: float, video_end_s: float,
                       sequence: int = 0) -> list[TransitionEvent]:
    """Visibility gaps longer than ``ttim`` seconds become transition
    pairs; gaps against the video start/end produce single events."""
    events: list[TransitionEvent] = []
    by_track: dict[tuple[int, int], list[TrajectoryPoint]] = {}
    for p in points:
        by_track.setdefault((p.arena, p.track), []).append(p)
    for key in sorted(by_track):
        pts = sorted(by_track[key], key=lambda p: p.frame)
        first, last = pts[0], pts[-1]
        if first.time_s - video_start_s > ttim:
            events.append(TransitionEvent(first.time_s, sequence, first.arena,
                                          first.track, first.x, first.y, 1))
        for a, b in zip(pts[:-1], pts[1:]):
            if b.time_s - a.time_s > ttim:
                events.append(TransitionEvent(a.time_s, sequence, a.arena,
                                              a.track, a.x, a.y, 0))
                events.append(TransitionEvent(b.time_s, sequence, b.arena,
                                              b.track, b.x, b.y, 1))
        if video_end_s - last.time_s > ttim:
            events.append(TransitionEvent(last.time_s, sequence, last.arena,
                                          last.track, last.x, last.y, 0))
    events.sort(key=lambda e: (e.arena, e.track, e.time_s))
    return events


@dataclass
class FrozenEvent:
    time_s: float
    sequence: int
    arena: int
    track: int
    mean_x: float
    mean_y: float
    duration_s: float


def detect_frozen_events(points: list[TrajectoryPoint], fmmt: float,
                         ftim: float, sequence: int = 0) -> list[FrozenEvent]:
    """Maximal windows whose points stay within ``fmmt`` of the window's
    running mean for at least ``ftim`` seconds."""
    events: list[FrozenEvent] = []
    by_track: dict[tuple[int, int], list[TrajectoryPoint]] = {}
    for p in points:
        by_track.setdefault((p.arena, p.track), []).append(p)
    for key in sorted(by_track):
        pts = sorted(by_track[key], key=lambda p: p.frame)
        i = 0
        n = len(pts)
        while i < n:
            sx = sy = 0.0
            count = 0
            j = i
            while j < n:
                mx = (sx + pts[j].x) / (count + 1)
                my = (sy + pts[j].y) / (count + 1)
                if count and math.hypot(pts[j].x - mx, pts[j].y - my) >= fmmt:
                    break
                sx += pts[j].x
                sy += pts[j].y
                count += 1
                j += 1
            duration = pts[j - 1].time_s - pts[i].time_s if count else 0.0
            if count and duration >= ftim:
                events.append(FrozenEvent(
                    pts[i].time_s, sequence, pts[i].arena, pts[i].track,
                    sx / count, sy / count, duration))
                i = j
            else:
                i += 1
    return events


# ------------------------------------------------------------------ stats

@dataclass
class StatsSummary:
    av_speed: float | None
    av_accel: float | None
    mobility_rate: float | None
    visible_frames: int
    visible_time: float
    invisible_frames: int
    invisible_time: float
    first_visible_frame: int | None
    last_visible_frame: int | None
    visibility_rate: float | None
    invisibility_rate: float | None
    explored_areas: int
    number_of_areas: int
    exploration_rate: float | None
    total_distance: float
    transitions_to_white: int
    transitions_to_black: int
    frozen_count: int
    total_time_frozen: float
    average_time_frozen: float | None

    FIELD_LABELS = [
        ("av_speed", "Av. Speed"),
        ("av_accel", "Av. Accel"),
        ("mobility_rate", "Mobility Rate"),
        ("visible_frames", "Visible Frames"),
        ("visible_time", "Visible Time"),
        ("invisible_frames", "Invisible Frames"),
        ("invisible_time", "Invisible Time"),
        ("first_visible_frame", "First Visible Frame"),
        ("last_visible_frame", "Last Visible Frame"),
        ("visibility_rate", "Visibility Rate"),
        ("invisibility_rate", "Invisibility Rate"),
        ("explored_areas", "Explored Areas"),
        ("number_of_areas", "Number of Areas"),
        ("exploration_rate", "Exploration Rate"),
        ("total_distance", "Total Distance"),
        ("transitions_to_white", "Transitions to White"),
        ("transitions_to_black", "Transitions to Black"),
        ("frozen_count", "Number of Frozen Events"),
        ("total_time_frozen", "Total Time Frozen"),
        ("average_time_frozen", "Average Time Frozen"),
    ]


def total_distance(points: list[TrajectoryPoint]) -> float:
    dist = 0.0
    by_track: dict[tuple[int, int], list[TrajectoryPoint]] = {}
    for p in points:
        by_track.setdefault((p.arena, p.track), []).append(p)
    for pts in by_track.values():
        pts = sorted(pts, key=lambda p: p.frame)
        for a, b in zip(pts[:-1], pts[1:]):
            dist += math.hypot(b.x - a.x, b.y - a.y)
    return dist


def compute_stats(points: list[TrajectoryPoint],
                  speeds: list[SeriesSample],
                  accels: list[SeriesSample],
                  exploration: ExplorationResult,
                  transitions: list[TransitionEvent],
                  frozen: list[FrozenEvent],
                  analyzed_frames: int, fps: float,
                  mobility_speed: float) -> StatsSummary:
    confirmed = [p for p in points if p.label == LABEL_CONFIRMED]
    visible = len(confirmed)
    invisible = max(analyzed_frames - visible, 0)
    speed_values = [s.value for s in speeds]
    accel_values = [a.value for a in accels]
    frozen_total = sum(e.duration_s for e in frozen)
    return StatsSummary(
        av_speed=float(np.mean(speed_values)) if speed_values else None,
        av_accel=float(np.mean(accel_values)) if accel_values else None,
        mobility_rate=(float(np.mean([v > mobility_speed
                                      for v in speed_values]))
                       if speed_values else None),
        visible_frames=visible,
        visible_time=visible / fps,
        invisible_frames=invisible,
        invisible_time=invisible / fps,
        first_visible_frame=confirmed[0].frame if confirmed else None,
        last_visible_frame=confirmed[-1].frame if confirmed else None,
        visibility_rate=(visible / (visible + invisible)
                         if visible + invisible else None),
        invisibility_rate=(1.0 - visible / (visible + invisible)
                           if visible + invisible else None),
        explored_areas=exploration.explored_areas,
        number_of_areas=exploration.number_of_areas,
        exploration_rate=exploration.exploration_rate,
        total_distance=total_distance(points),
        transitions_to_white=sum(1 for e in transitions if e.label == 1),
        transitions_to_black=sum(1 for e in transitions if e.label == 0),
        frozen_count=len(frozen),
        total_time_frozen=frozen_total,
        average_time_frozen=frozen_total / len(frozen) if frozen else None,
    )


# --------------------------------------------------- population projection

def project_to_virtual_arena(points: list[TrajectoryPoint],
                             corners: ArenaCorners,
                             arena_center_px: tuple[float, float],
                             frame_size_px: tuple[int, int],
                             orientation: int,
                             normalize: bool,
                             visibility_rate: float | None,
                             min_visibility: float) -> list[TrajectoryPoint]:
    """Re-express one arena's points in a shared virtual arena.

    Coordinates become offsets from the arena's NW corner (or from the
    detected extremes when normalization applies). Mirror modes flip
    arenas sitting in the right/lower half of the frame; mirrored points
    are labeled as such.
    """
    if not points:
        return []
    xs = np.array([p.x for p in points])
    ys = np.array([p.y for p in points])
    apply_norm = normalize and (visibility_rate is None
                                or visibility_rate >= min_visibility)
    if apply_norm:
        x_off, y_off = xs.min(), ys.min()
        width = max(float(xs.max() - x_off), 1e-9)
        height = max(float(ys.max() - y_off), 1e-9)
    else:
        x_off, y_off = corners.nw
        width = corners.width
        height = corners.height
    flip_h = orientation in (1, 3) and \
        arena_center_px[0] > frame_size_px[0] / 2
    flip_v = orientation in (2, 3) and \
        arena_center_px[1] > frame_size_px[1] / 2
    out = []
    for p, x, y in zip(points, xs, ys):
        vx = x - x_off
        vy = y - y_off
        if flip_h:
            vx = width - vx
        if flip_v:
            vy = height - vy
        label = LABEL_MIRROR if (flip_h or flip_v) else p.label
        out.append(replace(p, x=float(vx), y=float(vy), label=label))
    return out
