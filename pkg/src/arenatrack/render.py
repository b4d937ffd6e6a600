"""Heat-map and trajectory rendering.

Zone frequencies are normalized to the grid maximum and mapped through a
piecewise-linear blue -> green -> yellow -> red scale (waypoints at
positions 0, 1/3, 2/3, 1), alpha-blended 50% over the arena backdrop;
zero-frequency zones show the backdrop untouched. Zone boundaries are
stroked in the configured line color/width. Everything is deterministic:
identical inputs produce byte-identical images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .analytics import ArenaCorners, ExplorationResult, TrajectoryPoint, ZoneGrid

SCALE_WAYPOINTS = [
    (0.0, (0, 0, 255)),
    (1.0 / 3.0, (0, 255, 0)),
    (2.0 / 3.0, (255, 255, 0)),
    (1.0, (255, 0, 0)),
]

TRACK_PALETTE = [
    (230, 25, 75), (60, 180, 75), (0, 130, 200), (245, 130, 48),
    (145, 30, 180), (70, 240, 240), (240, 50, 230), (128, 128, 0),
]


@dataclass(frozen=True)
class RenderStyle:
    zone_line_width: int = 1           # staL.widt
    zone_line_color: tuple = (0, 0, 0)  # staL.colr (RGB)
    trajectory_width: int = 1          # traL.widt
    population_background: tuple = (255, 255, 255)  # rea.bgnd (RGB)
    alpha: float = 0.5


def scale_color(position: float) -> tuple[int, int, int]:
    """Linear-in-RGB interpolation between the scale waypoints."""
    position = min(max(position, 0.0), 1.0)
    for (p0, c0), (p1, c1) in zip(SCALE_WAYPOINTS[:-1], SCALE_WAYPOINTS[1:]):
        if position <= p1:
            t = 0.0 if p1 == p0 else (position - p0) / (p1 - p0)
            return tuple(int(round(a + t * (b - a)))
                         for a, b in zip(c0, c1))
    return SCALE_WAYPOINTS[-1][1]


def _grayscale_to_rgb(backdrop: np.ndarray) -> np.ndarray:
    return np.repeat(backdrop[:, :, None], 3, axis=2).astype(np.float64)


def _pixel_world_grids(shape, rect, camera):
    ys, xs = np.mgrid[rect.y0:rect.y0 + shape[0], rect.x0:rect.x0 + shape[1]]
    wx, wy = camera.pixel_to_world(xs.astype(np.float64),
                                   ys.astype(np.float64))
    return np.asarray(wx), np.asarray(wy)


def _zone_index_map(kind: str, wx, wy, corners: ArenaCorners,
                    dst: float, nzones, anchor=None):
    """Per-pixel zone index using the same formulas as the statistics."""
    def line_d(a, b):
        (xa, ya), (xb, yb) = a, b
        num = np.abs((yb - ya) * wx - (xb - xa) * wy + xb * ya - yb * xa)
        den = math.hypot(xb - xa, yb - ya)
        return num / den if den else np.hypot(wx - xa, wy - ya)

    if kind == "N":
        dist = line_d(corners.nw, corners.ne)
    elif kind == "W":
        dist = line_d(corners.nw, corners.sw)
    elif kind == "S":
        dist = line_d(corners.sw, corners.se)
    elif kind == "E":
        dist = line_d(corners.ne, corners.se)
    elif kind == "ALL":
        dist = np.minimum.reduce([line_d(corners.nw, corners.ne),
                                  line_d(corners.nw, corners.sw),
                                  line_d(corners.sw, corners.se),
                                  line_d(corners.ne, corners.se)])
    elif kind == "radial":
        ax, ay = anchor
        dist = np.hypot(wx - ax, wy - ay)
    else:
        raise ValueError(f"unknown zone map kind {kind!r}")
    k = np.ceil(dist / dst).astype(np.int64) - 1
    np.clip(k, 0, nzones - 1, out=k)
    return k


def _blend_zones(rgb: np.ndarray, zone_idx: np.ndarray, freq: np.ndarray,
                 style: RenderStyle) -> np.ndarray:
    fmax = float(freq.max())
    if fmax > 0:
        colors = np.zeros((len(freq), 3))
        active = np.zeros(len(freq), dtype=bool)
        for i, f in enumerate(freq):
            if f > 0:
                colors[i] = scale_color(float(f) / fmax)
                active[i] = True
        mask = active[zone_idx]
        overlay = colors[zone_idx]
        rgb = rgb.copy()
        rgb[mask] = (1 - style.alpha) * rgb[mask] + style.alpha * overlay[mask]
    # Stroke zone boundaries where the index changes.
    edges = np.zeros(zone_idx.shape, dtype=bool)
    edges[:, 1:] |= zone_idx[:, 1:] != zone_idx[:, :-1]
    edges[1:, :] |= zone_idx[1:, :] != zone_idx[:-1, :]
    if style.zone_line_width > 1:
        from scipy import ndimage
        edges = ndimage.binary_dilation(
            edges, iterations=style.zone_line_width - 1)
    rgb[edges] = style.zone_line_color
    return rgb


def render_heatmap(grid: ZoneGrid, kind: str, backdrop: np.ndarray,
                   rect, camera, corners: ArenaCorners,
                   style: RenderStyle = RenderStyle(),
                   anchor=None) -> Image.Image:
    """Zone-frequency heat map over the arena backdrop.

    ``kind`` is one of N/W/S/E/ALL/radial; radial needs the anchor in
    world coordinates.
    """
    rgb = _grayscale_to_rgb(backdrop)
    wx, wy = _pixel_world_grids(backdrop.shape, rect, camera)
    zone_idx = _zone_index_map(kind, wx, wy, corners, grid.zone_size,
                               len(grid.counts), anchor)
    out = _blend_zones(rgb, zone_idx, grid.frequency, style)
    return Image.fromarray(np.clip(out + 0.5, 0, 255).astype(np.uint8))


def render_exploration(result: ExplorationResult, backdrop: np.ndarray,
                       rect, camera, corners: ArenaCorners,
                       style: RenderStyle = RenderStyle()) -> Image.Image:
    """Square-cell heat map; cells indexed by wall distances."""
    rgb = _grayscale_to_rgb(backdrop)
    wx, wy = _pixel_world_grids(backdrop.shape, rect, camera)
    dst = result.grid.zone_size

    def line_d(a, b):
        (xa, ya), (xb, yb) = a, b
        num = np.abs((yb - ya) * wx - (xb - xa) * wy + xb * ya - yb * xa)
        den = math.hypot(xb - xa, yb - ya)
        return num / den if den else np.hypot(wx - xa, wy - ya)

    rows, cols = result.grid.counts.shape
    r = np.clip((line_d(corners.nw, corners.ne) / dst).astype(np.int64),
                0, rows - 1)
    c = np.clip((line_d(corners.nw, corners.sw) / dst).astype(np.int64),
                0, cols - 1)
    zone_idx = r * cols + c
    out = _blend_zones(rgb, zone_idx, result.grid.frequency.ravel(), style)
    return Image.fromarray(np.clip(out + 0.5, 0, 255).astype(np.uint8))


def render_trajectory(points_by_track: dict[int, list[TrajectoryPoint]],
                      backdrop: np.ndarray, rect, camera,
                      style: RenderStyle = RenderStyle()) -> Image.Image:
    """Polyline per track over the backdrop, palette cycled by order."""
    rgb = np.clip(_grayscale_to_rgb(backdrop) + 0.5, 0, 255).astype(np.uint8)
    image = Image.fromarray(rgb)
    draw = ImageDraw.Draw(image)
    for cycle, track_id in enumerate(sorted(points_by_track)):
        pts = sorted(points_by_track[track_id], key=lambda p: p.frame)
        color = TRACK_PALETTE[cycle % len(TRACK_PALETTE)]
        xy = []
        for p in pts:
            px, py = camera.world_to_pixel(p.x, p.y)
            xy.append((px - rect.x0, py - rect.y0))
        if len(xy) >= 2:
            draw.line(xy, fill=color, width=style.trajectory_width)
        elif xy:
            draw.point(xy, fill=color)
    return image


def virtual_arena_backdrop(width_px: int, height_px: int,
                           style: RenderStyle = RenderStyle()) -> np.ndarray:
    """Flat backdrop for population renders (grayscale of rea.bgnd)."""
    level = int(round(sum(style.population_background) / 3))
    return np.full((height_px, width_px), level, dtype=np.uint8)
