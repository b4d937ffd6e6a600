"""Arena and tracking-area definition from an undistorted reference frame.

An arena is the minimal axis-aligned rectangle around one tracking area
(the bright uniform region animals move in). Rectangles are half-open
pixel boxes (x0, y0, x1, y1). Arenas are numbered row-major by rect
origin so numbering is deterministic; default names are "Arena1",
"Arena2", ... in that order.

Automatic mode segments bright regions on the whole frame; manual mode
segments inside user rectangles and keeps the largest region per rect,
optionally replaced by its minimum enclosing circle shrunk by a few
pixels (roi.fite / roi.redr).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import imaging


class ArenaDefinitionError(ValueError):
    """No usable tracking area could be produced."""


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def clipped(self, width: int, height: int) -> "Rect":
        return Rect(max(0, self.x0), max(0, self.y0),
                    min(width, self.x1), min(height, self.y1))

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


@dataclass(frozen=True)
class TrackingArea:
    """Valid-detection mask over the arena rect plus a shape descriptor."""

    mask: np.ndarray                       # bool, shape (rect.h, rect.w)
    polygon: np.ndarray | None = None      # (n, 2) full-frame (x, y)
    circle: tuple[float, float, float] | None = None  # cx, cy, radius

    @property
    def area_px(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class Arena:
    id: int
    name: str
    rect: Rect
    area: TrackingArea

    def crop(self, image: np.ndarray) -> np.ndarray:
        r = self.rect
        return image[r.y0:r.y1, r.x0:r.x1]


@dataclass(frozen=True)
class RoiParams:
    """Arena-definition knobs (threshold, closing, size/shape filters)."""

    thre: int = 150
    poly: float = 1.0
    elms: int = 7
    dilt: int = 1
    erot: int = 4
    mins: int = 100_000
    fite: bool = False
    redr: float = 1.0
    mode: int = 0  # 0 automatic, 1 manual
    rects: tuple = ()
    names: tuple = ()


def _closed_bright_mask(image: np.ndarray, params: RoiParams) -> np.ndarray:
    bright = imaging.threshold_at_least(image, params.thre)
    return imaging.morphology(bright, "closing", params.elms,
                              params.dilt, params.erot)


def _component_to_arena(blob: imaging.Blob, labels_shape, idx: int,
                        name: str, poly_tol: float) -> Arena:
    x0, y0, x1, y1 = blob.bbox
    rect = Rect(x0, y0, x1, y1)
    mask = np.zeros((rect.height, rect.width), dtype=bool)
    mask[blob.ys - y0, blob.xs - x0] = True
    polygon = None
    try:
        contour = imaging.trace_contour(mask)
        contour[:, 0] += x0
        contour[:, 1] += y0
        polygon = imaging.approximate_polygon(contour, poly_tol)
    except imaging.ImagingError:
        pass
    return Arena(idx, name, rect, TrackingArea(mask=mask, polygon=polygon))


def define_arenas_automatic(reference: np.ndarray,
                            params: RoiParams) -> list[Arena]:
    """Segment bright regions of the reference frame into arenas.

    Regions smaller than ``params.mins`` pixels are dropped; survivors
    are polygon-simplified with tolerance ``params.poly`` and ordered by
    (top, left) of their bounding rect.
    """
    closed = _closed_bright_mask(reference, params)
    blobs = imaging.connected_components(closed)
    big = [b for b in blobs if b.area_px >= params.mins]
    if not big:
        largest = max((b.area_px for b in blobs), default=0)
        raise ArenaDefinitionError(
            f"no arenas found: largest bright region has {largest} px, "
            f"minimum is {params.mins} (threshold {params.thre})")
    big.sort(key=lambda b: (b.bbox[1], b.bbox[0]))
    return [
        _component_to_arena(blob, closed.shape, i, f"Arena{i + 1}", params.poly)
        for i, blob in enumerate(big)
    ]


def _circle_area(rect: Rect, cx: float, cy: float, radius: float) -> TrackingArea:
    ys, xs = np.mgrid[rect.y0:rect.y1, rect.x0:rect.x1]
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2
    return TrackingArea(mask=mask, circle=(cx, cy, radius))


def define_arenas_manual(reference: np.ndarray, rects: list[Rect],
                         params: RoiParams,
                         names: list[str] | None = None,
                         ) -> tuple[list[Arena], dict[int, str]]:
    """Build one arena per user rectangle.

    Returns the successfully built arenas plus a map of rect index ->
    error message for rectangles without a usable bright region (other
    arenas are unaffected).
    """
    h, w = reference.shape
    arenas: list[Arena] = []
    errors: dict[int, str] = {}
    for i, rect in enumerate(rects):
        clipped = rect.clipped(w, h)
        if clipped.width <= 0 or clipped.height <= 0:
            errors[i] = "rectangle lies outside the frame"
            continue
        sub = reference[clipped.y0:clipped.y1, clipped.x0:clipped.x1]
        closed = _closed_bright_mask(sub, params)
        blobs = imaging.connected_components(closed)
        if not blobs:
            errors[i] = (f"no bright region above threshold {params.thre} "
                         f"inside rectangle")
            continue
        largest = max(blobs, key=lambda b: b.area_px)  # ties: first scanned
        name = names[i] if names and i < len(names) else f"Arena{i + 1}"
        if params.fite:
            circle = largest.enclosing_circle
            cx = circle.center[0] + clipped.x0
            cy = circle.center[1] + clipped.y0
            radius = max(circle.radius - params.redr, 0.0)
            if radius <= 0:
                errors[i] = "enclosing circle vanished after radius reduction"
                continue
            area = _circle_area(clipped, cx, cy, radius)
            arenas.append(Arena(len(arenas), name, clipped, area))
        else:
            mask = np.zeros((clipped.height, clipped.width), dtype=bool)
            mask[largest.ys, largest.xs] = True
            arenas.append(Arena(len(arenas), name, clipped,
                                TrackingArea(mask=mask)))
    arenas = [Arena(i, a.name, a.rect, a.area) for i, a in enumerate(arenas)]
    return arenas, errors


def define_arenas(reference: np.ndarray, params: RoiParams) -> list[Arena]:
    """Dispatch on ``params.mode`` (0 automatic, 1 manual)."""
    if params.mode == 0:
        return define_arenas_automatic(reference, params)
    rects = [r if isinstance(r, Rect) else Rect(*r) for r in params.rects]
    if not rects:
        raise ArenaDefinitionError("manual arena mode needs rectangles")
    arenas, errors = define_arenas_manual(
        reference, rects, params, list(params.names) or None)
    if errors and not arenas:
        detail = "; ".join(f"rect {i}: {msg}" for i, msg in errors.items())
        raise ArenaDefinitionError(f"no arenas found: {detail}")
    return arenas


# ------------------------------------------------------------ file format

def save_arenas(arenas: list[Arena], arena_path, names_path) -> None:
    """<p>_Arena.txt: count then one "x0 y0 x1 y1" line per arena;
    <p>_ArenaNames.txt: count then one name per line."""
    with open(str(arena_path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(arenas)}\n")
        for a in arenas:
            r = a.rect
            fh.write(f"{r.x0} {r.y0} {r.x1} {r.y1}\n")
    with open(str(names_path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(arenas)}\n")
        for a in arenas:
            fh.write(f"{a.name}\n")


def load_arena_rects(arena_path, names_path=None) -> tuple[list[Rect], list[str]]:
    with open(str(arena_path), "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ArenaDefinitionError(f"{arena_path}: empty arena file")
    try:
        count = int(lines[0])
    except ValueError:
        raise ArenaDefinitionError(f"{arena_path}:1: expected arena count")
    rects = []
    for i in range(count):
        try:
            parts = lines[i + 1].split()
            x0, y0, x1, y1 = (int(round(float(p))) for p in parts[:4])
        except (IndexError, ValueError):
            raise ArenaDefinitionError(
                f"{arena_path}:{i + 2}: expected 'x0 y0 x1 y1'")
        rects.append(Rect(x0, y0, x1, y1))
    names = [f"Arena{i + 1}" for i in range(count)]
    if names_path is not None:
        try:
            with open(str(names_path), "r", encoding="utf-8") as fh:
                nlines = [ln.strip() for ln in fh if ln.strip()]
            names = nlines[1:count + 1] or names
        except FileNotFoundError:
            pass
    return rects, names
