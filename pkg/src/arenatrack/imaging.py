"""Low-level raster primitives shared by the whole pipeline.

All images are 8-bit grayscale numpy arrays of shape (height, width);
binary masks are boolean arrays of the same shape. Coordinates are
(x, y) = (column, row), with integer pixel centers, so the centroid of
a single pixel at column 10, row 3 is exactly (10.0, 3.0).

Conventions fixed here (they keep golden outputs stable):

* ``threshold_below`` uses strict ``<`` (dark objects on bright ground).
* Structuring elements are filled discs: a pixel offset (dx, dy) belongs
  to the element of size ``s`` iff dx^2 + dy^2 <= (s/2)^2.
* Morphology is frame-clipped set morphology: pixels outside the frame
  are background, so erosion shrinks regions touching the border.
* Gaussian blur sigma is derived from the kernel size as
  0.3 * ((size - 1) / 2 - 1) + 0.8, border replicated.
* Connected components use 8-connectivity.
* Normalizing a constant image yields an all-zero image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import cv2
import numpy as np
from scipy import ndimage


class ImagingError(ValueError):
    """Raised for invalid raster-primitive arguments."""


@dataclass(frozen=True)
class EnclosingCircle:
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class FittedEllipse:
    """Second-moment (covariance eigen-decomposition) ellipse fit.

    Semi-axes are 2*sqrt(eigenvalue) of the pixel-coordinate covariance,
    so a filled disc of radius r fits an ellipse of roughly that radius.
    ``major_r >= minor_r``; ``angle`` is the major-axis direction in
    radians, measured from +x toward +y.
    """

    center: tuple[float, float]
    major_r: float
    minor_r: float
    angle: float

    @property
    def area(self) -> float:
        return float(np.pi * self.major_r * self.minor_r)

    @property
    def axis_ratio(self) -> float:
        """major/minor radius; inf when the fit is degenerate."""
        if self.minor_r <= 0.0:
            return float("inf")
        return self.major_r / self.minor_r


@dataclass(eq=False)
class Blob:
    """One connected component of a binary mask.

    The enclosing circle and moment ellipse are computed lazily; most
    pipeline runs never enable the filters that need them.
    """

    xs: np.ndarray
    ys: np.ndarray
    centroid: tuple[float, float]
    area_px: int

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        """(x0, y0, x1, y1), half-open."""
        return (
            int(self.xs.min()),
            int(self.ys.min()),
            int(self.xs.max()) + 1,
            int(self.ys.max()) + 1,
        )

    @cached_property
    def enclosing_circle(self) -> EnclosingCircle:
        pts = np.column_stack([self.xs, self.ys]).astype(np.float64)
        return min_enclosing_circle(pts)

    @cached_property
    def fitted_ellipse(self) -> FittedEllipse:
        return fit_ellipse(self.xs.astype(np.float64),
                           self.ys.astype(np.float64))

    @property
    def fill_rate(self) -> float:
        """Pixel count over fitted-ellipse area; 0 for degenerate fits."""
        area = self.fitted_ellipse.area
        if area <= 0.0:
            return 0.0
        return self.area_px / area


def gaussian_sigma_for_size(size: int) -> float:
    """Sigma used for a Gaussian kernel of the given odd size."""
    return 0.3 * ((size - 1) / 2.0 - 1.0) + 0.8


def normalize_and_blur(image: np.ndarray, gaussian_size: int = 0,
                       normalize: bool = False) -> np.ndarray:
    """Optional linear contrast stretch followed by Gaussian smoothing.

    ``gaussian_size`` 0 disables smoothing; otherwise it must be an odd
    size >= 3. Normalization maps min -> 0 and max -> 255 (a constant
    image maps to all zeros). Rounding is half-up.
    """
    if gaussian_size != 0 and (gaussian_size < 3 or gaussian_size % 2 == 0):
        raise ImagingError(f"gaussian size must be 0 or odd >= 3, got {gaussian_size}")
    out = np.asarray(image, dtype=np.uint8)
    if normalize:
        lo = int(out.min())
        hi = int(out.max())
        if hi == lo:
            out = np.zeros_like(out)
        else:
            stretched = (out.astype(np.float64) - lo) * 255.0 / (hi - lo)
            out = np.floor(stretched + 0.5).astype(np.uint8)
    if gaussian_size > 0:
        sigma = gaussian_sigma_for_size(gaussian_size)
        out = cv2.GaussianBlur(out, (gaussian_size, gaussian_size), sigma,
                               borderType=cv2.BORDER_REPLICATE)
    return out


def otsu_threshold(image: np.ndarray) -> int:
    """Threshold maximizing between-class variance of the < / >= split.

    Returns the smallest maximizing threshold, so results are stable
    when several splits tie.
    """
    hist = np.bincount(np.asarray(image, dtype=np.uint8).ravel(), minlength=256)
    total = hist.sum()
    if total == 0:
        return 0
    values = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)[:-1].astype(np.float64)          # count below t, t = 1..255
    m0 = np.cumsum(hist * values)[:-1]                    # intensity sum below t
    w1 = total - w0
    m1 = float((hist * values).sum()) - m0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = np.where(w0 > 0, m0 / w0, 0.0)
        mu1 = np.where(w1 > 0, m1 / w1, 0.0)
    between = w0 * w1 * (mu0 - mu1) ** 2
    return int(np.argmax(between)) + 1


def threshold_below(image: np.ndarray, thre: int) -> np.ndarray:
    """Mask of pixels strictly darker than ``thre``; ``thre`` 0 = Otsu."""
    image = np.asarray(image, dtype=np.uint8)
    if thre == 0:
        thre = otsu_threshold(image)
    return image < thre


def threshold_at_least(image: np.ndarray, thre: int) -> np.ndarray:
    """Bright-region complement of :func:`threshold_below`."""
    return ~threshold_below(np.asarray(image, dtype=np.uint8), thre)


@lru_cache(maxsize=32)
def disc_element(size: int) -> np.ndarray:
    """Filled disc of diameter ``size`` (uint8, odd bounding box)."""
    if size < 1:
        raise ImagingError(f"element size must be >= 1, got {size}")
    half = size // 2
    r = np.arange(-half, half + 1)
    dx, dy = np.meshgrid(r, r)
    return ((dx * dx + dy * dy) <= (size / 2.0) ** 2).astype(np.uint8)


def _iterate(op, mask_u8: np.ndarray, kernel: np.ndarray, iters: int) -> np.ndarray:
    if iters > 0:
        mask_u8 = op(mask_u8, kernel, iterations=iters,
                     borderType=cv2.BORDER_CONSTANT, borderValue=0)
    return mask_u8


def morphology(mask: np.ndarray, kind: str, element_size: int,
               dilate_iters: int, erode_iters: int) -> np.ndarray:
    """Binary open/close/dilate/erode with a disc structuring element.

    ``element_size`` 0 or both iteration counts 0 leave the mask
    unchanged. Closing dilates then erodes; opening erodes then dilates.
    """
    if kind not in ("opening", "closing", "dilation", "erosion"):
        raise ImagingError(f"unknown morphology kind {kind!r}")
    if element_size == 0 or (dilate_iters == 0 and erode_iters == 0):
        return np.asarray(mask, dtype=bool).copy()
    kernel = disc_element(element_size)
    m = np.asarray(mask, dtype=np.uint8)
    if kind == "closing":
        m = _iterate(cv2.dilate, m, kernel, dilate_iters)
        m = _iterate(cv2.erode, m, kernel, erode_iters)
    elif kind == "opening":
        m = _iterate(cv2.erode, m, kernel, erode_iters)
        m = _iterate(cv2.dilate, m, kernel, dilate_iters)
    elif kind == "dilation":
        m = _iterate(cv2.dilate, m, kernel, dilate_iters)
    else:
        m = _iterate(cv2.erode, m, kernel, erode_iters)
    return m.astype(bool)


_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def _min_circle_two(p, q) -> tuple[tuple[float, float], float]:
    cx = (p[0] + q[0]) / 2.0
    cy = (p[1] + q[1]) / 2.0
    return (cx, cy), math.hypot(p[0] - cx, p[1] - cy)


def _circumcircle(a, b, c):
    d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1])
               + c[0] * (a[1] - b[1]))
    if abs(d) < 1e-12:
        return None
    a2 = a[0] * a[0] + a[1] * a[1]
    b2 = b[0] * b[0] + b[1] * b[1]
    c2 = c[0] * c[0] + c[1] * c[1]
    ux = (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d
    uy = (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d
    return (ux, uy), math.hypot(a[0] - ux, a[1] - uy)


def _row_extremes(points: np.ndarray) -> np.ndarray:
    """Keep only the min/max-x point of every row; contains the hull."""
    if len(points) <= 64:
        return points
    ys = points[:, 1]
    order = np.lexsort((points[:, 0], ys))
    pts = points[order]
    row_start = np.r_[True, pts[1:, 1] != pts[:-1, 1]]
    firsts = pts[row_start]
    lasts = pts[np.r_[row_start[1:], True]]
    return np.unique(np.vstack([firsts, lasts]), axis=0)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull; handles collinear/degenerate inputs."""
    pts = np.unique(_row_extremes(points), axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return np.array(hull) if hull else pts


def min_enclosing_circle(points: np.ndarray) -> EnclosingCircle:
    """Exact minimal enclosing circle of a point set (Welzl on the hull).

    Deterministic: points are processed in a fixed order, so repeated
    calls produce bit-identical results.
    """
    pts_arr = np.asarray(points, dtype=np.float64)
    if pts_arr.ndim != 2 or len(pts_arr) == 0:
        raise ImagingError("min_enclosing_circle needs a non-empty (n, 2) array")
    pts = [(float(x), float(y)) for x, y in _convex_hull(pts_arr)]
    eps = 1e-9

    def contains(cx, cy, radius, p):
        return math.hypot(p[0] - cx, p[1] - cy) <= radius + eps

    (cx, cy), radius = pts[0], 0.0
    for i, p in enumerate(pts):
        if contains(cx, cy, radius, p):
            continue
        (cx, cy), radius = p, 0.0
        for j in range(i):
            q = pts[j]
            if contains(cx, cy, radius, q):
                continue
            (cx, cy), radius = _min_circle_two(p, q)
            for k in range(j):
                s = pts[k]
                if contains(cx, cy, radius, s):
                    continue
                circ = _circumcircle(p, q, s)
                if circ is None:
                    # Collinear triple: widest pair's diameter circle.
                    best = None
                    for u, v in ((p, q), (p, s), (q, s)):
                        c2, r2 = _min_circle_two(u, v)
                        if best is None or r2 > best[1]:
                            best = (c2, r2)
                    (cx, cy), radius = best
                else:
                    (cx, cy), radius = circ
    return EnclosingCircle((cx, cy), float(radius))


def fit_ellipse(xs: np.ndarray, ys: np.ndarray) -> FittedEllipse:
    """Ellipse from pixel-coordinate second moments."""
    cx = float(xs.mean())
    cy = float(ys.mean())
    dx = xs - cx
    dy = ys - cy
    n = len(xs)
    cov = np.array([[dx @ dx, dx @ dy], [dx @ dy, dy @ dy]]) / n
    evals, evecs = np.linalg.eigh(cov)
    minor = 2.0 * float(np.sqrt(max(evals[0], 0.0)))
    major = 2.0 * float(np.sqrt(max(evals[1], 0.0)))
    vx, vy = evecs[:, 1]
    return FittedEllipse((cx, cy), major, minor, float(np.arctan2(vy, vx)))


def connected_components(mask: np.ndarray) -> list[Blob]:
    """8-connected components of a binary mask, largest-to-no particular
    order (label order); each with centroid, enclosing circle and
    moment-fit ellipse."""
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    blobs: list[Blob] = []
    if count == 0:
        return blobs
    slices = ndimage.find_objects(labels)
    for idx, sl in enumerate(slices, start=1):
        sub = labels[sl] == idx
        ys_local, xs_local = np.nonzero(sub)
        xs = xs_local + sl[1].start
        ys = ys_local + sl[0].start
        blobs.append(Blob(
            xs=xs, ys=ys,
            centroid=(float(xs.mean()), float(ys.mean())),
            area_px=int(len(xs)),
        ))
    return blobs


def trace_contour(mask: np.ndarray) -> np.ndarray:
    """Outer boundary of the largest-area truthy region as an ordered
    (n, 2) array of (x, y) pixel coordinates (Moore-neighbor trace,
    clockwise, starting at the topmost-leftmost pixel)."""
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise ImagingError("cannot trace contour of an empty mask")
    start_i = np.lexsort((xs, ys))[0]
    start = (int(xs[start_i]), int(ys[start_i]))
    h, w = mask.shape

    def is_set(x, y):
        return 0 <= x < w and 0 <= y < h and mask[y, x]

    # Moore neighborhood in clockwise order starting from W.
    nbrs = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)]
    contour = [start]
    prev_dir = 0  # came from the west
    cur = start
    while True:
        found = False
        for step in range(8):
            d = (prev_dir + step) % 8
            nx, ny = cur[0] + nbrs[d][0], cur[1] + nbrs[d][1]
            if is_set(nx, ny):
                contour.append((nx, ny))
                cur = (nx, ny)
                # Backtrack: next scan starts just after the direction
                # pointing back at the previous pixel.
                prev_dir = (d + 5) % 8
                found = True
                break
        if not found:  # isolated pixel
            break
        if cur == start and len(contour) > 2:
            break
    if len(contour) > 1 and contour[-1] == contour[0]:
        contour.pop()
    return np.array(contour, dtype=np.float64)


def _perp_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    norm = np.linalg.norm(ab)
    if norm < 1e-12:
        return np.linalg.norm(points - a, axis=1)
    rel = points - a
    return np.abs(ab[0] * rel[:, 1] - ab[1] * rel[:, 0]) / norm


def _douglas_peucker(points: np.ndarray, tol: float) -> np.ndarray:
    if len(points) <= 2:
        return points
    d = _perp_distances(points[1:-1], points[0], points[-1])
    imax = int(np.argmax(d))
    if d[imax] > tol:
        left = _douglas_peucker(points[: imax + 2], tol)
        right = _douglas_peucker(points[imax + 1:], tol)
        return np.vstack([left[:-1], right])
    return np.vstack([points[0], points[-1]])


def approximate_polygon(contour: np.ndarray, tolerance: float) -> np.ndarray:
    """Douglas-Peucker simplification of a closed contour.

    Every input point stays within ``tolerance`` of the returned polygon.
    ``tolerance`` 0 returns the contour unchanged so exact shapes can be
    round-tripped.
    """
    pts = np.asarray(contour, dtype=np.float64)
    if len(pts) < 3:
        raise ImagingError(f"contour needs at least 3 points, got {len(pts)}")
    if tolerance < 0:
        raise ImagingError(f"tolerance must be >= 0, got {tolerance}")
    if tolerance == 0:
        return pts.copy()
    # Split the closed curve at the two mutually farthest of
    # (start, farthest-from-start) to anchor the recursion.
    d0 = np.linalg.norm(pts - pts[0], axis=1)
    far = int(np.argmax(d0))
    if far == 0:
        return pts[:1].copy()
    first = _douglas_peucker(pts[: far + 1], tolerance)
    second = _douglas_peucker(np.vstack([pts[far:], pts[:1]]), tolerance)
    return np.vstack([first[:-1], second[:-1]])


def polygon_max_deviation(contour: np.ndarray, polygon: np.ndarray) -> float:
    """Max distance from contour points to the closed polygon boundary."""
    contour = np.asarray(contour, dtype=np.float64)
    polygon = np.asarray(polygon, dtype=np.float64)
    worst = 0.0
    closed = np.vstack([polygon, polygon[:1]])
    dmin = np.full(len(contour), np.inf)
    for a, b in zip(closed[:-1], closed[1:]):
        ab = b - a
        denom = float(ab @ ab)
        if denom < 1e-12:
            d = np.linalg.norm(contour - a, axis=1)
        else:
            t = np.clip(((contour - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d = np.linalg.norm(contour - proj, axis=1)
        dmin = np.minimum(dmin, d)
    worst = float(dmin.max()) if len(dmin) else 0.0
    return worst
