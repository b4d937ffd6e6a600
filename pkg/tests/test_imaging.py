"""Raster-primitive tests, each checked against an independent oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arenatrack import imaging


# ---------------------------------------------------------------- oracles

def brute_dilate(mask: np.ndarray, element: np.ndarray) -> np.ndarray:
    """Set dilation: union of element translates, clipped to the frame."""
    h, w = mask.shape
    eh, ew = element.shape
    cy, cx = eh // 2, ew // 2
    out = np.zeros_like(mask, dtype=bool)
    for y, x in zip(*np.nonzero(mask)):
        for dy in range(eh):
            for dx in range(ew):
                if not element[dy, dx]:
                    continue
                ny, nx = y + dy - cy, x + dx - cx
                if 0 <= ny < h and 0 <= nx < w:
                    out[ny, nx] = True
    return out


def brute_erode(mask: np.ndarray, element: np.ndarray) -> np.ndarray:
    """Set erosion: keep pixels whose whole (clipped) element fits."""
    h, w = mask.shape
    eh, ew = element.shape
    cy, cx = eh // 2, ew // 2
    out = np.zeros_like(mask, dtype=bool)
    for y in range(h):
        for x in range(w):
            keep = True
            for dy in range(eh):
                for dx in range(ew):
                    if not element[dy, dx]:
                        continue
                    ny, nx = y + dy - cy, x + dx - cx
                    if not (0 <= ny < h and 0 <= nx < w) or not mask[ny, nx]:
                        keep = False
                        break
                if not keep:
                    break
            out[y, x] = keep
    return out


def flood_fill_components(mask: np.ndarray) -> list[set]:
    """Independent 8-connectivity partition via explicit flood fill."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            stack = [(y, x)]
            seen[y, x] = True
            comp = set()
            while stack:
                cy, cx = stack.pop()
                comp.add((cx, cy))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        ny, nx = cy + dy, cx + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            stack.append((ny, nx))
            comps.append(comp)
    return comps


def otsu_exhaustive(image: np.ndarray) -> int:
    """Try all 256 thresholds, maximize between-class variance."""
    vals = image.ravel().astype(np.float64)
    best_t, best_v = 0, -1.0
    for t in range(256):
        lo = vals[vals < t]
        hi = vals[vals >= t]
        if len(lo) == 0 or len(hi) == 0:
            continue
        v = len(lo) * len(hi) * (lo.mean() - hi.mean()) ** 2
        if v > best_v + 1e-9:
            best_v, best_t = v, t
    return best_t


def brute_min_circle(points: np.ndarray) -> float:
    """Minimal enclosing radius by trying all pairs and triples."""
    n = len(points)
    best = None

    def covers(c, r):
        return all(np.linalg.norm(p - c) <= r + 1e-9 for p in points)

    if n == 1:
        return 0.0
    for i in range(n):
        for j in range(i + 1, n):
            c = (points[i] + points[j]) / 2
            r = np.linalg.norm(points[i] - c)
            if covers(c, r) and (best is None or r < best):
                best = r
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                circ = imaging._circumcircle(points[i], points[j], points[k])
                if circ is None:
                    continue
                c, r = circ
                if covers(c, r) and (best is None or r < best):
                    best = r
    return float(best)


# ---------------------------------------------------------- normalize/blur

def test_normalize_constant_frame_maps_to_zero():
    frame = np.full((8, 10), 128, np.uint8)
    out = imaging.normalize_and_blur(frame, 0, normalize=True)
    assert (out == 0).all()


def test_normalize_linear_stretch_midpoint():
    frame = np.full((4, 4), 100, np.uint8)
    frame[0, 0] = 50
    frame[3, 3] = 150
    out = imaging.normalize_and_blur(frame, 0, normalize=True)
    # round(255 * (100 - 50) / 100) = 128
    assert out[1, 1] == 128
    assert out[0, 0] == 0 and out[3, 3] == 255


def test_blur_changes_nonconstant_frame():
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, (32, 32), dtype=np.uint8)
    out = imaging.normalize_and_blur(frame, 5, normalize=False)
    assert out.shape == frame.shape
    assert not np.array_equal(out, frame)


def test_blur_matches_explicit_separable_convolution():
    rng = np.random.default_rng(1)
    frame = rng.integers(0, 256, (24, 24), dtype=np.uint8)
    out = imaging.normalize_and_blur(frame, 5)
    sigma = imaging.gaussian_sigma_for_size(5)
    k = np.exp(-0.5 * ((np.arange(5) - 2) / sigma) ** 2)
    k /= k.sum()
    padded = np.pad(frame.astype(np.float64), 2, mode="edge")
    tmp = np.zeros_like(padded)
    for i, kv in enumerate(k):
        tmp[:, 2:-2] += kv * padded[:, i:i + 24]
    ref = np.zeros((24, 24))
    for i, kv in enumerate(k):
        ref += kv * tmp[i:i + 24, 2:-2]
    assert np.abs(out.astype(np.int64) - np.round(ref)).max() <= 1


def test_even_gaussian_size_rejected():
    with pytest.raises(imaging.ImagingError):
        imaging.normalize_and_blur(np.zeros((4, 4), np.uint8), 4)


# ----------------------------------------------------------- thresholding

def test_threshold_all_bright_empty():
    frame = np.full((6, 6), 255, np.uint8)
    assert not imaging.threshold_below(frame, 90).any()


def test_threshold_strict_boundary():
    frame = np.array([[30, 90, 150]], np.uint8)
    mask = imaging.threshold_below(frame, 90)
    assert mask.tolist() == [[True, False, False]]


def test_threshold_zero_selects_otsu():
    rng = np.random.default_rng(2)
    frame = np.concatenate([
        rng.normal(60, 8, 500), rng.normal(190, 8, 500)
    ]).clip(0, 255).astype(np.uint8).reshape(25, 40)
    mask = imaging.threshold_below(frame, 0)
    t = otsu_exhaustive(frame)
    assert np.array_equal(mask, frame < t)


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_threshold_monotone(t1, t2, seed):
    if t1 > t2:
        t1, t2 = t2, t1
    frame = np.random.default_rng(seed).integers(0, 256, (8, 8), dtype=np.uint8)
    m1 = imaging.threshold_below(frame, max(t1, 1))
    m2 = imaging.threshold_below(frame, max(t2, 1))
    assert (m1 <= m2).all()
    full = m2 | ~m2
    assert full.all()


# ------------------------------------------------------------- morphology

def test_closing_fills_interior_hole():
    mask = np.zeros((7, 7), bool)
    mask[1:6, 1:6] = True
    mask[3, 3] = False
    closed = imaging.morphology(mask, "closing", 3, 1, 1)
    element = imaging.disc_element(3).astype(bool)
    expect = brute_erode(brute_dilate(mask, element), element)
    assert np.array_equal(closed, expect)
    assert closed[3, 3]


def test_closing_convex_square_unchanged():
    mask = np.zeros((20, 20), bool)
    mask[5:15, 5:15] = True
    closed = imaging.morphology(mask, "closing", 3, 1, 1)
    assert np.array_equal(closed, mask)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_morphology_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((12, 12)) < 0.4
    element = imaging.disc_element(3).astype(bool)
    for kind, expect in [
        ("dilation", brute_dilate(mask, element)),
        ("erosion", brute_erode(mask, element)),
        ("closing", brute_erode(brute_dilate(mask, element), element)),
        ("opening", brute_dilate(brute_erode(mask, element), element)),
    ]:
        got = imaging.morphology(mask, kind, 3, 1, 1)
        assert np.array_equal(got, expect), kind


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_closing_idempotent(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((32, 32)) < 0.35
    once = imaging.morphology(mask, "closing", 3, 1, 1)
    twice = imaging.morphology(once, "closing", 3, 1, 1)
    assert np.array_equal(once, twice)


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_duality_on_interior(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((16, 16)) < 0.5
    dil = imaging.morphology(mask, "dilation", 3, 1, 0)
    ero_comp = ~imaging.morphology(~mask, "erosion", 3, 0, 1)
    assert np.array_equal(dil[2:-2, 2:-2], ero_comp[2:-2, 2:-2])


def test_morphology_identity_cases():
    mask = np.random.default_rng(3).random((9, 9)) < 0.5
    assert np.array_equal(imaging.morphology(mask, "closing", 0, 1, 1), mask)
    assert np.array_equal(imaging.morphology(mask, "closing", 3, 0, 0), mask)


# ----------------------------------------------------- connected components

def test_components_empty_mask():
    assert imaging.connected_components(np.zeros((5, 5), bool)) == []


def test_components_diagonal_touch_is_one_blob():
    mask = np.zeros((4, 4), bool)
    mask[1, 1] = mask[2, 2] = True
    blobs = imaging.connected_components(mask)
    assert len(blobs) == 1
    assert blobs[0].area_px == 2


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_components_match_flood_fill(seed):
    mask = np.random.default_rng(seed).random((16, 16)) < 0.3
    blobs = imaging.connected_components(mask)
    expect = flood_fill_components(mask)
    got = [set(zip(b.xs.tolist(), b.ys.tolist())) for b in blobs]
    assert sorted(map(sorted, got)) == sorted(map(sorted, expect))
    assert sum(b.area_px for b in blobs) == int(mask.sum())


def test_component_centroid_and_circle():
    mask = np.zeros((10, 10), bool)
    mask[2:5, 3:7] = True  # 4 wide, 3 tall
    (blob,) = imaging.connected_components(mask)
    assert blob.centroid == (4.5, 3.0)
    c = blob.enclosing_circle
    pts = np.column_stack([blob.xs, blob.ys]).astype(float)
    d = np.linalg.norm(pts - np.array(c.center), axis=1)
    assert (d <= c.radius + 1e-9).all()


@given(st.integers(0, 10_000))
@settings(max_examples=20, deadline=None)
def test_enclosing_circle_minimal(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(1, 12)
    pts = rng.integers(0, 15, (n, 2)).astype(np.float64)
    pts = np.unique(pts, axis=0)
    circle = imaging.min_enclosing_circle(pts)
    d = np.linalg.norm(pts - np.array(circle.center), axis=1)
    assert (d <= circle.radius + 1e-9).all()
    if len(pts) >= 2:
        assert circle.radius <= brute_min_circle(pts) + 1e-7


def test_ellipse_axis_ratio_for_bar():
    mask = np.zeros((10, 110), bool)
    mask[3:7, 5:105] = True  # 100 x 4 bar
    (blob,) = imaging.connected_components(mask)
    expect = np.sqrt((100 ** 2 - 1) / (4 ** 2 - 1))
    assert blob.fitted_ellipse.axis_ratio == pytest.approx(expect, rel=1e-9)


# ------------------------------------------------------ polygon approximation

def test_polygon_rectangle_four_vertices():
    mask = np.zeros((30, 40), bool)
    mask[5:25, 5:35] = True
    contour = imaging.trace_contour(mask)
    poly = imaging.approximate_polygon(contour, 1.0)
    assert len(poly) == 4
    assert imaging.polygon_max_deviation(contour, poly) <= 1.0


def test_polygon_circle_within_tolerance():
    theta = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    contour = np.column_stack([100 * np.cos(theta), 100 * np.sin(theta)])
    poly = imaging.approximate_polygon(contour, 1.0)
    assert len(poly) < 60
    assert imaging.polygon_max_deviation(contour, poly) <= 1.0


def test_polygon_zero_tolerance_exact():
    contour = np.array([[0, 0], [5, 1], [9, 4], [4, 8], [1, 5]], float)
    poly = imaging.approximate_polygon(contour, 0.0)
    assert np.array_equal(poly, contour)


def test_polygon_too_few_points_rejected():
    with pytest.raises(imaging.ImagingError):
        imaging.approximate_polygon(np.array([[0, 0], [1, 1]], float), 1.0)
