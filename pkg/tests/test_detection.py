import itertools

import numpy as np
import pytest

from arenatrack.arena import Arena, Rect, TrackingArea
from arenatrack.detection import DetectionParams, detect, passes_filters
from arenatrack import imaging


def make_arena(width=200, height=160, x0=10, y0=20):
    rect = Rect(x0, y0, x0 + width, y0 + height)
    mask = np.ones((height, width), dtype=bool)
    return Arena(0, "Arena1", rect, TrackingArea(mask=mask))


def bright_frame_with_square(arena, size=20, at=(100, 80), value=40):
    frame = np.full((300, 300), 220, np.uint8)
    x = arena.rect.x0 + at[0]
    y = arena.rect.y0 + at[1]
    frame[y:y + size, x:x + size] = value
    return frame


def test_single_square_detected_at_center():
    arena = make_arena()
    frame = bright_frame_with_square(arena, size=20, at=(100, 80))
    params = DetectionParams(elms=3, dilt=1, erot=1)
    records = detect(frame, 0, arena, None, params)
    assert len(records) == 1
    rec = records[0]
    assert rec.size == pytest.approx(400, abs=30)
    cx_expect = arena.rect.x0 + 100 + 19 / 2
    cy_expect = arena.rect.y0 + 80 + 19 / 2
    assert abs(rec.centroid[0] - cx_expect) <= 0.5
    assert abs(rec.centroid[1] - cy_expect) <= 0.5
    assert arena.rect.contains(*rec.centroid)


def test_dust_speck_filtered_by_min_size():
    arena = make_arena()
    frame = bright_frame_with_square(arena, size=20, at=(100, 80))
    # 2x2 = 4 px speck, survives symmetric closing but not the filter
    frame[arena.rect.y0 + 10:arena.rect.y0 + 12,
          arena.rect.x0 + 10:arena.rect.x0 + 12] = 40
    params = DetectionParams(elms=0)
    records = detect(frame, 0, arena, None, params)
    assert len(records) == 1
    assert records[0].size >= 150


def test_elongated_bar_rejected_by_axis_ratio():
    arena = make_arena(width=220, height=100)
    frame = np.full((300, 300), 220, np.uint8)
    x, y = arena.rect.x0 + 20, arena.rect.y0 + 40
    frame[y:y + 4, x:x + 100] = 40  # 100x4 bar, area 400
    params = DetectionParams(elms=0, mash=5.0)
    assert detect(frame, 0, arena, None, params) == []
    relaxed = DetectionParams(elms=0, mash=30.0)
    assert len(detect(frame, 0, arena, None, relaxed)) == 1


def test_detection_respects_tracking_area_mask():
    arena = make_arena()
    masked = np.zeros_like(arena.area.mask)
    masked[:, :50] = True  # only the left strip is valid
    arena = Arena(0, "Arena1", arena.rect, TrackingArea(mask=masked))
    frame = bright_frame_with_square(arena, size=20, at=(100, 80))
    params = DetectionParams(elms=3, dilt=1, erot=1)
    assert detect(frame, 0, arena, None, params) == []


def test_detection_respects_foreground_mask():
    arena = make_arena()
    frame = bright_frame_with_square(arena, size=20, at=(100, 80))
    fg = np.zeros_like(arena.area.mask)
    params = DetectionParams(elms=3, dilt=1, erot=1)
    assert detect(frame, 0, arena, fg, params) == []
    fg[:] = True
    assert len(detect(frame, 0, arena, fg, params)) == 1


def test_survivors_ordered_by_descending_size():
    arena = make_arena()
    frame = np.full((300, 300), 220, np.uint8)
    frame[arena.rect.y0 + 10:arena.rect.y0 + 30,
          arena.rect.x0 + 10:arena.rect.x0 + 30] = 40   # 400 px
    frame[arena.rect.y0 + 60:arena.rect.y0 + 90,
          arena.rect.x0 + 60:arena.rect.x0 + 90] = 40   # 900 px
    params = DetectionParams(elms=0)
    records = detect(frame, 0, arena, None, params)
    sizes = [r.size for r in records]
    assert sizes == sorted(sizes, reverse=True)
    assert len(records) == 2


def test_filters_are_order_independent():
    rng = np.random.default_rng(5)
    mask = rng.random((40, 40)) < 0.3
    blobs = imaging.connected_components(mask)
    params = DetectionParams(filt=True, mins=2, maxs=50, minr=0.5, maxr=20,
                             mish=0.0, mash=8.0, minf=0.1)
    checks = {
        "size": lambda b: params.mins <= b.area_px <= params.maxs,
        "radius": lambda b: params.minr <= b.enclosing_circle.radius <= params.maxr,
        "ratio": lambda b: b.fitted_ellipse.axis_ratio <= params.mash,
        "fill": lambda b: b.fill_rate >= params.minf,
    }
    for blob in blobs:
        expect = passes_filters(blob, params)
        for perm in itertools.permutations(checks.values()):
            assert all(fn(blob) for fn in perm) == expect


def test_raising_threshold_monotone_support():
    arena = make_arena()
    frame = bright_frame_with_square(arena, size=20, at=(100, 80), value=100)
    params_low = DetectionParams(thre=110, elms=0, filt=False)
    params_high = DetectionParams(thre=150, elms=0, filt=False)
    low = detect(frame, 0, arena, None, params_low)
    high = detect(frame, 0, arena, None, params_high)
    support_low = {(x, y) for r in low
                   for x, y in zip(r.blob.xs.tolist(), r.blob.ys.tolist())}
    support_high = {(x, y) for r in high
                    for x, y in zip(r.blob.xs.tolist(), r.blob.ys.tolist())}
    assert support_low <= support_high


def test_otsu_threshold_mode_inside_arena():
    arena = make_arena()
    frame = bright_frame_with_square(arena, size=20, at=(100, 80), value=60)
    params = DetectionParams(thre=0, elms=0)
    records = detect(frame, 0, arena, None, params)
    assert len(records) == 1
    assert records[0].size == pytest.approx(400, abs=10)


def test_degenerate_ellipse_fill_rate_handling():
    arena = make_arena()
    frame = np.full((300, 300), 220, np.uint8)
    y = arena.rect.y0 + 50
    x = arena.rect.x0 + 20
    frame[y, x:x + 160] = 40  # 1-px-high line: degenerate minor axis
    no_fill = DetectionParams(elms=0, mins=100, minf=0.0)
    assert len(detect(frame, 0, arena, None, no_fill)) == 1
    with_fill = DetectionParams(elms=0, mins=100, minf=0.2)
    assert detect(frame, 0, arena, None, with_fill) == []


def test_min_max_validation():
    with pytest.raises(ValueError):
        DetectionParams(mins=100, maxs=50)
