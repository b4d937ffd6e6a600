import numpy as np
import pytest

from arenatrack import imaging
from arenatrack.arena import (Arena, ArenaDefinitionError, Rect, RoiParams,
                              define_arenas_automatic, define_arenas_manual,
                              load_arena_rects, save_arenas)


def four_square_frame():
    frame = np.full((800, 800), 30, np.uint8)
    squares = [(50, 50), (450, 50), (50, 450), (450, 450)]
    for x, y in squares:
        frame[y:y + 300, x:x + 300] = 220
    return frame, squares


def test_automatic_four_squares_exact_rects():
    frame, squares = four_square_frame()
    # Symmetric closing leaves the convex squares untouched, so the
    # rects can be checked analytically.
    params = RoiParams(thre=150, poly=1, elms=7, dilt=1, erot=1, mins=10_000)
    arenas = define_arenas_automatic(frame, params)
    assert len(arenas) == 4
    got = sorted((a.rect.x0, a.rect.y0, a.rect.x1, a.rect.y1) for a in arenas)
    expect = sorted((x, y, x + 300, y + 300) for x, y in squares)
    assert got == expect
    # Row-major ordering and 1-based default names.
    assert [a.name for a in arenas] == ["Arena1", "Arena2", "Arena3", "Arena4"]
    assert arenas[0].rect.y0 <= arenas[1].rect.y0


def test_automatic_default_closing_shrinks_predictably():
    frame, _ = four_square_frame()
    params = RoiParams(thre=150, poly=1, elms=7, dilt=1, erot=4, mins=10_000)
    arenas = define_arenas_automatic(frame, params)
    assert len(arenas) == 4
    # Net 3 erosions with a disc of diameter 7 (radius 3) shrink each
    # side by 9 px: verified against direct morphology on one square.
    bright = imaging.threshold_at_least(frame, 150)
    closed = imaging.morphology(bright, "closing", 7, 1, 4)
    blobs = imaging.connected_components(closed)
    expect = sorted(b.bbox for b in blobs if b.area_px >= 10_000)
    got = sorted((a.rect.x0, a.rect.y0, a.rect.x1, a.rect.y1) for a in arenas)
    assert got == expect
    assert got[0][0] == 50 + 9


def test_automatic_rects_do_not_overlap():
    frame, _ = four_square_frame()
    params = RoiParams(thre=150, poly=1, elms=7, dilt=1, erot=1, mins=10_000)
    arenas = define_arenas_automatic(frame, params)
    for i, a in enumerate(arenas):
        for b in arenas[i + 1:]:
            ra, rb = a.rect, b.rect
            assert ra.x1 <= rb.x0 or rb.x1 <= ra.x0 or \
                ra.y1 <= rb.y0 or rb.y1 <= ra.y0


def test_automatic_all_dark_frame_errors():
    frame = np.full((200, 200), 20, np.uint8)
    with pytest.raises(ArenaDefinitionError, match="no arenas found"):
        define_arenas_automatic(frame, RoiParams(mins=100))


def test_automatic_small_region_errors_with_diagnostics():
    frame = np.full((200, 200), 20, np.uint8)
    frame[50:60, 50:60] = 220
    with pytest.raises(ArenaDefinitionError, match="largest bright region"):
        define_arenas_automatic(frame, RoiParams(elms=3, dilt=1, erot=1,
                                                 mins=1000))


def test_closing_containment_invariant():
    frame, _ = four_square_frame()
    params = RoiParams(thre=150, poly=1, elms=7, dilt=1, erot=4, mins=10_000)
    arenas = define_arenas_automatic(frame, params)
    bright = imaging.threshold_at_least(frame, 150)
    dilated = imaging.morphology(bright, "dilation", params.elms,
                                 params.dilt, 0)
    for a in arenas:
        r = a.rect
        sub = dilated[r.y0:r.y1, r.x0:r.x1]
        assert (a.area.mask <= sub).all()


def test_polygon_boundary_deviation_bound():
    frame = np.full((300, 300), 20, np.uint8)
    ys, xs = np.mgrid[0:300, 0:300]
    frame[(xs - 150) ** 2 + (ys - 150) ** 2 <= 100 ** 2] = 220
    params = RoiParams(thre=150, poly=2.0, elms=3, dilt=1, erot=1, mins=1000)
    (arena,) = define_arenas_automatic(frame, params)
    assert arena.area.polygon is not None
    contour = imaging.trace_contour(arena.area.mask).astype(float)
    contour[:, 0] += arena.rect.x0
    contour[:, 1] += arena.rect.y0
    assert imaging.polygon_max_deviation(contour, arena.area.polygon) <= 2.0


def disc_frame(cx=100, cy=90, radius=60):
    frame = np.full((200, 220), 20, np.uint8)
    ys, xs = np.mgrid[0:200, 0:220]
    frame[(xs - cx) ** 2 + (ys - cy) ** 2 <= radius ** 2] = 220
    return frame


def test_manual_fit_circle_radius_reduction():
    frame = disc_frame()
    params = RoiParams(thre=150, elms=3, dilt=1, erot=1, fite=True, redr=1)
    arenas, errors = define_arenas_manual(
        frame, [Rect(10, 10, 210, 190)], params)
    assert not errors
    (arena,) = arenas
    assert arena.area.circle is not None
    cx, cy, r = arena.area.circle
    assert abs(cx - 100) <= 0.6 and abs(cy - 90) <= 0.6
    assert abs(r - (60 - 1)) <= 0.6


def test_manual_largest_component_only():
    frame = np.full((120, 200), 20, np.uint8)
    frame[20:60, 20:80] = 220     # 40x60 = 2400 px
    frame[70:90, 120:150] = 220   # 20x30 = 600 px
    params = RoiParams(thre=150, elms=3, dilt=1, erot=1, fite=False)
    arenas, errors = define_arenas_manual(frame, [Rect(0, 0, 200, 120)], params)
    assert not errors
    (arena,) = arenas
    assert arena.area.area_px == pytest.approx(2400, abs=200)
    ys, xs = np.nonzero(arena.area.mask)
    assert xs.max() + arena.rect.x0 < 100  # second region excluded


def test_manual_without_fit_keeps_component_mask():
    frame = disc_frame()
    params = RoiParams(thre=150, elms=3, dilt=1, erot=1, fite=False)
    arenas, _ = define_arenas_manual(frame, [Rect(10, 10, 210, 190)], params)
    (arena,) = arenas
    expect = imaging.morphology(
        imaging.threshold_at_least(frame[10:190, 10:210], 150),
        "closing", 3, 1, 1)
    assert np.array_equal(arena.area.mask, expect)


def test_manual_per_rect_errors_do_not_poison_others():
    frame = disc_frame()
    params = RoiParams(thre=150, elms=3, dilt=1, erot=1)
    arenas, errors = define_arenas_manual(
        frame, [Rect(0, 0, 30, 30), Rect(10, 10, 210, 190)], params)
    assert len(arenas) == 1
    assert 0 in errors and "no bright region" in errors[0]
    assert arenas[0].id == 0


def test_arena_file_roundtrip(tmp_path):
    frame, _ = four_square_frame()
    params = RoiParams(thre=150, poly=1, elms=7, dilt=1, erot=1, mins=10_000)
    arenas = define_arenas_automatic(frame, params)
    apath = tmp_path / "p_Arena.txt"
    npath = tmp_path / "p_ArenaNames.txt"
    save_arenas(arenas, apath, npath)
    lines = apath.read_text().splitlines()
    assert lines[0] == "4"
    assert len(lines) == 5 and len(lines[1].split()) == 4
    rects, names = load_arena_rects(apath, npath)
    assert [(r.x0, r.y0, r.x1, r.y1) for r in rects] == \
        [(a.rect.x0, a.rect.y0, a.rect.x1, a.rect.y1) for a in arenas]
    assert names == [a.name for a in arenas]
