import numpy as np
import pytest

from arenatrack.calibration import distort_point
from arenatrack.synth import (ArenaSpec, BlobSpec, SceneError, SceneRenderer,
                              SceneSpec, blob_position, generate_scene,
                              parse_scene_spec, scene_truth, write_scene_spec,
                              _scene_camera)


def simple_spec(**kwargs):
    defaults = dict(
        width=300, height=200, fps=25, frames=40, seed=3, noise_sigma=0.0,
        arenas=(ArenaSpec((20, 20, 280, 180)),),
        blobs=(BlobSpec(arena=1, radius=8, texture="uniform", intensity=50,
                        path="linear", params=(60.0, 70.0, 1.5, 0.5)),))
    defaults.update(kwargs)
    return SceneSpec(**defaults)


def test_truth_positions_match_path_analytically():
    spec = simple_spec()
    _, truth = generate_scene(spec)
    for p in truth:
        x, y = blob_position(spec, spec.blobs[0], p.frame)
        assert (p.x, p.y) == (x, y)
        assert p.label == 1
    assert truth[5].x == pytest.approx(60.0 + 1.5 * 5)


def test_same_seed_byte_identical_frames():
    spec = simple_spec(noise_sigma=3.0)
    a = SceneRenderer(spec)
    b = SceneRenderer(spec)
    for i in (0, 7, 21):
        assert a.frame(i).tobytes() == b.frame(i).tobytes()
    other = SceneRenderer(simple_spec(noise_sigma=3.0, seed=4))
    assert a.frame(0).tobytes() != other.frame(0).tobytes()


def test_rendered_centroid_subpixel_accuracy():
    spec = simple_spec()
    renderer = SceneRenderer(spec)
    for i in (0, 3, 11):
        frame = renderer.frame(i).astype(np.float64)
        cx, cy = blob_position(spec, spec.blobs[0], i)
        weights = np.clip(210.0 - frame, 0, None)  # darkness vs arena level
        ys, xs = np.mgrid[0:spec.height, 0:spec.width]
        x0, y0 = int(cx) - 15, int(cy) - 15
        sub = (slice(y0, y0 + 30), slice(x0, x0 + 30))
        w = weights[sub]
        mx = (w * xs[sub]).sum() / w.sum()
        my = (w * ys[sub]).sum() / w.sum()
        assert np.hypot(mx - cx, my - cy) < 0.2


def test_occlusion_intervals_marked():
    spec = simple_spec(blobs=(
        BlobSpec(arena=1, radius=8, intensity=50, path="linear",
                 params=(60.0, 100.0, 2.0, 0.0)),
        BlobSpec(arena=1, radius=8, intensity=50, path="linear",
                 params=(180.0, 100.0, -2.0, 0.0)),
    ), frames=60)
    truth = scene_truth(spec)
    # Blobs meet at x=120 around frame 30; overlap when distance < 16.
    occluded_frames = {p.frame for p in truth if p.label == 2}
    assert occluded_frames
    for f in occluded_frames:
        a = blob_position(spec, spec.blobs[0], f)
        b = blob_position(spec, spec.blobs[1], f)
        assert np.hypot(a[0] - b[0], a[1] - b[1]) < 16
    for p in truth:
        if p.frame not in occluded_frames:
            assert p.label == 1


def test_bounce_keeps_blob_inside_arena():
    spec = simple_spec(frames=500, blobs=(
        BlobSpec(arena=1, radius=8, intensity=50, path="linear",
                 params=(60.0, 70.0, 7.3, 5.1)),))
    lo_x, hi_x = 20 + 8 + 3, 280 - 8 - 3
    lo_y, hi_y = 20 + 8 + 3, 180 - 8 - 3
    for f in range(500):
        x, y = blob_position(spec, spec.blobs[0], f)
        assert lo_x <= x <= hi_x
        assert lo_y <= y <= hi_y


def test_distorted_centroids_follow_forward_map():
    spec = simple_spec(k1=0.1, noise_sigma=0.0)
    renderer = SceneRenderer(spec)
    cam = _scene_camera(spec)
    for i in (0, 10):
        frame = renderer.frame(i).astype(np.float64)
        cx, cy = blob_position(spec, spec.blobs[0], i)
        xn, yn = cam.normalize(cx, cy)
        xd, yd = distort_point(float(xn), float(yn), cam.distortion)
        ex, ey = cam.denormalize(xd, yd)
        weights = np.clip(210.0 - frame, 0, None)
        ys, xs = np.mgrid[0:spec.height, 0:spec.width]
        x0, y0 = int(ex) - 15, int(ey) - 15
        sub = (slice(y0, y0 + 30), slice(x0, x0 + 30))
        w = weights[sub]
        mx = (w * xs[sub]).sum() / w.sum()
        my = (w * ys[sub]).sum() / w.sum()
        assert np.hypot(mx - float(ex), my - float(ey)) < 0.5


def test_path_outside_bounds_rejected():
    with pytest.raises(SceneError, match="outside bounds"):
        SceneRenderer(simple_spec(blobs=(
            BlobSpec(arena=1, radius=8, path="linear",
                     params=(5.0, 5.0, 1.0, 0.0)),)))
    with pytest.raises(SceneError, match="circular path leaves"):
        SceneRenderer(simple_spec(blobs=(
            BlobSpec(arena=1, radius=8, path="circular",
                     params=(150.0, 100.0, 120.0, 0.05, 0.0)),)))


def test_scene_spec_roundtrip():
    spec = simple_spec(blobs=(
        BlobSpec(arena=1, radius=9.5, texture="checker", intensity=45,
                 contrast=25, period=4.0, path="circular",
                 params=(150.0, 100.0, 40.0, 0.1, 0.5)),))
    text = write_scene_spec(spec)
    again = parse_scene_spec(text)
    assert again == spec
