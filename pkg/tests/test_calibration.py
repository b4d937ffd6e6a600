import numpy as np
import pytest

from arenatrack import calibration as cal


def test_distort_zero_coefficients_identity():
    d = cal.DistortionCoefficients()
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.uniform(-1, 1, 2)
        xd, yd = cal.distort_point(x, y, d)
        assert (xd, yd) == (x, y)


def test_distort_origin_fixed():
    d = cal.DistortionCoefficients(k1=0.3, k2=-0.1, p1=0.02, p2=0.01, s1=0.1)
    assert cal.distort_point(0.0, 0.0, d) == (0.0, 0.0)


def test_distort_hand_computed_radial():
    d = cal.DistortionCoefficients(k1=0.1)
    xd, yd = cal.distort_point(0.5, 0.0, d)
    assert xd == pytest.approx(0.5 * (1 + 0.1 * 0.25), abs=1e-15)
    assert yd == 0.0


def test_undistort_zero_coefficients_identity():
    d = cal.DistortionCoefficients()
    assert cal.undistort_point(0.3, -0.4, d) == (0.3, -0.4)


def test_undistort_roundtrip_grid():
    d = cal.DistortionCoefficients(k1=0.1)
    for gx in np.linspace(-0.8, 0.8, 9):
        for gy in np.linspace(-0.8, 0.8, 9):
            xd, yd = cal.distort_point(gx, gy, d)
            xu, yu = cal.undistort_point(xd, yd, d, tol=1e-9)
            assert np.hypot(xu - gx, yu - gy) < 1e-6


def test_undistort_residual_bound():
    d = cal.DistortionCoefficients(k1=-0.05)
    qx, qy = cal.undistort_point(0.3, 0.4, d, tol=1e-9)
    xd, yd = cal.distort_point(qx, qy, d)
    assert np.hypot(xd - 0.3, yd - 0.4) <= 1e-9


def radial_fold_inside(k1, k2, rmax):
    """True when d(r * radial(r))/dr changes sign within radius rmax,
    i.e. the forward map folds and has no unique inverse there."""
    r = np.linspace(0, rmax, 2001)
    slope = 1 + 3 * k1 * r ** 2 + 5 * k2 * r ** 4
    return bool((slope <= 0).any())


def test_undistort_roundtrip_mixed_coefficients():
    # Combinations with a fold inside the test domain (e.g. k1 = k2 =
    # -0.1 at the corners) are not injective, so no inverse exists
    # there; those are excluded by construction.
    rng = np.random.default_rng(1)
    rmax = np.hypot(0.8, 0.8)
    tried = 0
    while tried < 10:
        k1, k2 = rng.uniform(-0.1, 0.1, 2)
        if radial_fold_inside(k1, k2, rmax):
            continue
        tried += 1
        d = cal.DistortionCoefficients(
            k1=k1, k2=k2,
            p1=rng.uniform(-0.01, 0.01), p2=rng.uniform(-0.01, 0.01))
        for gx in np.linspace(-0.8, 0.8, 5):
            for gy in np.linspace(-0.8, 0.8, 5):
                xd, yd = cal.distort_point(gx, gy, d)
                xu, yu = cal.undistort_point(xd, yd, d, tol=1e-10)
                assert np.hypot(xu - gx, yu - gy) < 1e-6


def test_undistort_supports_strong_barrel():
    d = cal.DistortionCoefficients(k1=0.5)
    for gx in np.linspace(-0.8, 0.8, 5):
        for gy in np.linspace(-0.8, 0.8, 5):
            xd, yd = cal.distort_point(gx, gy, d)
            xu, yu = cal.undistort_point(xd, yd, d, tol=1e-10)
            assert np.hypot(xu - gx, yu - gy) < 1e-6


def test_manual_scale_pixel_to_world():
    model = cal.CameraModel.manual_scale(10.0, 9.5)
    assert model.pixel_to_world(100.0, 95.0) == (10.0, 10.0)
    assert model.pixel_to_world(0.0, 0.0) == (0.0, 0.0)


def test_world_pixel_roundtrip_random():
    theta = 0.3
    rot = np.array([[np.cos(theta), -np.sin(theta), 0],
                    [np.sin(theta), np.cos(theta), 0],
                    [0, 0, 1]])
    model = cal.CameraModel(
        camera_matrix=np.array([[12.0, 0, 320.0], [0, 11.0, 240.0], [0, 0, 1]]),
        rotation=rot, translation=np.array([3.0, -2.0, 0.0]))
    rng = np.random.default_rng(2)
    for _ in range(30):
        px, py = rng.uniform(0, 640), rng.uniform(0, 480)
        wx, wy = model.pixel_to_world(px, py)
        qx, qy = model.world_to_pixel(wx, wy)
        assert np.hypot(qx - px, qy - py) < 1e-9


def test_pixel_to_world_affine_in_manual_mode():
    model = cal.CameraModel.manual_scale(10.0, 9.5)
    rng = np.random.default_rng(3)
    for _ in range(10):
        p = rng.uniform(0, 500, 2)
        q = rng.uniform(0, 500, 2)
        lam = rng.uniform(0, 1)
        mid = lam * p + (1 - lam) * q
        wp = np.array(model.pixel_to_world(*p))
        wq = np.array(model.pixel_to_world(*q))
        wm = np.array(model.pixel_to_world(*mid))
        assert np.allclose(wm, lam * wp + (1 - lam) * wq, atol=1e-9)


def test_identity_map_resamples_exactly():
    model = cal.CameraModel.manual_scale(10.0, 9.5)
    m = cal.build_undistortion_map(model, 64, 48)
    assert m.identity
    frame = np.random.default_rng(4).integers(0, 256, (48, 64), dtype=np.uint8)
    assert np.array_equal(m.apply(frame), frame)


def test_distorted_map_grid_positions():
    # Draw dark dots on a synthetic distorted frame at positions the
    # forward model predicts, then confirm undistortion puts them back
    # on the regular grid within half a pixel.
    fx = fy = 200.0
    cx, cy = 160.0, 120.0
    model = cal.CameraModel(
        camera_matrix=np.array([[fx, 0, cx], [0, fy, cy], [0, 0, 1]]),
        distortion=cal.DistortionCoefficients(k1=0.1))
    w, h = 320, 240
    frame = np.full((h, w), 255, np.uint8)
    grid = [(80, 60), (160, 60), (240, 60), (80, 180), (240, 180), (160, 120)]
    for gx, gy in grid:
        xn, yn = (gx - cx) / fx, (gy - cy) / fy
        xd, yd = cal.distort_point(xn, yn, model.distortion)
        sx, sy = xd * fx + cx, yd * fy + cy
        xi, yi = int(round(sx)), int(round(sy))
        frame[yi - 2:yi + 3, xi - 2:xi + 3] = 0
    und = cal.build_undistortion_map(model, w, h).apply(frame)
    for gx, gy in grid:
        patch = und[gy - 4:gy + 5, gx - 4:gx + 5].astype(float)
        weights = 255.0 - patch
        assert weights.sum() > 0
        ys, xs = np.mgrid[gy - 4:gy + 5, gx - 4:gx + 5]
        mx = (weights * xs).sum() / weights.sum()
        my = (weights * ys).sum() / weights.sum()
        assert np.hypot(mx - gx, my - gy) < 0.5


def test_calibrator_file_roundtrip(tmp_path):
    model = cal.CameraModel(
        camera_matrix=np.array([[10.0, 0, 0], [0, 9.5, 0], [0, 0, 1]]),
        distortion=cal.DistortionCoefficients(k1=0.1, p1=-0.002))
    path = tmp_path / "proj_Calibrator.txt"
    cal.save_calibrator(model, path)
    loaded = cal.load_calibrator(path)
    assert np.array_equal(loaded.camera_matrix, model.camera_matrix)
    assert loaded.distortion == model.distortion
    cal.save_calibrator(loaded, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_calibrator_accepts_decimal_comma(tmp_path):
    text = ("10 0 0\n0 9,5 0\n0 0 1\n"
            "1 0 0\n0 1 0\n0 0 1\n"
            "0 0 0\n" + " ".join(["0"] * 12) + "\n")
    path = tmp_path / "c.txt"
    path.write_text(text)
    model = cal.load_calibrator(path)
    assert model.fy == 9.5


def test_calibrator_missing_rotation_rows(tmp_path):
    text = "10 0 0\n0 9.5 0\n0 0 1\n1 0 0\n"
    path = tmp_path / "c.txt"
    path.write_text(text)
    with pytest.raises(cal.CalibrationError, match=r":5.*rotation"):
        cal.load_calibrator(path)


def test_calibrator_bad_number_names_line(tmp_path):
    text = ("10 0 0\n0 banana 0\n0 0 1\n"
            "1 0 0\n0 1 0\n0 0 1\n0 0 0\n" + " ".join(["0"] * 12) + "\n")
    path = tmp_path / "c.txt"
    path.write_text(text)
    with pytest.raises(cal.CalibrationError, match=r":2"):
        cal.load_calibrator(path)


def test_distortion_model_restriction():
    d = cal.DistortionCoefficients(k1=1, k2=2, k3=3, k4=4, p1=5, s1=6)
    r0 = d.restricted(0)
    assert (r0.k1, r0.k2, r0.k3) == (1, 2, 3)
    assert r0.p1 == 0 and r0.k4 == 0 and r0.s1 == 0
    r3 = d.restricted(3)
    assert r3 == d or r3.as_vector().tolist() == d.as_vector().tolist()


def test_rotation_orthonormality_enforced():
    bad = np.eye(3)
    bad[0, 1] = 1e-6
    with pytest.raises(cal.CalibrationError):
        cal.CameraModel(rotation=bad)
