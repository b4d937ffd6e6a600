"""Camera model: lens distortion, undistortion maps, pixel/world mapping.

The distortion polynomial acts on normalized camera coordinates
(x, y) = ((px - cx) / fx, (py - cy) / fy):

    d(x) = x * (1 + k1 r^2 + k2 r^4 + k3 r^6) / (1 + k4 r^2 + k5 r^4 + k6 r^6)
           + 2 p1 x y + p2 (r^2 + 2 x^2) + s1 r^2 + s2 r^4
    d(y) = y * (same radial ratio)
           + p1 (r^2 + 2 y^2) + 2 p2 x y + s3 r^2 + s4 r^4
    r^2  = x^2 + y^2

Manual calibration uses a pure scale model: rotation = identity,
translation = 0, all distortion coefficients 0, and the mm->pixel
scales stored in fx and fy.

The planar world mapping supports in-plane rigid poses (rotation about
the optical axis plus in-plane translation); out-of-plane tilt is not
modeled. World units are whatever the calibration used (mm by default).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import cv2
import numpy as np

DISTORTION_MODELS = {
    0: ("k1", "k2", "k3"),
    1: ("k1", "k2", "k3", "p1", "p2"),
    2: ("k1", "k2", "k3", "p1", "p2", "k4", "k5", "k6"),
    3: ("k1", "k2", "k3", "p1", "p2", "k4", "k5", "k6",
        "s1", "s2", "s3", "s4"),
}

COEFF_ORDER = ("k1", "k2", "k3", "p1", "p2", "k4", "k5", "k6",
               "s1", "s2", "s3", "s4")


class CalibrationError(ValueError):
    """Bad calibration data or a failed numeric inversion."""


@dataclass(frozen=True)
class DistortionCoefficients:
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0
    k6: float = 0.0
    p1: float = 0.0
    p2: float = 0.0
    s1: float = 0.0
    s2: float = 0.0
    s3: float = 0.0
    s4: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in COEFF_ORDER])

    @classmethod
    def from_vector(cls, v) -> "DistortionCoefficients":
        v = list(v)
        if len(v) != len(COEFF_ORDER):
            raise CalibrationError(
                f"expected {len(COEFF_ORDER)} distortion coefficients, got {len(v)}")
        return cls(**dict(zip(COEFF_ORDER, map(float, v))))

    def restricted(self, model: int) -> "DistortionCoefficients":
        """Zero out every coefficient outside the selected model."""
        if model not in DISTORTION_MODELS:
            raise CalibrationError(f"unknown distortion model {model}")
        allowed = DISTORTION_MODELS[model]
        return DistortionCoefficients(
            **{n: getattr(self, n) for n in allowed})

    @property
    def is_zero(self) -> bool:
        return not np.any(self.as_vector())


def distort_point(x, y, d: DistortionCoefficients):
    """Forward distortion in normalized camera coordinates.

    Accepts scalars or arrays and broadcasts.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = x * x + y * y
    r4 = r2 * r2
    r6 = r4 * r2
    radial = (1.0 + d.k1 * r2 + d.k2 * r4 + d.k3 * r6) / \
             (1.0 + d.k4 * r2 + d.k5 * r4 + d.k6 * r6)
    xd = x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x) \
        + d.s1 * r2 + d.s2 * r4
    yd = y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y \
        + d.s3 * r2 + d.s4 * r4
    return xd, yd


def _distort_jacobian(x: float, y: float, d: DistortionCoefficients,
                      eps: float = 1e-7) -> np.ndarray:
    fx0, fy0 = distort_point(x + eps, y, d)
    fx1, fy1 = distort_point(x - eps, y, d)
    gx0, gy0 = distort_point(x, y + eps, d)
    gx1, gy1 = distort_point(x, y - eps, d)
    return np.array([[(fx0 - fx1), (gx0 - gx1)],
                     [(fy0 - fy1), (gy0 - gy1)]]) / (2.0 * eps)


def undistort_point(x: float, y: float, d: DistortionCoefficients,
                    tol: float = 1e-9, max_iter: int = 100):
    """Invert the forward map (damped Newton, <= ``max_iter`` steps).

    Requires the distortion to be invertible around the point; on the
    supported coefficient range the solve converges in a handful of
    steps. Raises with the final residual when it does not.
    """
    px, py = float(x), float(y)
    qx, qy = px, py
    dx, dy = distort_point(qx, qy, d)
    res = float(np.hypot(dx - px, dy - py))
    if res <= tol:
        return qx, qy
    for _ in range(max_iter):
        jac = _distort_jacobian(qx, qy, d)
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        if abs(det) < 1e-12:
            step = np.array([dx - px, dy - py])  # gradient-free fallback
        else:
            step = np.linalg.solve(jac, np.array([dx - px, dy - py]))
        scale = 1.0
        for _ in range(12):  # halve the step until the residual shrinks
            nx, ny = qx - scale * step[0], qy - scale * step[1]
            fx, fy = distort_point(nx, ny, d)
            nres = float(np.hypot(fx - px, fy - py))
            if nres < res:
                qx, qy, dx, dy, res = nx, ny, fx, fy, nres
                break
            scale *= 0.5
        if res <= tol:
            return qx, qy
    raise CalibrationError(
        f"undistortion did not converge in {max_iter} iterations "
        f"(residual {res:.3g})")


@dataclass(frozen=True)
class CameraModel:
    camera_matrix: np.ndarray = field(
        default_factory=lambda: np.eye(3))
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    distortion: DistortionCoefficients = field(
        default_factory=DistortionCoefficients)
    unit_name: str = "mm"

    def __post_init__(self):
        m = np.asarray(self.camera_matrix, dtype=np.float64)
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "camera_matrix", m)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if m.shape != (3, 3):
            raise CalibrationError("camera matrix must be 3x3")
        if self.fx <= 0 or self.fy <= 0:
            raise CalibrationError("fx and fy must be positive")
        if r.shape != (3, 3) or np.abs(r @ r.T - np.eye(3)).max() > 1e-9:
            raise CalibrationError("rotation must be orthonormal (within 1e-9)")

    @property
    def fx(self) -> float:
        return float(self.camera_matrix[0, 0])

    @property
    def fy(self) -> float:
        return float(self.camera_matrix[1, 1])

    @property
    def cx(self) -> float:
        return float(self.camera_matrix[0, 2])

    @property
    def cy(self) -> float:
        return float(self.camera_matrix[1, 2])

    @classmethod
    def manual_scale(cls, fx: float, fy: float,
                     unit_name: str = "mm") -> "CameraModel":
        """Scale-only model: fx/fy pixels per unit, no pose, no distortion."""
        m = np.array([[fx, 0.0, 0.0], [0.0, fy, 0.0], [0.0, 0.0, 1.0]])
        return cls(camera_matrix=m, unit_name=unit_name)

    def normalize(self, px, py):
        return (np.asarray(px, np.float64) - self.cx) / self.fx, \
               (np.asarray(py, np.float64) - self.cy) / self.fy

    def denormalize(self, x, y):
        return np.asarray(x) * self.fx + self.cx, np.asarray(y) * self.fy + self.cy

    def pixel_to_world(self, px, py):
        """Undistorted pixel -> planar world coordinates."""
        xn, yn = self.normalize(px, py)
        r2 = self.rotation[:2, :2]
        tx, ty = self.translation[0], self.translation[1]
        pts = np.stack([np.asarray(xn) - tx, np.asarray(yn) - ty])
        wx, wy = r2.T @ pts.reshape(2, -1)
        wx = wx.reshape(np.shape(xn))
        wy = wy.reshape(np.shape(yn))
        if np.ndim(px) == 0:
            return float(wx), float(wy)
        return wx, wy

    def world_to_pixel(self, wx, wy):
        r2 = self.rotation[:2, :2]
        pts = r2 @ np.stack([np.asarray(wx, np.float64),
                             np.asarray(wy, np.float64)]).reshape(2, -1)
        xn = pts[0] + self.translation[0]
        yn = pts[1] + self.translation[1]
        px, py = self.denormalize(xn.reshape(np.shape(wx)),
                                  yn.reshape(np.shape(wy)))
        if np.ndim(wx) == 0:
            return float(px), float(py)
        return px, py


class UndistortionMap:
    """Per-pixel source coordinates resampling a distorted frame into an
    undistorted one. Out-of-frame sources are filled with white (255) so
    they never produce dark false detections."""

    FILL_VALUE = 255

    def __init__(self, src_x: np.ndarray, src_y: np.ndarray, identity: bool):
        self.src_x = src_x
        self.src_y = src_y
        self.identity = identity

    @property
    def shape(self) -> tuple[int, int]:
        return self.src_x.shape

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self.identity:
            return image
        return cv2.remap(image, self.src_x, self.src_y, cv2.INTER_LINEAR,
                         borderMode=cv2.BORDER_CONSTANT,
                         borderValue=self.FILL_VALUE)


def build_undistortion_map(model: CameraModel, width: int,
                           height: int) -> UndistortionMap:
    """Map each undistorted destination pixel to its distorted source.

    A distortion-free model yields an identity map, which ``apply``
    short-circuits so manual-calibration pipelines pay nothing.
    """
    if model.distortion.is_zero:
        xs, ys = np.meshgrid(np.arange(width, dtype=np.float32),
                             np.arange(height, dtype=np.float32))
        return UndistortionMap(xs, ys, identity=True)
    xs, ys = np.meshgrid(np.arange(width, dtype=np.float64),
                         np.arange(height, dtype=np.float64))
    xn, yn = model.normalize(xs, ys)
    xd, yd = distort_point(xn, yn, model.distortion)
    sx, sy = model.denormalize(xd, yd)
    return UndistortionMap(sx.astype(np.float32), sy.astype(np.float32),
                           identity=False)


# ------------------------------------------------------------ file format
#
# <project>_Calibrator.txt layout (whitespace-separated, one matrix row
# per line; decimal commas tolerated on input):
#   rows 1-3: camera matrix
#   rows 4-6: rotation matrix
#   row  7:   translation vector (3 values)
#   row  8:   distortion coefficients (12 values:
#             k1 k2 k3 p1 p2 k4 k5 k6 s1 s2 s3 s4)

_NUM_RE = re.compile(r"^[+-]?(\d+([.,]\d*)?|[.,]\d+)([eE][+-]?\d+)?$")


def _parse_row(line: str, lineno: int, expect: int, path: str) -> list[float]:
    parts = line.split()
    if len(parts) != expect:
        raise CalibrationError(
            f"{path}:{lineno}: expected {expect} values, got {len(parts)}")
    values = []
    for p in parts:
        if not _NUM_RE.match(p):
            raise CalibrationError(f"{path}:{lineno}: not a number: {p!r}")
        values.append(float(p.replace(",", ".")))
    return values


def load_calibrator(path) -> CameraModel:
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    layout = [3, 3, 3, 3, 3, 3, 3, 12]
    names = ["camera matrix", "camera matrix", "camera matrix",
             "rotation", "rotation", "rotation", "translation", "distortion"]
    if len(rows) < len(layout):
        missing = names[len(rows)]
        lineno = rows[-1][0] + 1 if rows else 1
        raise CalibrationError(f"{path}:{lineno}: missing {missing} row")
    if len(rows) > len(layout):
        raise CalibrationError(f"{path}:{rows[len(layout)][0]}: unexpected extra row")
    parsed = [_parse_row(ln, no, expect, path)
              for (no, ln), expect in zip(rows, layout)]
    return CameraModel(
        camera_matrix=np.array(parsed[0:3]),
        rotation=np.array(parsed[3:6]),
        translation=np.array(parsed[6]),
        distortion=DistortionCoefficients.from_vector(parsed[7]),
    )


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def save_calibrator(model: CameraModel, path) -> None:
    lines = []
    for row in model.camera_matrix:
        lines.append(" ".join(_fmt(v) for v in row))
    for row in model.rotation:
        lines.append(" ".join(_fmt(v) for v in row))
    lines.append(" ".join(_fmt(v) for v in model.translation))
    lines.append(" ".join(_fmt(v) for v in model.distortion.as_vector()))
    with open(str(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
