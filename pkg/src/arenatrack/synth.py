"""Synthetic scenes with exact ground truth.

A scene is a dark field with bright rectangular arenas and textured dark
blobs moving inside them. Blobs follow parametric paths (linear with
wall bounces, or circular), carry a body-fixed texture (uniform,
stripes, checker, gradient) and render with a 2 px anti-aliased edge so
sub-pixel centroids are meaningful. Optional Gaussian pixel noise and
radial lens distortion turn the ideal scene into a realistic raw frame.

Frames are deterministic functions of (seed, frame index): rendering the
same index twice is byte-identical. Truth rows use the real-space
tracking layout (time, arena, blob id, x, y, label) with label 2 marking
frames where two blob discs overlap (occlusion).

Scene files reuse the configuration grammar; see ``parse_scene_spec``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import TrajectoryPoint
from .calibration import CameraModel, DistortionCoefficients, distort_point
from .project_io.frames import GeneratorSource

TEXTURES = ("uniform", "stripes", "checker", "gradient")
PATHS = ("linear", "circular")

EDGE_RAMP = 2.0  # px, anti-aliased blob boundary


class SceneError(ValueError):
    """Invalid scene specification."""


@dataclass(frozen=True)
class ArenaSpec:
    rect: tuple[int, int, int, int]      # x0, y0, x1, y1 (half-open)


@dataclass(frozen=True)
class BlobSpec:
    arena: int                            # 1-based arena number
    radius: float
    texture: str = "uniform"
    intensity: int = 60                   # body base intensity
    contrast: int = 60                    # texture second level offset
    period: float = 6.0                   # texture cell size, px
    path: str = "linear"
    params: tuple = (0.0, 0.0, 1.0, 0.0)  # linear: x0 y0 vx vy
                                          # circular: cx cy r omega phase


@dataclass(frozen=True)
class SceneSpec:
    width: int = 800
    height: int = 600
    fps: float = 25.0
    frames: int = 300
    seed: int = 0
    noise_sigma: float = 0.0
    bright: int = 210                     # arena interior level
    dark: int = 30                        # field level
    k1: float = 0.0                       # radial distortion
    arenas: tuple[ArenaSpec, ...] = ()
    blobs: tuple[BlobSpec, ...] = ()
    focal: float = 0.0                    # 0 = min(width, height)


def _blob_bounds(spec: SceneSpec, blob: BlobSpec):
    rect = spec.arenas[blob.arena - 1].rect
    margin = blob.radius + EDGE_RAMP + 1.0
    lo_x, hi_x = rect[0] + margin, rect[2] - margin
    lo_y, hi_y = rect[1] + margin, rect[3] - margin
    if lo_x >= hi_x or lo_y >= hi_y:
        raise SceneError(
            f"blob radius {blob.radius} does not fit arena {blob.arena}")
    return lo_x, hi_x, lo_y, hi_y


def _bounce(value: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    u = (value - lo) % (2.0 * span)
    return lo + (u if u <= span else 2.0 * span - u)


def blob_position(spec: SceneSpec, blob: BlobSpec, frame: int):
    """Ideal (undistorted) scene position of a blob at a frame."""
    if blob.path == "linear":
        x0, y0, vx, vy = blob.params[:4]
        lo_x, hi_x, lo_y, hi_y = _blob_bounds(spec, blob)
        return (_bounce(x0 + vx * frame, lo_x, hi_x),
                _bounce(y0 + vy * frame, lo_y, hi_y))
    if blob.path == "circular":
        cx, cy, radius, omega, phase = blob.params[:5]
        angle = phase + omega * frame
        return (cx + radius * math.cos(angle), cy + radius * math.sin(angle))
    raise SceneError(f"unknown path kind {blob.path!r}")


def validate_scene(spec: SceneSpec) -> None:
    if not spec.arenas:
        raise SceneError("scene needs at least one arena")
    for a in spec.arenas:
        x0, y0, x1, y1 = a.rect
        if not (0 <= x0 < x1 <= spec.width and 0 <= y0 < y1 <= spec.height):
            raise SceneError(f"arena rect {a.rect} outside the frame")
    for i, blob in enumerate(spec.blobs, start=1):
        if not (1 <= blob.arena <= len(spec.arenas)):
            raise SceneError(f"blob {i}: no arena {blob.arena}")
        if blob.texture not in TEXTURES:
            raise SceneError(f"blob {i}: unknown texture {blob.texture!r}")
        lo_x, hi_x, lo_y, hi_y = _blob_bounds(spec, blob)
        if blob.path == "circular":
            cx, cy, radius = blob.params[:3]
            if not (lo_x <= cx - radius and cx + radius <= hi_x
                    and lo_y <= cy - radius and cy + radius <= hi_y):
                raise SceneError(f"blob {i}: circular path leaves the arena")
        elif blob.path == "linear":
            x0, y0 = blob.params[:2]
            if not (lo_x <= x0 <= hi_x and lo_y <= y0 <= hi_y):
                raise SceneError(f"blob {i}: start {x0, y0} outside bounds")
        else:
            raise SceneError(f"blob {i}: unknown path {blob.path!r}")


def _texture_values(blob: BlobSpec, dx: np.ndarray, dy: np.ndarray):
    lo = blob.intensity
    hi = min(blob.intensity + blob.contrast, 255)
    if blob.texture == "uniform":
        return np.full(dx.shape, lo, dtype=np.float32)
    if blob.texture == "stripes":
        band = np.floor(dx / blob.period).astype(int) % 2
        return np.where(band == 0, lo, hi).astype(np.float32)
    if blob.texture == "checker":
        band = (np.floor(dx / blob.period).astype(int)
                + np.floor(dy / blob.period).astype(int)) % 2
        return np.where(band == 0, lo, hi).astype(np.float32)
    if blob.texture == "gradient":
        t = (dx + blob.radius) / (2.0 * blob.radius)
        return (lo + np.clip(t, 0, 1) * (hi - lo)).astype(np.float32)
    raise SceneError(f"unknown texture {blob.texture!r}")


def render_ideal_frame(spec: SceneSpec, frame: int) -> np.ndarray:
    """Noise-free, distortion-free scene at a frame."""
    img = np.full((spec.height, spec.width), spec.dark, dtype=np.float32)
    for a in spec.arenas:
        x0, y0, x1, y1 = a.rect
        img[y0:y1, x0:x1] = spec.bright
    for blob in spec.blobs:
        cx, cy = blob_position(spec, blob, frame)
        r_out = blob.radius + EDGE_RAMP
        ix0 = max(int(math.floor(cx - r_out - 1)), 0)
        iy0 = max(int(math.floor(cy - r_out - 1)), 0)
        ix1 = min(int(math.ceil(cx + r_out + 2)), spec.width)
        iy1 = min(int(math.ceil(cy + r_out + 2)), spec.height)
        ys, xs = np.mgrid[iy0:iy1, ix0:ix1]
        dx = (xs - cx).astype(np.float32)
        dy = (ys - cy).astype(np.float32)
        d = np.hypot(dx, dy)
        alpha = np.clip((blob.radius + EDGE_RAMP / 2.0 - d) / EDGE_RAMP,
                        0.0, 1.0).astype(np.float32)
        tex = _texture_values(blob, dx, dy)
        patch = img[iy0:iy1, ix0:ix1]
        img[iy0:iy1, ix0:ix1] = patch * (1.0 - alpha) + tex * alpha
    return img


def _scene_camera(spec: SceneSpec) -> CameraModel:
    focal = spec.focal or float(min(spec.width, spec.height))
    m = np.array([[focal, 0.0, spec.width / 2.0],
                  [0.0, focal, spec.height / 2.0],
                  [0.0, 0.0, 1.0]])
    return CameraModel(camera_matrix=m,
                       distortion=DistortionCoefficients(k1=spec.k1))


def _distort_warp(spec: SceneSpec):
    """Map raw-frame pixels to ideal-scene pixels (vectorized inverse of
    the forward distortion, valid for the mild k1 synth supports)."""
    import cv2
    cam = _scene_camera(spec)
    xs, ys = np.meshgrid(np.arange(spec.width, dtype=np.float64),
                         np.arange(spec.height, dtype=np.float64))
    xn, yn = cam.normalize(xs, ys)
    qx, qy = xn.copy(), yn.copy()
    for _ in range(50):
        dx, dy = distort_point(qx, qy, cam.distortion)
        qx -= dx - xn
        qy -= dy - yn
    sx, sy = cam.denormalize(qx, qy)
    return sx.astype(np.float32), sy.astype(np.float32)


_NOISE_SLACK = 65537


class SceneRenderer:
    def __init__(self, spec: SceneSpec):
        validate_scene(spec)
        self.spec = spec
        self._warp = _distort_warp(spec) if spec.k1 else None
        self._noise_bank = None
        if spec.noise_sigma > 0:
            # One bank of unit normals per scene; each frame reads it at
            # a frame-dependent offset. Deterministic and much cheaper
            # than generating fresh noise per frame.
            rng = np.random.default_rng(spec.seed)
            size = spec.width * spec.height + _NOISE_SLACK
            self._noise_bank = np.float32(spec.noise_sigma) * \
                rng.standard_normal(size, dtype=np.float32)

    def frame(self, index: int) -> np.ndarray:
        spec = self.spec
        img = render_ideal_frame(spec, index)
        if self._warp is not None:
            import cv2
            img = cv2.remap(img, *self._warp, cv2.INTER_LINEAR,
                            borderMode=cv2.BORDER_REPLICATE)
        if self._noise_bank is not None:
            n = spec.width * spec.height
            offset = (index * 2654435761) % _NOISE_SLACK
            img += self._noise_bank[offset:offset + n].reshape(img.shape)
        np.floor(img + np.float32(0.5), out=img)
        return np.clip(img, 0, 255).astype(np.uint8)


def blob_occluded(spec: SceneSpec, blob_index: int, frame: int) -> bool:
    blob = spec.blobs[blob_index]
    cx, cy = blob_position(spec, blob, frame)
    for j, other in enumerate(spec.blobs):
        if j == blob_index or other.arena != blob.arena:
            continue
        ox, oy = blob_position(spec, other, frame)
        if math.hypot(ox - cx, oy - cy) < blob.radius + other.radius:
            return True
    return False


def scene_truth(spec: SceneSpec,
                camera: CameraModel | None = None) -> list[TrajectoryPoint]:
    """Ideal trajectories in world units (pixel units when no camera)."""
    points = []
    for frame in range(spec.frames):
        for i, blob in enumerate(spec.blobs):
            cx, cy = blob_position(spec, blob, frame)
            if camera is not None:
                wx, wy = camera.pixel_to_world(cx, cy)
            else:
                wx, wy = cx, cy
            label = 2 if blob_occluded(spec, i, frame) else 1
            points.append(TrajectoryPoint(
                time_s=frame / spec.fps, arena=blob.arena, track=i + 1,
                x=wx, y=wy, label=label, frame=frame))
    return points


def generate_scene(spec: SceneSpec):
    """Frame source plus truth rows for a validated scene."""
    renderer = SceneRenderer(spec)
    source = GeneratorSource(renderer.frame, spec.frames, spec.width,
                             spec.height, spec.fps)
    return source, scene_truth(spec)


# ---------------------------------------------------------------- file IO

_SCENE_KEYS = {
    "scn.wide": ("width", int), "scn.high": ("height", int),
    "scn.fps": ("fps", float), "scn.nfrm": ("frames", int),
    "scn.seed": ("seed", int), "scn.nois": ("noise_sigma", float),
    "scn.brgt": ("bright", int), "scn.dark": ("dark", int),
    "scn.dis1": ("k1", float), "scn.focl": ("focal", float),
}


def parse_scene_spec(text: str) -> SceneSpec:
    """Scene files use the configuration grammar.

    SCENE_PARAMETERS holds scn.* codes; each ARENA_<n> section one
    ``are.rect x0 y0 x1 y1`` line; each BLOB_<n> section blb.* codes
    (aren, radi, ints, cntr, prdd, text, path — the path value carries
    its numeric parameters on the same line).
    """
    scene_kwargs: dict = {}
    arenas: list[ArenaSpec] = []
    blobs: list[dict] = []
    current: dict | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.isupper() and " " not in stripped:
            if stripped == "SCENE_PARAMETERS":
                current = None
            elif stripped.startswith("ARENA_"):
                current = None
            elif stripped.startswith("BLOB_"):
                blobs.append({})
                current = blobs[-1]
            else:
                raise SceneError(f"line {lineno}: unknown section {stripped!r}")
            continue
        parts = stripped.split()
        code, values = parts[0], parts[1:]
        if code in _SCENE_KEYS:
            attr, cast = _SCENE_KEYS[code]
            scene_kwargs[attr] = cast(float(values[0]))
        elif code == "are.rect":
            if len(values) != 4:
                raise SceneError(f"line {lineno}: are.rect needs 4 values")
            arenas.append(ArenaSpec(tuple(int(float(v)) for v in values)))
        elif code.startswith("blb."):
            if current is None:
                raise SceneError(f"line {lineno}: {code} outside a BLOB section")
            key = code[4:]
            if key == "aren":
                current["arena"] = int(float(values[0]))
            elif key == "radi":
                current["radius"] = float(values[0])
            elif key == "ints":
                current["intensity"] = int(float(values[0]))
            elif key == "cntr":
                current["contrast"] = int(float(values[0]))
            elif key == "prdd":
                current["period"] = float(values[0])
            elif key == "text":
                current["texture"] = values[0]
            elif key == "path":
                current["path"] = values[0]
                current["params"] = tuple(float(v) for v in values[1:])
            else:
                raise SceneError(f"line {lineno}: unknown blob code {code!r}")
        else:
            raise SceneError(f"line {lineno}: unknown scene code {code!r}")
    spec = SceneSpec(arenas=tuple(arenas),
                     blobs=tuple(BlobSpec(**b) for b in blobs),
                     **scene_kwargs)
    validate_scene(spec)
    return spec


def write_scene_spec(spec: SceneSpec) -> str:
    lines = ["SCENE_PARAMETERS"]
    for code, (attr, _) in _SCENE_KEYS.items():
        lines.append(f"{code} {getattr(spec, attr):g}")
    for i, a in enumerate(spec.arenas, start=1):
        lines.append(f"ARENA_{i}")
        lines.append("are.rect " + " ".join(str(v) for v in a.rect))
    for i, b in enumerate(spec.blobs, start=1):
        lines += [f"BLOB_{i}",
                  f"blb.aren {b.arena}",
                  f"blb.radi {b.radius:g}",
                  f"blb.ints {b.intensity}",
                  f"blb.cntr {b.contrast}",
                  f"blb.prdd {b.period:g}",
                  f"blb.text {b.texture}",
                  "blb.path " + b.path + " "
                  + " ".join(f"{p:g}" for p in b.params)]
    return "\n".join(lines) + "\n"
