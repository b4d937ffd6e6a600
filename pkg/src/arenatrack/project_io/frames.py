"""Frame ingestion: PGM directories, raw Y8 streams, in-memory arrays.

Sources deliver 8-bit grayscale frames of fixed dimensions. A PGM
directory holds binary P5 files (maxval 255) named with a trailing
correlative number that fixes their order; frame rate comes from the
caller (the main video parameters). A raw Y8 stream is a single file
with the text header line ``Y8 <width> <height> <fps> <count>`` followed
by width*height*count bytes.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FrameSourceError(ValueError):
    """Unreadable or inconsistent frame input."""


@dataclass
class Frame:
    data: np.ndarray    # uint8 (height, width)
    index: int
    time_s: float

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def _trailing_number(name: str) -> tuple:
    m = re.search(r"(\d+)(?=\.[^.]+$)|(\d+)$", name)
    if m:
        digits = m.group(1) or m.group(2)
        return (0, int(digits), name)
    return (1, 0, name)


def read_pgm(path) -> np.ndarray:
    """Binary PGM (P5), maxval 255."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise FrameSourceError(f"{path}: not a binary PGM (P5) file")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise FrameSourceError(f"{path}: malformed PGM header")
    if maxval != 255:
        raise FrameSourceError(f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise FrameSourceError(f"{path}: truncated raster data")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def write_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image, dtype=np.uint8)
    h, w = image.shape
    with open(str(path), "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(image.tobytes())


class FrameSource:
    """Iterable frame provider; subclasses implement ``read(i)``."""

    width: int
    height: int
    fps: float
    frame_count: int

    def read(self, index: int) -> np.ndarray:
        raise NotImplementedError

    def frames(self, start: int = 0, stop: int | None = None):
        stop = self.frame_count if stop is None else min(stop, self.frame_count)
        for i in range(start, stop):
            yield Frame(self.read(i), i, i / self.fps)


class PgmDirectorySource(FrameSource):
    def __init__(self, directory, fps: float):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise FrameSourceError(f"{directory}: not a directory")
        files = [p for p in self.directory.iterdir()
                 if p.suffix.lower() == ".pgm"]
        if not files:
            raise FrameSourceError(f"{directory}: no .pgm files found")
        self.files = sorted(files, key=lambda p: _trailing_number(p.name))
        first = read_pgm(self.files[0])
        self.height, self.width = first.shape
        self.fps = float(fps)
        self.frame_count = len(self.files)
        self._first = first

    def read(self, index: int) -> np.ndarray:
        frame = self._first if index == 0 else read_pgm(self.files[index])
        if frame.shape != (self.height, self.width):
            raise FrameSourceError(
                f"{self.files[index]}: dimensions {frame.shape[::-1]} differ "
                f"from first frame {(self.width, self.height)}")
        return frame


class RawY8Source(FrameSource):
    HEADER_RE = re.compile(
        rb"^Y8 (\d+) (\d+) (\d+(?:\.\d+)?) (\d+)\n")

    def __init__(self, path):
        self.path = Path(path)
        with open(self.path, "rb") as fh:
            head = fh.read(64)
        m = self.HEADER_RE.match(head)
        if not m:
            raise FrameSourceError(
                f"{path}: missing 'Y8 <width> <height> <fps> <count>' header")
        self.width = int(m.group(1))
        self.height = int(m.group(2))
        self.fps = float(m.group(3))
        self.frame_count = int(m.group(4))
        self._offset = m.end()
        expected = self._offset + self.width * self.height * self.frame_count
        actual = self.path.stat().st_size
        if actual < expected:
            raise FrameSourceError(
                f"{path}: stream truncated ({actual} < {expected} bytes)")
        self._fh = open(self.path, "rb")

    def read(self, index: int) -> np.ndarray:
        size = self.width * self.height
        self._fh.seek(self._offset + index * size)
        raw = self._fh.read(size)
        if len(raw) != size:
            raise FrameSourceError(f"{self.path}: missing frame {index}")
        return np.frombuffer(raw, dtype=np.uint8).reshape(
            self.height, self.width)


def write_y8(path, frames: list[np.ndarray], fps: float) -> None:
    first = np.asarray(frames[0], dtype=np.uint8)
    h, w = first.shape
    fps_text = f"{fps:g}"
    with open(str(path), "wb") as fh:
        fh.write(f"Y8 {w} {h} {fps_text} {len(frames)}\n".encode())
        for frame in frames:
            arr = np.asarray(frame, dtype=np.uint8)
            if arr.shape != (h, w):
                raise FrameSourceError("all frames must share dimensions")
            fh.write(arr.tobytes())


class ArraySource(FrameSource):
    """In-memory source (synthetic scenes, tests)."""

    def __init__(self, frames: list[np.ndarray], fps: float):
        if not frames:
            raise FrameSourceError("need at least one frame")
        self._frames = [np.asarray(f, dtype=np.uint8) for f in frames]
        self.height, self.width = self._frames[0].shape
        for i, f in enumerate(self._frames):
            if f.shape != (self.height, self.width):
                raise FrameSourceError(f"frame {i}: inconsistent dimensions")
        self.fps = float(fps)
        self.frame_count = len(self._frames)

    def read(self, index: int) -> np.ndarray:
        return self._frames[index]


class GeneratorSource(FrameSource):
    """Frames rendered on demand from a function of the frame index."""

    def __init__(self, render, frame_count: int, width: int, height: int,
                 fps: float):
        self._render = render
        self.frame_count = frame_count
        self.width = width
        self.height = height
        self.fps = float(fps)

    def read(self, index: int) -> np.ndarray:
        return self._render(index)


def open_source(path, fps: float) -> FrameSource:
    """Directory -> PGM sequence; .y8 file -> raw stream."""
    p = Path(path)
    if p.is_dir():
        return PgmDirectorySource(p, fps)
    if p.suffix.lower() == ".y8":
        return RawY8Source(p)
    raise FrameSourceError(
        f"{path}: unsupported source (expected a PGM directory or .y8 file)")


def window_frames(source: FrameSource, start_min: float,
                  end_min: float) -> tuple[int, int]:
    """Frame index range [start, stop) for a minute window."""
    start = int(round(start_min * 60.0 * source.fps))
    stop = min(source.frame_count,
               int(round(end_min * 60.0 * source.fps)))
    start = min(start, source.frame_count)
    return start, stop
