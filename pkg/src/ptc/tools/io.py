"""PGM (P5) and raw 8-bit luma sequence I/O."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_PGM_TOKEN = re.compile(rb"(?:\s*(?:#[^\n]*\n)*\s*)(\S+)")


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(int(m.group(1)))
        pos = m.end()
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos:pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: raster holds {len(raster)} of {width * height} bytes")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width).copy()


def write_pgm(path, plane: np.ndarray) -> None:
    plane = np.asarray(plane, dtype=np.uint8)
    h, w = plane.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (w, h) + plane.tobytes())


def read_yuv(path, width: int, height: int) -> list[np.ndarray]:
    """Raw luma-only sequence; frame k occupies bytes [k*w*h, (k+1)*w*h)."""
    data = Path(path).read_bytes()
    n = width * height
    if len(data) % n:
        raise ValueError(f"{path}: {len(data)} bytes is not a whole number of {width}x{height} frames")
    return [np.frombuffer(data, dtype=np.uint8, count=n, offset=k * n).reshape(height, width).copy()
            for k in range(len(data) // n)]


def write_yuv(path, frames) -> None:
    with open(path, "wb") as f:
        for fr in frames:
            f.write(np.asarray(fr, dtype=np.uint8).tobytes())


def read_frames(path, width: int | None = None, height: int | None = None) -> list[np.ndarray]:
    """Frames from a ``.pgm`` image or a raw ``.yuv`` luma sequence."""
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return [read_pgm(path)]
    if width is None or height is None:
        raise ValueError("raw sequences need --width and --height")
    return read_yuv(path, width, height)


def write_frames(path, frames) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        if len(frames) != 1:
            raise ValueError(f"PGM output holds one frame, got {len(frames)}")
        write_pgm(path, frames[0])
    else:
        write_yuv(path, frames)
