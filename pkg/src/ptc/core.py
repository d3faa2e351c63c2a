"""Signal-processing primitives shared by encoder, decoder and transcoder.

Frames are monochrome 8-bit planes held as ``numpy.uint8`` arrays of shape
``(height, width)``. Everything here is pure or writes to caller-owned
buffers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Iterator

import numpy as np

MIN_CU = 8
NUM_MODES = 6
TRANSFORM_SIZES = (8, 16, 32)
MAX_TRANSFORM = 32

# quantiser scales indexed by qp % 6
QUANT_SCALES = (26214, 23302, 20560, 18396, 16384, 14564)
DEQUANT_SCALES = (40, 45, 51, 57, 64, 72)


class IntraMode(IntEnum):
    PLANAR = 0
    DC = 1
    HORIZONTAL = 2
    VERTICAL = 3
    DIAG_DOWN_LEFT = 4
    DIAG_DOWN_RIGHT = 5


@dataclass(frozen=True)
class CodecConfig:
    width: int
    height: int
    qp: int = 32
    ctu_size: int = 32
    min_cu: int = MIN_CU

    def __post_init__(self):
        if self.ctu_size not in (16, 32, 64):
            raise ValueError(f"ctu_size must be 16, 32 or 64, got {self.ctu_size}")
        if self.min_cu != MIN_CU:
            raise ValueError("min_cu is fixed at 8")
        if not 0 <= self.qp <= 51:
            raise ValueError(f"qp out of range: {self.qp}")
        check_dims(self.width, self.height)

    @property
    def ctu_log2(self) -> int:
        return self.ctu_size.bit_length() - 1

    @property
    def lam(self) -> float:
        return 0.57 * 2.0 ** ((self.qp - 12) / 3.0)

    def ctu_origins(self) -> Iterator[tuple[int, int]]:
        """CTU top-left corners in raster order."""
        for y in range(0, self.height, self.ctu_size):
            for x in range(0, self.width, self.ctu_size):
                yield x, y


def check_dims(width: int, height: int) -> None:
    if width < 8 or height < 8 or width % 8 or height % 8:
        raise ValueError(
            f"frame dimensions must be multiples of 8 and at least 8, got {width}x{height}")


def check_plane(plane: np.ndarray) -> np.ndarray:
    plane = np.asarray(plane)
    if plane.ndim != 2:
        raise ValueError("expected a 2-D luma plane")
    check_dims(plane.shape[1], plane.shape[0])
    if plane.dtype != np.uint8:
        if plane.min() < 0 or plane.max() > 255:
            raise ValueError("samples must lie in [0, 255]")
        plane = plane.astype(np.uint8)
    return plane


# --- partition tree -------------------------------------------------------


@dataclass
class CuLeaf:
    x: int
    y: int
    size: int
    depth: int
    lossless: bool = False
    mode: int = 0
    cbf: bool = False
    # transform levels (lossy) or residual samples (lossless), size x size
    coeffs: np.ndarray | None = None

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.size)

    @property
    def rect(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.size, self.size)


@dataclass
class CuNode:
    x: int
    y: int
    size: int
    depth: int
    forced: bool = False
    children: list["CuNode"] = field(default_factory=list)
    leaf: CuLeaf | None = None

    @property
    def is_leaf(self) -> bool:
        return self.leaf is not None

    def leaves(self) -> Iterator[CuLeaf]:
        if self.leaf is not None:
            yield self.leaf
        else:
            for child in self.children:
                yield from child.leaves()


CuTree = list  # list[CuNode], one root per CTU in raster order


def iter_leaves(tree: list[CuNode]) -> Iterator[CuLeaf]:
    """Leaves in scan order: CTUs raster, Z-order inside each CTU."""
    for root in tree:
        yield from root.leaves()


def node_inside(x: int, y: int, size: int, width: int, height: int) -> bool:
    return x + size <= width and y + size <= height


def has_split_flag(x: int, y: int, size: int, cfg: CodecConfig) -> bool:
    """Split flags are signalled only for nodes that fit and can still split."""
    return size > cfg.min_cu and node_inside(x, y, size, cfg.width, cfg.height)


def child_origins(x: int, y: int, size: int, width: int, height: int):
    """Quadrant children (NW, NE, SW, SE) that start inside the frame."""
    h = size // 2
    for cy, cx in ((y, x), (y, x + h), (y + h, x), (y + h, x + h)):
        if cx < width and cy < height:
            yield cx, cy, h


def leaf_id_map(leaves, width: int, height: int) -> np.ndarray:
    ids = np.empty((height, width), dtype=np.int32)
    for i, leaf in enumerate(leaves):
        ids[leaf.y:leaf.y + leaf.size, leaf.x:leaf.x + leaf.size] = i
    return ids


# --- reference samples and intra prediction -------------------------------


def build_reference_samples(x: int, y: int, size: int, plane: np.ndarray,
                            avail: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Gather the intra template of a block from the pre-deblock plane.

    Returns ``(top, left, corner)`` where ``top`` holds ``2*size`` samples of
    the row above (starting at column ``x``) and ``left`` holds ``2*size``
    samples of the column to the left (starting at row ``y``). Unavailable
    samples are substituted by scanning from the bottom of the left column,
    up through the corner and along the top row, copying the last available
    value; if nothing is available every sample is 128.
    """
    h, w = plane.shape
    n2 = 2 * size
    total = 2 * n2 + 1
    vals = np.full(total, 128, dtype=np.int32)
    ok = np.zeros(total, dtype=bool)

    # scan order: left bottom->top (indices 0..n2-1), corner (n2), top (n2+1..)
    if x > 0:
        y1 = min(y + n2, h)
        if y1 > y:
            col = slice(y, y1)
            seg_v = plane[col, x - 1][::-1]
            seg_a = avail[col, x - 1][::-1]
            start = n2 - (y1 - y)
            vals[start:n2] = seg_v
            ok[start:n2] = seg_a
        if y > 0:
            vals[n2] = plane[y - 1, x - 1]
            ok[n2] = avail[y - 1, x - 1]
    if y > 0:
        x1 = min(x + n2, w)
        vals[n2 + 1:n2 + 1 + (x1 - x)] = plane[y - 1, x:x1]
        ok[n2 + 1:n2 + 1 + (x1 - x)] = avail[y - 1, x:x1]

    if not ok.all():
        if not ok.any():
            vals[:] = 128
        else:
            idx = np.where(ok, np.arange(total), -1)
            np.maximum.accumulate(idx, out=idx)
            idx[idx < 0] = np.argmax(ok)
            vals = vals[idx]
    left = vals[n2 - 1::-1].copy()
    corner = int(vals[n2])
    top = vals[n2 + 1:].copy()
    return top, left, corner


@lru_cache(maxsize=None)
def _grids(size: int):
    yy, xx = np.mgrid[0:size, 0:size]
    return yy, xx, xx - yy


def predict_all(top: np.ndarray, left: np.ndarray, corner: int, size: int) -> np.ndarray:
    """Predictions for all six intra modes, shape ``(6, size, size)``."""
    n = size
    log2n = n.bit_length() - 1
    yy, xx, dxy = _grids(n)
    out = np.empty((NUM_MODES, n, n), dtype=np.int32)
    t = top[:n]
    l = left[:n]
    out[IntraMode.PLANAR] = ((n - 1 - xx) * l[:, None] + (xx + 1) * int(top[n])
                             + (n - 1 - yy) * t[None, :] + (yy + 1) * int(left[n])
                             + n) >> (log2n + 1)
    out[IntraMode.DC] = (int(t.sum()) + int(l.sum()) + n) >> (log2n + 1)
    out[IntraMode.HORIZONTAL] = l[:, None]
    out[IntraMode.VERTICAL] = t[None, :]
    out[IntraMode.DIAG_DOWN_LEFT] = top[xx + yy + 1]
    # down-right: above the diagonal reads top, below reads left
    # ext[n] is the corner, ext[n + k] = top[k - 1], ext[n - k] = left[k - 1]
    ext = np.concatenate((l[::-1], [corner], t))
    out[IntraMode.DIAG_DOWN_RIGHT] = ext[n + dxy]
    return out


def intra_predict(mode: int, top: np.ndarray, left: np.ndarray, corner: int,
                  size: int) -> np.ndarray:
    n = size
    if mode == IntraMode.HORIZONTAL:
        return np.repeat(left[:n, None], n, axis=1)
    if mode == IntraMode.VERTICAL:
        return np.repeat(top[None, :n], n, axis=0)
    if mode == IntraMode.DC:
        log2n = n.bit_length() - 1
        dc = (int(top[:n].sum()) + int(left[:n].sum()) + n) >> (log2n + 1)
        return np.full((n, n), dc, dtype=np.int32)
    return predict_all(top, left, corner, size)[mode]


# --- integer transform and quantisation ----------------------------------


# 64*sqrt(2)*cos(j*pi/64) for j = 0..32, as tuned by HEVC for near-orthogonality
# (plain rounding leaves rows measurably non-orthogonal); entry 0 is the DC gain
_COS_TABLE = (64, 90, 90, 90, 89, 88, 87, 85, 83, 82, 80, 78, 75, 73, 70, 67, 64,
              61, 57, 54, 50, 46, 43, 38, 36, 31, 25, 22, 18, 13, 9, 4, 0)


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Integer DCT-II basis with rows of norm ~64*sqrt(n)."""
    if n not in (4, 8, 16, 32):
        raise ValueError(f"no {n}-point transform")
    k = np.arange(n)[:, None]
    i = np.arange(n)[None, :]
    a = ((2 * i + 1) * k * (32 // n)) % 128  # angle in units of pi/64
    a = np.where(a > 64, 128 - a, a)
    sign = np.where(a > 32, -1, 1)
    a = np.where(a > 32, 64 - a, a)
    m = sign * np.asarray(_COS_TABLE)[a]
    m[0, :] = 64
    return m.astype(np.int64)


def _clip16(a: np.ndarray) -> np.ndarray:
    return np.clip(a, -32768, 32767)


def _quadrants(block: np.ndarray) -> np.ndarray:
    """(..., 64, 64) -> (..., 4, 32, 32) in NW, NE, SW, SE order."""
    lead = block.shape[:-2]
    b = block.reshape(*lead, 2, 32, 2, 32)
    b = np.moveaxis(b, -3, -2)
    return b.reshape(*lead, 4, 32, 32)


def _unquadrants(q: np.ndarray) -> np.ndarray:
    lead = q.shape[:-3]
    b = q.reshape(*lead, 2, 2, 32, 32)
    b = np.moveaxis(b, -2, -3)
    return b.reshape(*lead, 64, 64)


def forward_transform(block: np.ndarray) -> np.ndarray:
    """2-D integer DCT of the trailing ``(n, n)`` axes; batched over the rest.

    64-point blocks are transformed as four 32-point quadrants laid back out
    in place.
    """
    n = block.shape[-1]
    if n == 64:
        return _unquadrants(forward_transform(_quadrants(block)))
    m = dct_matrix(n)
    log2n = n.bit_length() - 1
    s1 = log2n - 1
    s2 = log2n + 6
    x = np.asarray(block, dtype=np.int64)
    tmp = _clip16((x @ m.T + (1 << (s1 - 1))) >> s1)
    return _clip16((m @ tmp + (1 << (s2 - 1))) >> s2)


def inverse_transform(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    if n == 64:
        return _unquadrants(inverse_transform(_quadrants(coeffs)))
    m = dct_matrix(n)
    c = np.asarray(coeffs, dtype=np.int64)
    tmp = _clip16((m.T @ c + 64) >> 7)
    return _clip16((tmp @ m + 2048) >> 12)


def transform_shift(size: int) -> int:
    """Extra quantiser shift compensating the transform gain of an n-point DCT."""
    return 7 - (min(size, MAX_TRANSFORM).bit_length() - 1)


def quantize(coeffs: np.ndarray, qp: int, tshift: int = 0) -> np.ndarray:
    shift = 14 + qp // 6 + tshift
    c = np.asarray(coeffs, dtype=np.int64)
    mag = (np.abs(c) * QUANT_SCALES[qp % 6] + (1 << (shift - 1))) >> shift
    return np.where(c < 0, -mag, mag)


def dequantize(levels: np.ndarray, qp: int, tshift: int = 0) -> np.ndarray:
    lv = np.asarray(levels, dtype=np.int64)
    mag = (np.abs(lv) * DEQUANT_SCALES[qp % 6] << (qp // 6)) >> (6 - tshift)
    return _clip16(np.where(lv < 0, -mag, mag))


def residual_from_levels(levels: np.ndarray, qp: int) -> np.ndarray:
    """Dequantise and inverse-transform lossy levels back to a residual."""
    size = levels.shape[-1]
    return inverse_transform(dequantize(levels, qp, transform_shift(size)))


def reconstruct_leaf(prediction: np.ndarray, residual: np.ndarray) -> np.ndarray:
    if prediction.shape != residual.shape:
        raise ValueError("prediction and residual shapes differ")
    return np.clip(prediction.astype(np.int32) + residual, 0, 255).astype(np.uint8)


def leaf_samples(leaf: CuLeaf, plane: np.ndarray, avail: np.ndarray, qp: int) -> np.ndarray:
    """Reconstruct a leaf from its coded data against the current references."""
    top, left, corner = build_reference_samples(leaf.x, leaf.y, leaf.size, plane, avail)
    pred = intra_predict(leaf.mode, top, left, corner, leaf.size)
    if not leaf.cbf:
        return pred.astype(np.uint8)
    if leaf.lossless:
        res = leaf.coeffs
    else:
        res = residual_from_levels(leaf.coeffs, qp)
    return reconstruct_leaf(pred, res)


@dataclass
class ReconPair:
    pre_deblock: np.ndarray
    final: np.ndarray


# --- deblocking -----------------------------------------------------------


def deblock_beta(qp: int) -> int:
    return int(np.clip(2 * (qp - 16), 0, 64))


def _filter_edges(plane: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                  dy: int, dx: int, beta: int) -> None:
    """Filter edge samples in place; (ys, xs) index q0, (dy, dx) points across."""
    def at(k):
        return plane[ys + k * dy, xs + k * dx]

    p2, p1, p0 = at(-3), at(-2), at(-1)
    q0, q1, q2 = at(0), at(1), at(2)
    d = np.abs(p2 - 2 * p1 + p0) + np.abs(q2 - 2 * q1 + q0)
    on = d < beta
    if not on.any():
        return
    tc = (beta >> 2) + 1
    delta = np.clip((4 * (q0 - p0) + (p1 - q1) + 4) >> 3, -tc, tc)
    delta = np.where(on, delta, 0)
    half = delta >> 1
    plane[ys - dy, xs - dx] = np.clip(p0 + delta, 0, 255)
    plane[ys, xs] = np.clip(q0 - delta, 0, 255)
    plane[ys - 2 * dy, xs - 2 * dx] = np.clip(p1 + half, 0, 255)
    plane[ys + dy, xs + dx] = np.clip(q1 - half, 0, 255)


def deblock_frame(pre_deblock: np.ndarray, leaf_ids: np.ndarray, qp: int) -> np.ndarray:
    """In-loop filter over every frame-interior leaf boundary.

    Vertical edges first, then horizontal edges on the result. Edges sit on
    the 8-sample grid, so the read span (3 per side) of one edge never
    overlaps the write span (2 per side) of another and each pass can be
    evaluated in one vectorised step.
    """
    beta = deblock_beta(qp)
    out = pre_deblock.astype(np.int32)
    if beta > 0:
        v = np.zeros(leaf_ids.shape, dtype=bool)
        v[:, 1:] = leaf_ids[:, 1:] != leaf_ids[:, :-1]
        ys, xs = np.nonzero(v)
        if ys.size:
            _filter_edges(out, ys, xs, 0, 1, beta)
        hz = np.zeros(leaf_ids.shape, dtype=bool)
        hz[1:, :] = leaf_ids[1:, :] != leaf_ids[:-1, :]
        ys, xs = np.nonzero(hz)
        if ys.size:
            _filter_edges(out, ys, xs, 1, 0, beta)
    return out.astype(np.uint8)
