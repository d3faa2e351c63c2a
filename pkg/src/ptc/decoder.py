"""Frame decoder that also buffers every parsed ``(bin, ctx)`` pair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (CodecConfig, CuLeaf, CuNode, ReconPair, child_origins, deblock_frame,
                   has_split_flag, iter_leaves, leaf_id_map, leaf_samples, node_inside)
from .entropy import BYPASS, PROB_MAX, PROB_MIN, RangeDecoder, TruncatedStream, encode_records
from .syntax import (CTX_CBF, CTX_LOSSLESS, CTX_MODE, CTX_SIG, MAX_EG_PREFIX, MAX_MODE,
                     MalformedSyntax, SyntaxBuffer, split_ctx)

__all__ = ["DecodedFrame", "decode_frame", "reencode_bins", "TruncatedStream", "MalformedSyntax"]

MAX_LEVEL = 1 << 15


class _RecordingDecoder(RangeDecoder):
    def __init__(self, data: bytes):
        super().__init__(data)
        self.bins: list[tuple[int, int]] = []

    def read(self, ctx: int) -> int:
        # decode_bin inlined; this is the parser's hot path
        rng = self.range
        code = self.code
        if ctx < 0:
            rng >>= 1
            if code >= rng:
                code -= rng
                b = 1
            else:
                b = 0
        else:
            probs = self.contexts
            p = probs[ctx]
            bound = (rng >> 16) * p
            if code < bound:
                rng = bound
                b = 1
                p += (65536 - p) >> 5
                if p > PROB_MAX:
                    p = PROB_MAX
            else:
                code -= bound
                rng -= bound
                b = 0
                p -= p >> 5
                if p < PROB_MIN:
                    p = PROB_MIN
            probs[ctx] = p
        while rng < 16777216:
            rng <<= 8
            code = (code << 8) | self._next_byte()
        self.range = rng
        self.code = code
        self.bins.append((b, ctx))
        return b


@dataclass
class DecodedFrame:
    tree: list[CuNode]
    syntax: SyntaxBuffer
    recon: ReconPair
    cfg: CodecConfig

    @property
    def leaves(self) -> list[CuLeaf]:
        return list(iter_leaves(self.tree))


def _read_eg0(dec: _RecordingDecoder) -> int:
    k = 0
    while not dec.read(BYPASS):
        k += 1
        if k > MAX_EG_PREFIX:
            raise MalformedSyntax("Exp-Golomb prefix overrun")
    v = 1
    for _ in range(k):
        v = (v << 1) | dec.read(BYPASS)
    return v - 1


def _read_residual(dec: _RecordingDecoder, size: int, lossless: bool) -> np.ndarray:
    vals = np.zeros((size, size), dtype=np.int32)
    nz = [[0] * (size + 1) for _ in range(size + 1)]  # padded by one row/column
    limit = 255 if lossless else MAX_LEVEL
    read = dec.read
    for r in range(size):
        above = nz[r]
        row = nz[r + 1]
        for c in range(size):
            ctx = CTX_SIG + row[c] + above[c + 1] + above[c]
            if not read(ctx):
                continue
            row[c + 1] = 1
            neg = read(BYPASS)
            mag = _read_eg0(dec) + 1
            if mag > limit:
                raise MalformedSyntax(f"residual magnitude {mag} out of range")
            vals[r, c] = -mag if neg else mag
    return vals


def _read_leaf(dec: _RecordingDecoder, x: int, y: int, size: int, depth: int) -> CuLeaf:
    lossless = bool(dec.read(CTX_LOSSLESS))
    mode = 0
    while mode < MAX_MODE and dec.read(CTX_MODE + mode):
        mode += 1
    cbf = bool(dec.read(CTX_CBF))
    coeffs = _read_residual(dec, size, lossless) if cbf else np.zeros((size, size), np.int32)
    if cbf and not coeffs.any():
        raise MalformedSyntax("coded block flag set on an all-zero residual")
    return CuLeaf(x, y, size, depth, lossless, mode, cbf, coeffs)


class _FrameParser:
    def __init__(self, payload: bytes, cfg: CodecConfig):
        self.cfg = cfg
        self.dec = _RecordingDecoder(payload)
        self.syntax = SyntaxBuffer()
        self.plane = np.zeros((cfg.height, cfg.width), dtype=np.uint8)
        self.avail = np.zeros((cfg.height, cfg.width), dtype=bool)

    def parse_node(self, x: int, y: int, size: int, depth: int) -> CuNode:
        cfg = self.cfg
        dec = self.dec
        if not node_inside(x, y, size, cfg.width, cfg.height):
            split, forced = True, True
        elif has_split_flag(x, y, size, cfg):
            split, forced = bool(dec.read(split_ctx(depth))), False
        else:
            split, forced = False, False
        if split:
            node = CuNode(x, y, size, depth, forced=forced)
            for cx, cy, cs in child_origins(x, y, size, cfg.width, cfg.height):
                node.children.append(self.parse_node(cx, cy, cs, depth + 1))
            return node

        start = len(dec.bins)
        leaf = _read_leaf(dec, x, y, size, depth)
        # the recording decoder already holds the bins; mirror them into spans
        self.syntax.bins.extend(dec.bins[len(self.syntax.bins):start])
        self.syntax.add_leaf(dec.bins[start:])
        block = leaf_samples(leaf, self.plane, self.avail, cfg.qp)
        self.plane[y:y + size, x:x + size] = block
        self.avail[y:y + size, x:x + size] = True
        return CuNode(x, y, size, depth, leaf=leaf)


def decode_frame(payload: bytes, cfg: CodecConfig) -> DecodedFrame:
    """Parse and reconstruct one frame.

    Raises ``TruncatedStream`` or ``MalformedSyntax``; no partial frame is
    returned in either case.
    """
    p = _FrameParser(bytes(payload), cfg)
    tree = [p.parse_node(x, y, cfg.ctu_size, 0) for x, y in cfg.ctu_origins()]
    leaves = list(iter_leaves(tree))
    final = deblock_frame(p.plane, leaf_id_map(leaves, cfg.width, cfg.height), cfg.qp)
    return DecodedFrame(tree, p.syntax, ReconPair(p.plane, final), cfg)


def reencode_bins(bins) -> bytes:
    """Entropy-code a full bin list from fresh contexts."""
    return encode_records(bins)
