"""Bin-level syntax: context assignment, binarisation and the syntax buffer.

Context map (15 contexts)::

    0..3   split flag, by quadtree depth
    4      lossless flag
    5..9   intra mode, truncated unary bin index
    10     coded-block flag
    11..14 significance flag, by count of significant left/above/above-left
           neighbours

Signs and Exp-Golomb magnitude bins are bypass coded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NUM_MODES, CuLeaf
from .entropy import BYPASS

CTX_SPLIT = 0
CTX_LOSSLESS = 4
CTX_MODE = 5
CTX_CBF = 10
CTX_SIG = 11

MAX_MODE = NUM_MODES - 1
MAX_EG_PREFIX = 20


class MalformedSyntax(Exception):
    """The bin stream does not describe a legal frame."""


def split_ctx(depth: int) -> int:
    return CTX_SPLIT + min(depth, 3)


def mode_bins(mode: int) -> list[tuple[int, int]]:
    """Truncated unary with cMax = 5."""
    out = [(1, CTX_MODE + i) for i in range(mode)]
    if mode < MAX_MODE:
        out.append((0, CTX_MODE + mode))
    return out


def eg0_bins(value: int) -> list[tuple[int, int]]:
    """Order-0 Exp-Golomb of a non-negative integer, all bypass."""
    v = value + 1
    k = v.bit_length() - 1
    out = [(0, BYPASS)] * k
    out.append((1, BYPASS))
    out.extend(((v >> i) & 1, BYPASS) for i in range(k - 1, -1, -1))
    return out


def sig_context_map(nz: np.ndarray) -> np.ndarray:
    """Neighbour significance count (left, above, above-left) per position."""
    nzi = nz.astype(np.int8)
    cnt = np.zeros(nz.shape, dtype=np.int8)
    cnt[:, 1:] += nzi[:, :-1]
    cnt[1:, :] += nzi[:-1, :]
    cnt[1:, 1:] += nzi[:-1, :-1]
    return cnt


def residual_bins(values: np.ndarray) -> list[tuple[int, int]]:
    """Full significance map in raster order, sign and |v|-1 after each hit."""
    flat = values.ravel().tolist()
    ctxs = (sig_context_map(values != 0) + CTX_SIG).ravel().tolist()
    out: list[tuple[int, int]] = []
    append = out.append
    for v, c in zip(flat, ctxs):
        if v == 0:
            append((0, c))
            continue
        append((1, c))
        if v < 0:
            append((1, BYPASS))
            v = -v
        else:
            append((0, BYPASS))
        if v == 1:
            append((1, BYPASS))
        else:
            out.extend(eg0_bins(v - 1))
    return out


def binarize_leaf(leaf: CuLeaf) -> list[tuple[int, int]]:
    """Payload bins of one leaf (split flags are emitted by the tree walk)."""
    out = [(int(leaf.lossless), CTX_LOSSLESS)]
    out.extend(mode_bins(leaf.mode))
    out.append((int(leaf.cbf), CTX_CBF))
    if leaf.cbf:
        out.extend(residual_bins(leaf.coeffs))
    return out


def mode_bin_count(mode) -> np.ndarray:
    return np.minimum(np.asarray(mode) + 1, MAX_MODE)


def residual_bin_estimate(values: np.ndarray) -> np.ndarray:
    """Bin count of residual syntax over the trailing two axes (cbf=1 assumed)."""
    n2 = values.shape[-1] * values.shape[-2]
    mag = np.abs(values)
    nz = mag > 0
    _, e = np.frexp(mag)
    # sign + EG0(|v|-1), whose length is 2*floor(log2|v|) + 1
    per = np.where(nz, 2 * e, 0)
    return n2 + per.sum(axis=(-2, -1))


@dataclass
class LeafSpan:
    tree_start: int
    tree_end: int
    payload_start: int
    payload_end: int

    @property
    def tree(self) -> slice:
        return slice(self.tree_start, self.tree_end)

    @property
    def payload(self) -> slice:
        return slice(self.payload_start, self.payload_end)


@dataclass
class SyntaxBuffer:
    """Ordered ``(bin, ctx)`` pairs of a frame plus per-leaf spans.

    Split flags preceding a leaf (since the previous leaf's payload) form that
    leaf's tree span; the leaf's own bins form its payload span.
    """
    bins: list[tuple[int, int]] = field(default_factory=list)
    spans: list[LeafSpan] = field(default_factory=list)
    _tree_mark: int = 0

    def add_split(self, flag: int, depth: int) -> None:
        self.bins.append((flag, split_ctx(depth)))

    def add_leaf(self, payload: list[tuple[int, int]]) -> None:
        start = len(self.bins)
        self.bins.extend(payload)
        self.spans.append(LeafSpan(self._tree_mark, start, start, len(self.bins)))
        self._tree_mark = len(self.bins)

    def payload(self, i: int) -> list[tuple[int, int]]:
        return self.bins[self.spans[i].payload]

    def tree_bin_count(self) -> int:
        return sum(s.tree_end - s.tree_start for s in self.spans)
