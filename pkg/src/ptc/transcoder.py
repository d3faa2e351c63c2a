"""Partial transcoding: replace a rectangle of a coded frame in place.

Leaves of the decoded partition are labelled against the replace area:

* ``INTERNAL`` leaves (inside the area, or overflowing it by fewer than
  ``L`` lines on every side) are re-encoded lossily with a fresh RDO search
  that may repartition their footprint;
* ``TRANSITION`` leaves (straddling the area with a thick overflow, or
  outside it but within reach of a changed sample) keep their geometry and
  are coded losslessly, so every sample outside the area keeps its original
  pre-deblock value;
* ``INTACT`` leaves keep their payload bins verbatim.

All bins are then entropy-coded again from fresh contexts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import ndimage

from .core import (CodecConfig, CuLeaf, CuNode, ReconPair, deblock_frame, has_split_flag,
                   iter_leaves, leaf_id_map, leaf_samples)
from .decoder import DecodedFrame, decode_frame
from .encoder import IntraSearch, encode_leaf_lossless, write_node
from .entropy import encode_records
from .syntax import SyntaxBuffer, binarize_leaf
from .tools.container import Stream

DEFAULT_L = 5
# a deblocked sample depends on pre-deblock samples at most this far away per axis
DEBLOCK_REACH = 4
# distance from the changed set beyond which transition samples must be exact
TRANSITION_MARGIN = 5


class InvalidRA(ValueError):
    pass


class Category(str, Enum):
    INTERNAL = "internal"
    TRANSITION = "transition"
    INTACT = "intact"


@dataclass(frozen=True)
class Rect:
    x: int
    y: int
    w: int
    h: int

    @property
    def empty(self) -> bool:
        return self.w <= 0 or self.h <= 0

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def intersects(self, x: int, y: int, w: int, h: int) -> bool:
        return (not self.empty and x < self.x + self.w and self.x < x + w
                and y < self.y + self.h and self.y < y + h)

    def mask(self, width: int, height: int) -> np.ndarray:
        m = np.zeros((height, width), dtype=bool)
        if not self.empty:
            m[self.slices()] = True
        return m


@dataclass
class ReplaceSpec:
    """Replace area plus its content; ``rc`` is one plane or one per frame."""
    ra: Rect
    rc: np.ndarray | list[np.ndarray] | None = None

    def rc_for(self, frame: int) -> np.ndarray:
        if self.ra.empty:
            return np.zeros((0, 0), dtype=np.uint8)
        if isinstance(self.rc, list):
            return self.rc[frame % len(self.rc)]
        return self.rc

    def validate(self, width: int, height: int) -> None:
        ra = self.ra
        if ra.w < 0 or ra.h < 0 or ra.x < 0 or ra.y < 0 or ra.x + ra.w > width \
                or ra.y + ra.h > height:
            raise InvalidRA(f"replace area {ra} exceeds the {width}x{height} frame")
        if ra.empty:
            return
        planes = self.rc if isinstance(self.rc, list) else [self.rc]
        for p in planes:
            if p is None or np.shape(p) != (ra.h, ra.w):
                raise InvalidRA(
                    f"replace content must be {ra.w}x{ra.h}, got {None if p is None else np.shape(p)}")


@dataclass
class CategoryMap:
    labels: dict[tuple[int, int, int], Category]
    changed: np.ndarray  # RA plus Internal footprints

    def __getitem__(self, leaf: CuLeaf) -> Category:
        return self.labels[leaf.key]

    def counts(self) -> dict[str, int]:
        out = {c.value: 0 for c in Category}
        for c in self.labels.values():
            out[c.value] += 1
        return out


def overflow_strips(x: int, y: int, size: int, ra: Rect) -> tuple[int, int, int, int]:
    """Thickness of the leaf's parts outside the area: (left, right, top, bottom)."""
    return (max(0, ra.x - x), max(0, x + size - (ra.x + ra.w)),
            max(0, ra.y - y), max(0, y + size - (ra.y + ra.h)))


def _template_hits(mask: np.ndarray, x: int, y: int, size: int) -> bool:
    h, w = mask.shape
    if y > 0 and mask[y - 1, max(x - 1, 0):min(x + 2 * size, w)].any():
        return True
    return x > 0 and bool(mask[y:min(y + 2 * size, h), x - 1].any())


def _window_hits(mask: np.ndarray, x: int, y: int, size: int, r: int) -> bool:
    h, w = mask.shape
    return bool(mask[max(y - r, 0):min(y + size + r, h), max(x - r, 0):min(x + size + r, w)].any())


def categorize(leaves, ra: Rect, L: int, width: int, height: int) -> CategoryMap:
    """Label every leaf Internal, Transition or Intact.

    Phase one labels leaves that meet the area: Internal when every
    overflow strip is thinner than ``L`` lines, Transition otherwise. Phase
    two labels the rest: Transition when the leaf's intra template or its
    deblocking window (``DEBLOCK_REACH`` samples around it) touches a changed
    sample, Intact otherwise.
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    if ra.w < 0 or ra.h < 0 or ra.x < 0 or ra.y < 0 or ra.x + ra.w > width \
            or ra.y + ra.h > height:
        raise InvalidRA(f"replace area {ra} exceeds the {width}x{height} frame")
    leaves = list(leaves)
    labels: dict[tuple[int, int, int], Category] = {}
    changed = ra.mask(width, height)
    outside = []
    for leaf in leaves:
        if ra.intersects(leaf.x, leaf.y, leaf.size, leaf.size):
            if max(overflow_strips(leaf.x, leaf.y, leaf.size, ra)) < L:
                labels[leaf.key] = Category.INTERNAL
                changed[leaf.y:leaf.y + leaf.size, leaf.x:leaf.x + leaf.size] = True
            else:
                labels[leaf.key] = Category.TRANSITION
        else:
            outside.append(leaf)
    for leaf in outside:
        dep = (_template_hits(changed, leaf.x, leaf.y, leaf.size)
               or _window_hits(changed, leaf.x, leaf.y, leaf.size, DEBLOCK_REACH))
        labels[leaf.key] = Category.TRANSITION if dep else Category.INTACT
    return CategoryMap(labels, changed)


def composite_target(ra: Rect, rc: np.ndarray, original: np.ndarray) -> np.ndarray:
    """Replace content inside the area, original pre-deblock samples elsewhere."""
    out = original.copy()
    if not ra.empty:
        out[ra.slices()] = rc
    return out


def build_target(leaf: CuLeaf, ra: Rect, rc: np.ndarray, original: np.ndarray) -> np.ndarray:
    return composite_target(ra, rc, original)[leaf.y:leaf.y + leaf.size,
                                              leaf.x:leaf.x + leaf.size]


def reencode_internal(node: CuNode, search: IntraSearch) -> CuNode:
    """Free RDO over an internal footprint; references come from ``search.plane``."""
    return search.search(node.x, node.y, node.size, node.depth)[1]


def reencode_transition(leaf: CuLeaf, target: np.ndarray, plane: np.ndarray,
                        avail: np.ndarray) -> CuLeaf:
    return encode_leaf_lossless(target, leaf.x, leaf.y, leaf.depth, plane, avail)


@dataclass
class FrameTranscode:
    payload: bytes
    tree: list[CuNode]
    syntax: SyntaxBuffer
    recon: ReconPair
    source: DecodedFrame
    categories: CategoryMap
    # index into ``syntax.spans`` of each copied intact leaf, keyed by leaf position
    intact_spans: dict[tuple[int, int, int], int] = field(default_factory=dict)


class _Rewriter:
    def __init__(self, src: DecodedFrame, cats: CategoryMap, target: np.ndarray, ra: Rect,
                 reuse: bool = True):
        cfg = src.cfg
        self.ra = ra
        self.reuse = reuse
        self.reused = 0
        self.cfg = cfg
        self.src = src
        self.cats = cats
        self.target = target
        self.search = IntraSearch(target, cfg)
        self.plane = self.search.plane
        self.avail = self.search.avail
        self.out = SyntaxBuffer()
        self.src_index = {leaf.key: i for i, leaf in enumerate(src.leaves)}
        self.intact_spans: dict[tuple[int, int, int], int] = {}

    def all_internal(self, node: CuNode) -> bool:
        return all(self.cats[l] is Category.INTERNAL for l in node.leaves())

    def rewrite(self, node: CuNode) -> CuNode:
        cfg = self.cfg
        if self.all_internal(node):
            new = reencode_internal(node, self.search)
            write_node(new, cfg, self.out)
            return new
        if not node.is_leaf:
            if has_split_flag(node.x, node.y, node.size, cfg):
                self.out.add_split(1, node.depth)
            children = [self.rewrite(c) for c in node.children]
            return CuNode(node.x, node.y, node.size, node.depth, node.forced, children)

        leaf = node.leaf
        if has_split_flag(leaf.x, leaf.y, leaf.size, cfg):
            self.out.add_split(0, leaf.depth)
        region = (slice(leaf.y, leaf.y + leaf.size), slice(leaf.x, leaf.x + leaf.size))
        if self.cats[leaf] is Category.INTACT:
            self.intact_spans[leaf.key] = len(self.out.spans)
            self.out.add_leaf(self.src.syntax.payload(self.src_index[leaf.key]))
            self.plane[region] = leaf_samples(leaf, self.plane, self.avail, cfg.qp)
            new_leaf = leaf
        else:
            tgt = self.target[region]
            new_leaf = None
            if self.reuse and not self.ra.intersects(*leaf.rect):
                # the original payload may still rebuild the target exactly
                block = leaf_samples(leaf, self.plane, self.avail, cfg.qp)
                if np.array_equal(block, tgt):
                    new_leaf = leaf
                    self.reused += 1
                    self.out.add_leaf(self.src.syntax.payload(self.src_index[leaf.key]))
            if new_leaf is None:
                new_leaf = reencode_transition(leaf, tgt, self.plane, self.avail)
                self.out.add_leaf(binarize_leaf(new_leaf))
            self.plane[region] = tgt
        self.avail[region] = True
        return CuNode(leaf.x, leaf.y, leaf.size, leaf.depth, leaf=new_leaf)


def transcode_frame(payload: bytes, cfg: CodecConfig, ra: Rect, rc: np.ndarray,
                    L: int = DEFAULT_L, reuse: bool = True) -> FrameTranscode:
    """Decode, categorise, re-encode the affected leaves and re-write one frame."""
    src = decode_frame(payload, cfg)
    cats = categorize(src.leaves, ra, L, cfg.width, cfg.height)
    target = composite_target(ra, rc, src.recon.pre_deblock)
    rw = _Rewriter(src, cats, target, ra, reuse)
    tree = [rw.rewrite(root) for root in src.tree]
    out_payload = encode_records(rw.out.bins)
    leaves = list(iter_leaves(tree))
    final = deblock_frame(rw.plane, leaf_id_map(leaves, cfg.width, cfg.height), cfg.qp)
    return FrameTranscode(out_payload, tree, rw.out, ReconPair(rw.plane, final), src, cats,
                          rw.intact_spans)


@dataclass
class TranscodeReport:
    internal: int = 0
    transition: int = 0
    intact: int = 0
    input_bytes: int = 0
    output_bytes: int = 0
    seconds: float = 0.0
    anchor_seconds: float | None = None

    @property
    def total_leaves(self) -> int:
        return self.internal + self.transition + self.intact

    @property
    def rate_overhead(self) -> float:
        """Output size increase over the input, in percent."""
        return 100.0 * (self.output_bytes / self.input_bytes - 1.0) if self.input_bytes else 0.0

    def to_dict(self) -> dict:
        return {"leaves": {"internal": self.internal, "transition": self.transition,
                           "intact": self.intact},
                "input_bytes": self.input_bytes, "output_bytes": self.output_bytes,
                "rate_overhead_pct": self.rate_overhead, "seconds": self.seconds,
                "anchor_seconds": self.anchor_seconds}


def partial_transcode(stream: Stream, spec: ReplaceSpec, L: int = DEFAULT_L,
                      keep_frames: bool = False):
    """Partially transcode every frame of ``stream``.

    Returns ``(output stream, report)``, plus the per-frame
    ``FrameTranscode`` list when ``keep_frames`` is set.
    """
    cfg = stream.cfg
    spec.validate(cfg.width, cfg.height)
    report = TranscodeReport(input_bytes=stream.payload_bytes)
    out = Stream(stream.width, stream.height, stream.qp, stream.ctu_size)
    frames = []
    t0 = time.perf_counter()
    for i, payload in enumerate(stream.payloads):
        ft = transcode_frame(payload, cfg, spec.ra, spec.rc_for(i), L)
        out.payloads.append(ft.payload)
        counts = ft.categories.counts()
        report.internal += counts["internal"]
        report.transition += counts["transition"]
        report.intact += counts["intact"]
        if keep_frames:
            frames.append(ft)
    report.seconds = time.perf_counter() - t0
    report.output_bytes = out.payload_bytes
    if keep_frames:
        return out, report, frames
    return out, report


# --- protection checks ----------------------------------------------------


def _near(mask: np.ndarray, r: int) -> np.ndarray:
    """Samples within Chebyshev distance ``r`` of ``mask``."""
    if not mask.any():
        return mask.copy()
    return ndimage.binary_dilation(mask, structure=np.ones((2 * r + 1, 2 * r + 1), bool))


def verify_invariants(ft: FrameTranscode, ra: Rect) -> dict[str, int]:
    """Count violations of the protection properties for one transcoded frame.

    Keys: ``P1`` pre-deblock samples changed outside the changed set, ``P2``
    final samples changed inside intact leaves, ``P3`` final samples changed
    in transition leaves outside the area and beyond the margin, ``P4``
    intact leaves whose payload bins differ, ``P6`` category soundness
    failures, ``far`` final samples changed outside the margin around the
    changed set.
    """
    src = ft.source
    h, w = src.recon.pre_deblock.shape
    changed = ft.categories.changed
    pre_diff = src.recon.pre_deblock != ft.recon.pre_deblock
    fin_diff = src.recon.final != ft.recon.final
    near = _near(changed, TRANSITION_MARGIN)
    ra_mask = ra.mask(w, h)

    intact = np.zeros((h, w), dtype=bool)
    transition = np.zeros((h, w), dtype=bool)
    p4 = 0
    p6 = 0
    leaves = src.leaves
    for i, leaf in enumerate(leaves):
        region = (slice(leaf.y, leaf.y + leaf.size), slice(leaf.x, leaf.x + leaf.size))
        cat = ft.categories[leaf]
        if cat is Category.INTACT:
            intact[region] = True
            if ft.syntax.payload(ft.intact_spans[leaf.key]) != src.syntax.payload(i):
                p4 += 1
            if ra.intersects(leaf.x, leaf.y, leaf.size, leaf.size) or \
                    _template_hits(changed, leaf.x, leaf.y, leaf.size) or \
                    _window_hits(changed, leaf.x, leaf.y, leaf.size, 1):
                p6 += 1
        elif cat is Category.TRANSITION:
            transition[region] = True

    return {
        "P1": int((pre_diff & ~changed).sum()),
        "P2": int((fin_diff & intact).sum()),
        "P3": int((fin_diff & transition & ~ra_mask & ~near).sum()),
        "P4": p4,
        "P6": p6,
        "far": int((fin_diff & ~near).sum()),
    }
