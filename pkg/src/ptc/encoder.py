"""All-intra frame encoder.

Rate-distortion search over quadtree splits, six intra modes and the
lossy / lossless choice per leaf. Rate is the bin count of the syntax the
candidate would emit; distortion is pre-deblock SSE.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (NUM_MODES, CodecConfig, CuLeaf, CuNode, ReconPair, build_reference_samples,
                   check_plane, child_origins, deblock_frame, forward_transform, has_split_flag,
                   inverse_transform, iter_leaves, leaf_id_map, node_inside, predict_all,
                   quantize, dequantize, transform_shift)
from .entropy import encode_records
from .syntax import (SyntaxBuffer, binarize_leaf, mode_bin_count, residual_bin_estimate)

_MODE_BINS = mode_bin_count(np.arange(NUM_MODES))


@dataclass
class RdCost:
    distortion: float
    bits: float
    cost: float


@dataclass
class EncodeStats:
    bins: int
    bytes: int
    leaves: int
    lossless_leaves: int
    seconds: float


@dataclass
class EncodedFrame:
    payload: bytes
    tree: list[CuNode]
    recon: ReconPair
    syntax: SyntaxBuffer
    stats: EncodeStats


def _leaf_bits(cbf: np.ndarray, res_bits: np.ndarray) -> np.ndarray:
    # lossless flag + mode bins + cbf, plus residual when coded
    return 2 + _MODE_BINS + np.where(cbf, res_bits, 0)


def lossless_candidates(target: np.ndarray, preds: np.ndarray):
    """Residuals and bin counts for lossless coding under each mode."""
    res = target[None].astype(np.int32) - preds
    cbf = res.reshape(NUM_MODES, -1).any(axis=1)
    bits = _leaf_bits(cbf, residual_bin_estimate(res))
    return res, cbf, bits


def encode_leaf_lossless(target: np.ndarray, x: int, y: int, depth: int,
                         plane: np.ndarray, avail: np.ndarray) -> CuLeaf:
    """Lossless leaf for ``target``, mode chosen by minimum residual bin count."""
    size = target.shape[0]
    top, left, corner = build_reference_samples(x, y, size, plane, avail)
    preds = predict_all(top, left, corner, size)
    res, cbf, bits = lossless_candidates(target, preds)
    m = int(np.argmin(bits))
    return CuLeaf(x, y, size, depth, lossless=True, mode=m, cbf=bool(cbf[m]),
                  coeffs=res[m].astype(np.int32))


class IntraSearch:
    """RDO state over a working reconstruction.

    ``plane`` is the pre-deblock reconstruction being built and ``avail``
    marks samples already reconstructed in scan order. Both are updated in
    place as nodes are decided, exactly as a decoder would fill them.
    """

    def __init__(self, target: np.ndarray, cfg: CodecConfig,
                 plane: np.ndarray | None = None, avail: np.ndarray | None = None):
        self.target = target
        self.cfg = cfg
        self.lam = cfg.lam
        h, w = target.shape
        self.plane = np.zeros((h, w), dtype=np.uint8) if plane is None else plane
        self.avail = np.zeros((h, w), dtype=bool) if avail is None else avail

    def best_leaf(self, x: int, y: int, size: int, depth: int):
        """Best unsplit coding of a node; returns (cost, leaf, recon block)."""
        cfg = self.cfg
        top, left, corner = build_reference_samples(x, y, size, self.plane, self.avail)
        preds = predict_all(top, left, corner, size)
        tgt = self.target[y:y + size, x:x + size].astype(np.int32)

        tshift = transform_shift(size)
        levels = quantize(forward_transform(tgt[None] - preds), cfg.qp, tshift)
        cbf_lossy = levels.reshape(NUM_MODES, -1).any(axis=1)
        rec_res = inverse_transform(dequantize(levels, cfg.qp, tshift))
        rec = np.clip(preds + rec_res, 0, 255)
        dist = ((rec - tgt[None]) ** 2).sum(axis=(1, 2)).astype(np.float64)
        bits_lossy = _leaf_bits(cbf_lossy, residual_bin_estimate(levels))

        res_ll, cbf_ll, bits_ll = lossless_candidates(tgt, preds)

        # candidate order (mode, lossless): ties go to the lower mode, then lossy
        costs = np.empty((NUM_MODES, 2))
        costs[:, 0] = dist + self.lam * bits_lossy
        costs[:, 1] = self.lam * bits_ll
        flat = int(np.argmin(costs.ravel()))
        m, lossless = divmod(flat, 2)
        if lossless:
            leaf = CuLeaf(x, y, size, depth, True, m, bool(cbf_ll[m]),
                          res_ll[m].astype(np.int32))
            block = tgt.astype(np.uint8)
        else:
            leaf = CuLeaf(x, y, size, depth, False, m, bool(cbf_lossy[m]),
                          levels[m].astype(np.int32))
            block = rec[m].astype(np.uint8)
        return float(costs.ravel()[flat]), leaf, block

    def search(self, x: int, y: int, size: int, depth: int) -> tuple[float, CuNode]:
        """Bottom-up split decision for one node; leaves the chosen recon in place."""
        cfg = self.cfg
        if not node_inside(x, y, size, cfg.width, cfg.height):
            node = CuNode(x, y, size, depth, forced=True)
            total = 0.0
            for cx, cy, cs in child_origins(x, y, size, cfg.width, cfg.height):
                c, child = self.search(cx, cy, cs, depth + 1)
                node.children.append(child)
                total += c
            return total, node

        cost_leaf, leaf, block = self.best_leaf(x, y, size, depth)
        region = (slice(y, y + size), slice(x, x + size))
        if not has_split_flag(x, y, size, cfg):
            self.plane[region] = block
            self.avail[region] = True
            return cost_leaf, CuNode(x, y, size, depth, leaf=leaf)

        cost_leaf += self.lam
        node = CuNode(x, y, size, depth)
        cost_split = self.lam
        for cx, cy, cs in child_origins(x, y, size, cfg.width, cfg.height):
            c, child = self.search(cx, cy, cs, depth + 1)
            node.children.append(child)
            cost_split += c
            if cost_split >= cost_leaf:
                break
        if cost_split < cost_leaf:
            return cost_split, node
        self.plane[region] = block
        self.avail[region] = True
        return cost_leaf, CuNode(x, y, size, depth, leaf=leaf)


def rdo_search(x: int, y: int, size: int, depth: int, search: IntraSearch) -> CuNode:
    return search.search(x, y, size, depth)[1]


def write_node(node: CuNode, cfg: CodecConfig, syntax: SyntaxBuffer) -> None:
    """Emit split flags and leaf payloads of a subtree in scan order."""
    if has_split_flag(node.x, node.y, node.size, cfg):
        syntax.add_split(0 if node.is_leaf else 1, node.depth)
    if node.is_leaf:
        syntax.add_leaf(binarize_leaf(node.leaf))
    else:
        for child in node.children:
            write_node(child, cfg, syntax)


def encode_frame(plane: np.ndarray, cfg: CodecConfig) -> EncodedFrame:
    t0 = time.perf_counter()
    plane = check_plane(plane)
    if plane.shape != (cfg.height, cfg.width):
        raise ValueError("plane dimensions do not match the configuration")
    search = IntraSearch(plane, cfg)
    syntax = SyntaxBuffer()
    tree = []
    for x, y in cfg.ctu_origins():
        root = rdo_search(x, y, cfg.ctu_size, 0, search)
        write_node(root, cfg, syntax)
        tree.append(root)
    payload = encode_records(syntax.bins)
    leaves = list(iter_leaves(tree))
    final = deblock_frame(search.plane, leaf_id_map(leaves, cfg.width, cfg.height), cfg.qp)
    stats = EncodeStats(bins=len(syntax.bins), bytes=len(payload), leaves=len(leaves),
                        lossless_leaves=sum(l.lossless for l in leaves),
                        seconds=time.perf_counter() - t0)
    return EncodedFrame(payload, tree, ReconPair(search.plane, final), syntax, stats)
