import numpy as np
import pytest

from ptc.core import CodecConfig, CuLeaf, iter_leaves
from ptc.decoder import decode_frame
from ptc.encoder import encode_frame
from ptc.tools.anchor import anchor_transcode
from ptc.tools.container import Stream
from ptc.tools.metrics import psnr
from ptc.transcoder import (Category, InvalidRA, Rect, ReplaceSpec, build_target, categorize,
                            composite_target, partial_transcode, reencode_transition,
                            transcode_frame, verify_invariants)


def grid_leaves(w, h, size=8):
    z = np.zeros((size, size), np.int32)
    return [CuLeaf(x, y, size, 0, False, 0, False, z) for y in range(0, h, size)
            for x in range(0, w, size)]


def brute_force_labels(leaves, ra, L, w, h):
    """Rule evaluation by explicit sample sets."""
    ra_set = {(x, y) for x in range(ra.x, ra.x + ra.w) for y in range(ra.y, ra.y + ra.h)}
    labels, changed = {}, set(ra_set)
    for lf in leaves:
        cells = {(x, y) for x in range(lf.x, lf.x + lf.size) for y in range(lf.y, lf.y + lf.size)}
        if not cells & ra_set:
            continue
        outside = cells - ra_set
        sides = [
            len({x for x, _ in outside if x < ra.x}), len({x for x, _ in outside if x >= ra.x + ra.w}),
            len({y for _, y in outside if y < ra.y}), len({y for _, y in outside if y >= ra.y + ra.h}),
        ]
        if max(sides) < L:
            labels[lf.key] = Category.INTERNAL
            changed |= cells
        else:
            labels[lf.key] = Category.TRANSITION
    for lf in leaves:
        if lf.key in labels:
            continue
        n = lf.size
        template = {(lf.x + i, lf.y - 1) for i in range(-1, 2 * n)} | \
                   {(lf.x - 1, lf.y + j) for j in range(2 * n)}
        window = {(x, y) for x in range(lf.x - 4, lf.x + n + 4) for y in range(lf.y - 4, lf.y + n + 4)}
        hit = (template | window) & changed
        labels[lf.key] = Category.TRANSITION if hit else Category.INTACT
    return labels


def test_categorize_grid_example():
    leaves = grid_leaves(64, 64)
    ra = Rect(0, 0, 30, 30)
    cats = categorize(leaves, ra, 3, 64, 64)
    assert cats.labels[(24, 24, 8)] is Category.INTERNAL
    assert cats.labels[(32, 24, 8)] is Category.TRANSITION
    assert cats.labels[(40, 40, 8)] is Category.INTACT
    assert cats.labels == brute_force_labels(leaves, ra, 3, 64, 64)


@pytest.mark.parametrize("ra", [Rect(5, 9, 21, 14), Rect(40, 0, 24, 40), Rect(17, 30, 3, 3)])
@pytest.mark.parametrize("L", [1, 3, 5])
def test_categorize_matches_brute_force(ra, L):
    leaves = grid_leaves(64, 64) + []
    assert categorize(leaves, ra, L, 64, 64).labels == brute_force_labels(leaves, ra, L, 64, 64)


def test_categorize_extremes():
    leaves = grid_leaves(32, 32)
    cats = categorize(leaves, Rect(0, 0, 32, 32), 5, 32, 32)
    assert set(cats.labels.values()) == {Category.INTERNAL}
    cats = categorize(leaves, Rect(0, 0, 0, 0), 5, 32, 32)
    assert set(cats.labels.values()) == {Category.INTACT}
    assert sum(cats.counts().values()) == len(leaves)


def test_categorize_rejects_bad_area():
    with pytest.raises(InvalidRA):
        categorize(grid_leaves(32, 32), Rect(20, 0, 16, 8), 5, 32, 32)
    with pytest.raises(ValueError):
        categorize(grid_leaves(32, 32), Rect(0, 0, 8, 8), 0, 32, 32)


def test_build_target():
    rng = np.random.default_rng(0)
    orig = rng.integers(0, 256, (32, 32)).astype(np.uint8)
    ra = Rect(4, 6, 20, 10)
    rc = rng.integers(0, 256, (10, 20)).astype(np.uint8)
    leaf = lambda x, y, n: CuLeaf(x, y, n, 0, False, 0, False, None)
    np.testing.assert_array_equal(build_target(leaf(8, 8, 8), ra, rc, orig), rc[2:10, 4:12])
    np.testing.assert_array_equal(build_target(leaf(24, 24, 8), ra, rc, orig), orig[24:, 24:])
    t = build_target(leaf(0, 0, 16), ra, rc, orig)
    for y in range(16):
        for x in range(16):
            inside = 4 <= x < 24 and 6 <= y < 16
            assert t[y, x] == (rc[y - 6, x - 4] if inside else orig[y, x])


def test_spec_validation():
    ReplaceSpec(Rect(0, 0, 0, 0)).validate(32, 32)
    with pytest.raises(InvalidRA):
        ReplaceSpec(Rect(0, 0, 8, 8), np.zeros((4, 8), np.uint8)).validate(32, 32)
    with pytest.raises(InvalidRA):
        ReplaceSpec(Rect(30, 0, 8, 8), np.zeros((8, 8), np.uint8)).validate(32, 32)


# --- whole-frame behaviour ---------------------------------------------------


@pytest.fixture(scope="module")
def source(natural):
    cfg = CodecConfig(128, 128, qp=32)
    img = natural[64:192, 64:192].copy()
    return cfg, img, encode_frame(img, cfg)


def donor_patch(donor, w, h, seed=0):
    rng = np.random.default_rng(seed)
    y, x = rng.integers(0, 200, 2)
    return donor[y:y + h, x:x + w].copy()


def test_empty_area_is_identity(source):
    cfg, _, enc = source
    ft = transcode_frame(enc.payload, cfg, Rect(0, 0, 0, 0), None)
    assert ft.payload == enc.payload


def test_full_area_equals_direct_encode(source, donor):
    cfg, _, enc = source
    rc = donor_patch(donor, 128, 128)
    ft = transcode_frame(enc.payload, cfg, Rect(0, 0, 128, 128), rc)
    assert ft.payload == encode_frame(rc, cfg).payload


RECTS = [Rect(0, 0, 13, 13), Rect(50, 37, 40, 40), Rect(28, 100, 90, 28), Rect(0, 0, 90, 90),
         Rect(115, 115, 13, 13)]


@pytest.mark.parametrize("ra", RECTS)
def test_protection_L5(source, donor, ra):
    cfg, _, enc = source
    ft = transcode_frame(enc.payload, cfg, ra, donor_patch(donor, ra.w, ra.h, ra.x))
    inv = verify_invariants(ft, ra)
    assert all(inv[k] == 0 for k in ("P1", "P2", "P3", "P4", "P6", "far")), inv
    dec = decode_frame(ft.payload, cfg)
    np.testing.assert_array_equal(dec.recon.final, ft.recon.final)


@pytest.mark.parametrize("ra", RECTS[:3])
def test_L3_deviations_stay_local(source, donor, ra):
    cfg, _, enc = source
    ft = transcode_frame(enc.payload, cfg, ra, donor_patch(donor, ra.w, ra.h, 7), L=3)
    inv = verify_invariants(ft, ra)
    assert inv["far"] == 0 and inv["P1"] == 0 and inv["P4"] == 0


def test_transition_leaves_exact(source, donor):
    cfg, _, enc = source
    ra = Rect(50, 37, 40, 40)
    rc = donor_patch(donor, 40, 40, 3)
    ft = transcode_frame(enc.payload, cfg, ra, rc)
    target = composite_target(ra, rc, ft.source.recon.pre_deblock)
    for leaf in ft.source.leaves:
        if ft.categories[leaf] is Category.TRANSITION:
            x, y, n, _ = leaf.rect
            np.testing.assert_array_equal(ft.recon.pre_deblock[y:y + n, x:x + n],
                                          target[y:y + n, x:x + n])


def test_reencode_transition_keeps_geometry(source):
    cfg, _, enc = source
    dec = decode_frame(enc.payload, cfg)
    leaf = dec.leaves[5]
    x, y, n, _ = leaf.rect
    plane = dec.recon.pre_deblock.copy()
    avail = np.zeros_like(plane, bool)
    avail[:y, :] = True
    avail[y:y + 2 * n, :x] = True
    new = reencode_transition(leaf, plane[y:y + n, x:x + n], plane, avail)
    assert new.key == leaf.key and new.lossless


def test_transcode_twice(source, donor):
    cfg, _, enc = source
    ra = Rect(28, 100, 90, 28)
    spec = ReplaceSpec(ra, donor_patch(donor, 90, 28, 1))
    once, _ = partial_transcode(Stream(128, 128, cfg.qp, 32, [enc.payload]), spec)
    twice, _, frames = partial_transcode(once, spec, keep_frames=True)
    inv = verify_invariants(frames[0], ra)
    assert all(inv[k] == 0 for k in ("P1", "P2", "P3", "P4", "P6")), inv


def test_internal_repartition_is_legal(source, donor):
    cfg, _, enc = source
    ra = Rect(0, 0, 64, 64)
    ft = transcode_frame(enc.payload, cfg, ra, donor_patch(donor, 64, 64, 9))
    area = sum(l.size ** 2 for l in iter_leaves(ft.tree))
    assert area == 128 * 128
    flat = transcode_frame(enc.payload, cfg, ra, np.full((64, 64), 90, np.uint8))
    assert len(flat.payload) < len(ft.payload)


def test_anchor_vs_partial(source, donor):
    cfg, img, enc = source
    stream = Stream(128, 128, cfg.qp, 32, [enc.payload])
    empty, _ = anchor_transcode(stream, ReplaceSpec(Rect(0, 0, 0, 0)))
    assert empty.payloads[0] != enc.payload

    # CTU-aligned, so no straddling leaf codes part of the area losslessly and
    # both paths code the content lossily
    ra = Rect(32, 32, 64, 64)
    rc = donor_patch(donor, 64, 64, 4)
    spec = ReplaceSpec(ra, rc)
    a, _ = anchor_transcode(stream, spec)
    p, _ = partial_transcode(stream, spec)
    fa = decode_frame(a.payloads[0], cfg).recon.final
    fp = decode_frame(p.payloads[0], cfg).recon.final
    inside = ra.mask(128, 128)
    ref = img.copy()
    ref[ra.slices()] = rc
    assert abs(psnr(ref, fa, inside) - psnr(ref, fp, inside)) <= 1.0
    # outside the area the anchor re-quantises everything; the partial path
    # only moves samples the deblocking filter touches at the area border
    assert psnr(img, fa, ~inside) < psnr(img, fp, ~inside)
    border = np.zeros_like(inside)
    border[ra.y - 5:ra.y + ra.h + 5, ra.x - 5:ra.x + ra.w + 5] = True
    np.testing.assert_array_equal(fp[~border], enc.recon.final[~border])
