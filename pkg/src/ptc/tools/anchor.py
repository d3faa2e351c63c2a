"""Full decode-replace-encode anchor."""

from __future__ import annotations

import time

import numpy as np

from ..decoder import decode_frame
from ..encoder import encode_frame
from ..transcoder import ReplaceSpec
from .container import Stream


def anchor_transcode(stream: Stream, spec: ReplaceSpec) -> tuple[Stream, float]:
    """Decode every frame, paste the replace content, re-encode the whole frame.

    Returns the new stream and the wall-clock seconds spent.
    """
    cfg = stream.cfg
    spec.validate(cfg.width, cfg.height)
    out = Stream(stream.width, stream.height, stream.qp, stream.ctu_size)
    t0 = time.perf_counter()
    for i, payload in enumerate(stream.payloads):
        plane = decode_frame(payload, cfg).recon.final.copy()
        if not spec.ra.empty:
            plane[spec.ra.slices()] = np.asarray(spec.rc_for(i), dtype=np.uint8)
        out.payloads.append(encode_frame(plane, cfg).payload)
    return out, time.perf_counter() - t0
