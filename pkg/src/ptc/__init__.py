"""Monochrome intra codec with in-place partial transcoding of a rectangle."""

from .core import CodecConfig, CuLeaf, CuNode, IntraMode, ReconPair
from .decoder import DecodedFrame, MalformedSyntax, decode_frame, reencode_bins
from .encoder import EncodedFrame, encode_frame
from .entropy import RangeDecoder, RangeEncoder, TruncatedStream
from .transcoder import (Category, InvalidRA, Rect, ReplaceSpec, TranscodeReport, categorize,
                         partial_transcode, transcode_frame, verify_invariants)

__all__ = [
    "CodecConfig", "CuLeaf", "CuNode", "IntraMode", "ReconPair",
    "DecodedFrame", "MalformedSyntax", "decode_frame", "reencode_bins",
    "EncodedFrame", "encode_frame",
    "RangeDecoder", "RangeEncoder", "TruncatedStream",
    "Category", "InvalidRA", "Rect", "ReplaceSpec", "TranscodeReport", "categorize",
    "partial_transcode", "transcode_frame", "verify_invariants",
]
