"""``ptc`` command-line entry point.

Exit status: 0 on success, 1 on usage errors, 2 on data errors (bad or
truncated streams, mismatched images, invalid replace areas).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..core import CodecConfig
from ..decoder import MalformedSyntax, decode_frame
from ..encoder import encode_frame
from ..entropy import TruncatedStream
from ..transcoder import DEFAULT_L, InvalidRA, Rect, ReplaceSpec, partial_transcode
from .anchor import anchor_transcode
from .container import ContainerError, Stream
from .io import read_frames, read_pgm, write_frames
from .metrics import DimensionMismatch, NoOverlap, RdCurve, RdPoint, bd_rate, psnr

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

DATA_ERRORS = (TruncatedStream, MalformedSyntax, ContainerError, InvalidRA, DimensionMismatch,
               NoOverlap, ValueError, OSError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_spec(path) -> ReplaceSpec:
    """Replace spec JSON: ``{"x", "y", "w", "h", "rc_file"}``; rc_file is a PGM
    path relative to the JSON file. ``w`` or ``h`` of 0 means no replacement."""
    path = Path(path)
    d = json.loads(path.read_text())
    try:
        ra = Rect(int(d["x"]), int(d["y"]), int(d["w"]), int(d["h"]))
    except KeyError as e:
        raise ValueError(f"{path}: missing key {e}") from None
    if ra.empty:
        return ReplaceSpec(ra)
    rc_path = Path(d["rc_file"])
    if not rc_path.is_absolute():
        rc_path = path.parent / rc_path
    return ReplaceSpec(ra, read_pgm(rc_path))


def load_curve(path) -> RdCurve:
    """RD curve JSON: a list of ``{"rate", "psnr"[, "qp"]}`` objects."""
    pts = json.loads(Path(path).read_text())
    if isinstance(pts, dict):
        pts = pts["points"]
    return RdCurve([RdPoint(float(p["rate"]), float(p["psnr"]), p.get("qp")) for p in pts])


def cmd_encode(args) -> int:
    frames = read_frames(args.input, args.width, args.height)
    h, w = frames[0].shape
    cfg = CodecConfig(w, h, qp=args.qp, ctu_size=args.ctu)
    stream = Stream(w, h, args.qp, args.ctu, [encode_frame(f, cfg).payload for f in frames])
    stream.save(args.output)
    print(f"{len(frames)} frame(s), {stream.payload_bytes} payload bytes")
    return EXIT_OK


def cmd_decode(args) -> int:
    stream = Stream.load(args.input)
    cfg = stream.cfg
    planes = []
    for p in stream.payloads:
        recon = decode_frame(p, cfg).recon
        planes.append(recon.pre_deblock if args.pre_deblock else recon.final)
    write_frames(args.output, planes)
    return EXIT_OK


def _transcode(args, anchor: bool) -> int:
    stream = Stream.load(args.input)
    spec = load_spec(args.spec)
    if anchor:
        out, seconds = anchor_transcode(stream, spec)
        summary = {"input_bytes": stream.payload_bytes, "output_bytes": out.payload_bytes,
                   "seconds": seconds}
    else:
        out, rep = partial_transcode(stream, spec, L=args.L)
        summary = rep.to_dict()
    out.save(args.output)
    if args.report:
        Path(args.report).write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return EXIT_OK


def cmd_psnr(args) -> int:
    a = read_frames(args.a, args.width, args.height)
    b = read_frames(args.b, args.width, args.height)
    print(f"{psnr(np.array(a), np.array(b)):.2f}")
    return EXIT_OK


def cmd_bdrate(args) -> int:
    print(f"{bd_rate(load_curve(args.anchor), load_curve(args.test)):.2f}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import ExperimentConfig, InvariantViolation, run_experiment

    cfg = ExperimentConfig()
    if args.config:
        cfg = ExperimentConfig.from_dict(json.loads(Path(args.config).read_text()))
    try:
        report = run_experiment(cfg, progress=lambda g: print(
            f"occ={g.occupation:g} {g.position}: BD-BR {g.bd_rate:+.2f}% "
            f"TS {100 * g.time_saving:.1f}%", flush=True))
    except InvariantViolation as e:
        e.report.save(args.output)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    report.save(args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ptc", description="Intra codec and partial transcoder.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="encode a PGM image or raw luma sequence")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--qp", type=int, default=32)
    p.add_argument("--ctu", type=int, default=32, choices=(16, 32, 64))
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a stream to PGM or raw luma")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--pre-deblock", action="store_true", help="write the unfiltered planes")
    p.set_defaults(func=cmd_decode)

    for name, anchor in (("transcode", False), ("anchor-transcode", True)):
        p = sub.add_parser(name, help=("full decode-replace-encode" if anchor
                                       else "replace a rectangle in place"))
        p.add_argument("input")
        p.add_argument("--spec", required=True, help="replace spec JSON")
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--report", help="write a JSON summary here")
        if not anchor:
            p.add_argument("--L", type=int, default=DEFAULT_L, dest="L")
        p.set_defaults(func=lambda a, anchor=anchor: _transcode(a, anchor))

    p = sub.add_parser("psnr", help="PSNR between two images or sequences")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.set_defaults(func=cmd_psnr)

    p = sub.add_parser("bdrate", help="BD-rate of test curve against anchor curve")
    p.add_argument("anchor")
    p.add_argument("test")
    p.set_defaults(func=cmd_bdrate)

    p = sub.add_parser("experiment", help="partial vs anchor benchmark grid")
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DATA_ERRORS as e:
        print(f"ptc {args.command}: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
