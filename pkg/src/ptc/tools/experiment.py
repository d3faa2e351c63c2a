"""Partial-vs-anchor benchmark over occupation rates, positions and QPs.

Every cell (occupation, position, qp) transcodes the same coded source with
both paths, measures rate and PSNR over the full frame and times both
paths. The partial path is also checked against the protection properties.
"""

from __future__ import annotations

import json
import logging
import math
import statistics
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from skimage import data as skdata
from skimage import transform

from ..core import CodecConfig
from ..decoder import decode_frame
from ..encoder import encode_frame
from ..transcoder import DEFAULT_L, Rect, ReplaceSpec, partial_transcode, verify_invariants
from .anchor import anchor_transcode
from .container import Stream
from .io import read_frames
from .metrics import RdCurve, RdPoint, bd_rate, psnr

log = logging.getLogger(__name__)

POSITIONS = ("TL", "TR", "BR", "BL", "C")
PROTECTED_KEYS = ("P1", "P2", "P3", "P4", "P6")


class InvariantViolation(RuntimeError):
    def __init__(self, message: str, report: "ExperimentReport"):
        super().__init__(message)
        self.report = report


@dataclass
class ExperimentConfig:
    source: str = "camera"       # skimage sample name or a .yuv/.pgm path
    donor: str = "astronaut"
    width: int = 256
    height: int = 256
    frames: int = 5
    occupations: tuple[float, ...] = (0.01, 0.10, 0.50)
    positions: tuple[str, ...] = POSITIONS
    qps: tuple[int, ...] = (22, 27, 32, 37)
    ctu_size: int = 32
    L: int = DEFAULT_L
    check_L: int | None = 3      # second, report-only categorization width
    reps: int = 3
    seed: int = 2024

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
        for key in ("occupations", "positions", "qps"):
            if key in known:
                known[key] = tuple(known[key])
        cfg = cls(**known)
        bad = set(cfg.positions) - set(POSITIONS)
        if bad:
            raise ValueError(f"unknown positions {sorted(bad)}")
        return cfg


# --- sequences --------------------------------------------------------------


def _sample_image(name: str) -> np.ndarray:
    img = getattr(skdata, name)()
    if img.ndim == 3:
        img = img[..., 1]  # green is closest to luma
    return np.asarray(img, dtype=np.uint8)


def panning_sequence(image: np.ndarray, width: int, height: int, frames: int,
                     origin: tuple[int, int] = (100, 150), step: tuple[int, int] = (4, 3)):
    """Crops of ``image`` that slide by ``step`` (rows, cols) per frame."""
    y0, x0 = origin
    dy, dx = step
    H, W = image.shape
    out = []
    for k in range(frames):
        y = min(y0 + k * dy, H - height)
        x = min(x0 + k * dx, W - width)
        out.append(image[y:y + height, x:x + width].copy())
    return out


def load_sequence(name: str, width: int, height: int, frames: int) -> list[np.ndarray]:
    path = Path(name)
    if path.suffix.lower() in (".yuv", ".pgm") and path.exists():
        seq = read_frames(path, width, height)
        if seq[0].shape != (height, width):
            raise ValueError(f"{path}: frames are {seq[0].shape[::-1]}, expected {width}x{height}")
        return [seq[k % len(seq)] for k in range(frames)]
    return panning_sequence(_sample_image(name), width, height, frames)


def ra_rect(occupation: float, position: str, width: int, height: int) -> Rect:
    """Area covering ``occupation`` of the frame with the frame's aspect ratio."""
    s = math.sqrt(occupation)
    w = max(1, min(width, round(width * s)))
    h = max(1, min(height, round(height * s)))
    x = {"TL": 0, "BL": 0, "TR": width - w, "BR": width - w, "C": (width - w) // 2}[position]
    y = {"TL": 0, "TR": 0, "BL": height - h, "BR": height - h, "C": (height - h) // 2}[position]
    return Rect(x, y, w, h)


def donor_patches(donor: np.ndarray, ra: Rect, frames: int, rng: np.random.Generator,
                  width: int, height: int) -> list[np.ndarray]:
    """Nearest-neighbour downscale of a randomly placed donor clip to the area size."""
    H, W = donor.shape
    origin = (int(rng.integers(0, H - height - 4 * frames)),
              int(rng.integers(0, W - width - 3 * frames)))
    clip = panning_sequence(donor, width, height, frames, origin=origin)
    return [np.asarray(transform.resize(f, (ra.h, ra.w), order=0, preserve_range=True,
                                        anti_aliasing=False), dtype=np.uint8) for f in clip]


# --- report -----------------------------------------------------------------


@dataclass
class PathResult:
    rate_kbit: float
    psnr: float
    seconds: float


@dataclass
class CellResult:
    occupation: float
    position: str
    qp: int
    ra: dict
    input_kbit: float
    anchor: PathResult
    partial: PathResult
    rate_overhead_pct: float
    leaves: dict
    invariants: dict
    invariants_check_L: dict | None = None


@dataclass
class GroupResult:
    occupation: float
    position: str
    bd_rate: float
    time_saving: float
    anchor_curve: list
    partial_curve: list


@dataclass
class ExperimentReport:
    config: dict
    cells: list[CellResult] = field(default_factory=list)
    groups: list[GroupResult] = field(default_factory=list)
    occupations: dict = field(default_factory=dict)
    positional: dict = field(default_factory=dict)
    runtime_seconds: float = 0.0

    def violations(self) -> int:
        return sum(c.invariants[k] for c in self.cells for k in PROTECTED_KEYS)

    def check_L_far(self) -> int:
        return sum(c.invariants_check_L["far"] for c in self.cells if c.invariants_check_L)

    def occupation(self, occ: float) -> dict:
        return self.occupations[f"{occ:g}"]

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _median_time(fn, reps: int):
    times, result = [], None
    for _ in range(reps):
        result = fn()
        times.append(result[1])
    return result[0], statistics.median(times)


def _timed_partial(stream: Stream, spec: ReplaceSpec, L: int):
    out = partial_transcode(stream, spec, L, keep_frames=True)
    return out, out[1].seconds


def _invariant_totals(frames, ra: Rect) -> dict:
    total: dict[str, int] = {}
    for ft in frames:
        for k, v in verify_invariants(ft, ra).items():
            total[k] = total.get(k, 0) + v
    return total


def _final_planes(stream: Stream) -> np.ndarray:
    cfg = stream.cfg
    return np.array([decode_frame(p, cfg).recon.final for p in stream.payloads])


def run_experiment(cfg: ExperimentConfig | None = None, strict: bool = True,
                   progress=None) -> ExperimentReport:
    """Run the whole grid.

    With ``strict`` an ``InvariantViolation`` is raised after the run when any
    protected sample or copied payload changed; the report is attached.
    """
    cfg = cfg or ExperimentConfig()
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    source = load_sequence(cfg.source, cfg.width, cfg.height, cfg.frames)
    donor = _sample_image(cfg.donor) if not Path(cfg.donor).exists() else \
        read_frames(cfg.donor, cfg.width, cfg.height)[0]
    report = ExperimentReport(config=asdict(cfg))

    streams = {}
    for qp in cfg.qps:
        ccfg = CodecConfig(cfg.width, cfg.height, qp=qp, ctu_size=cfg.ctu_size)
        streams[qp] = Stream(cfg.width, cfg.height, qp, cfg.ctu_size,
                             [encode_frame(f, ccfg).payload for f in source])

    for occ in cfg.occupations:
        for pos in cfg.positions:
            ra = ra_rect(occ, pos, cfg.width, cfg.height)
            rc = donor_patches(donor, ra, cfg.frames, rng, cfg.width, cfg.height)
            spec = ReplaceSpec(ra, rc)
            reference = np.array(source)
            for k in range(cfg.frames):
                reference[k][ra.slices()] = rc[k]
            anchor_pts, partial_pts = [], []
            t_anchor = t_partial = 0.0
            for qp in cfg.qps:
                stream = streams[qp]
                a_out, a_sec = _median_time(lambda: anchor_transcode(stream, spec), cfg.reps)
                p_out, p_sec = _median_time(lambda: _timed_partial(stream, spec, cfg.L), cfg.reps)
                p_stream, p_report, p_frames = p_out
                t_anchor += a_sec
                t_partial += p_sec
                a_res = PathResult(a_out.payload_bytes * 8 / 1000,
                                   psnr(reference, _final_planes(a_out)), a_sec)
                p_res = PathResult(p_stream.payload_bytes * 8 / 1000,
                                   psnr(reference, np.array([f.recon.final for f in p_frames])),
                                   p_sec)
                inv = _invariant_totals(p_frames, ra)
                inv_l = None
                if cfg.check_L is not None and cfg.check_L != cfg.L:
                    _, _, l_frames = partial_transcode(stream, spec, cfg.check_L, keep_frames=True)
                    inv_l = _invariant_totals(l_frames, ra)
                cell = CellResult(occ, pos, qp, asdict(ra), stream.payload_bytes * 8 / 1000,
                                  a_res, p_res, p_report.rate_overhead,
                                  p_report.to_dict()["leaves"], inv, inv_l)
                report.cells.append(cell)
                anchor_pts.append(RdPoint(a_res.rate_kbit, a_res.psnr, qp))
                partial_pts.append(RdPoint(p_res.rate_kbit, p_res.psnr, qp))
                log.info("occ=%g %s qp=%d anchor %.1fkb %.2fdB %.2fs partial %.1fkb %.2fdB %.2fs",
                         occ, pos, qp, a_res.rate_kbit, a_res.psnr, a_sec,
                         p_res.rate_kbit, p_res.psnr, p_sec)
            a_curve, p_curve = RdCurve(anchor_pts), RdCurve(partial_pts)
            group = GroupResult(occ, pos, bd_rate(a_curve, p_curve), 1.0 - t_partial / t_anchor,
                                a_curve.to_list(), p_curve.to_list())
            report.groups.append(group)
            if progress:
                progress(group)

    _summarize(report, cfg)
    report.runtime_seconds = time.perf_counter() - t_start
    if strict and report.violations():
        raise InvariantViolation(f"{report.violations()} protection violations", report)
    return report


def _summarize(report: ExperimentReport, cfg: ExperimentConfig) -> None:
    for occ in cfg.occupations:
        cells = [c for c in report.cells if c.occupation == occ]
        groups = [g for g in report.groups if g.occupation == occ]
        t_a = sum(c.anchor.seconds for c in cells)
        t_p = sum(c.partial.seconds for c in cells)
        kin = sum(c.input_kbit for c in cells)
        kout = sum(c.partial.rate_kbit for c in cells)
        report.occupations[f"{occ:g}"] = {
            "bd_rate_mean": float(np.mean([g.bd_rate for g in groups])),
            "bd_rate_by_position": {g.position: g.bd_rate for g in groups},
            "time_saving": 1.0 - t_p / t_a,
            "rate_overhead_pct": 100.0 * (kout / kin - 1.0),
        }
    by_pos = {p: float(np.mean([g.bd_rate for g in report.groups if g.position == p]))
              for p in cfg.positions}
    report.positional = {"bd_rate_mean": by_pos}
    if "TL" in by_pos and "BR" in by_pos:
        report.positional["tl_not_worse_than_br"] = by_pos["TL"] <= by_pos["BR"]
