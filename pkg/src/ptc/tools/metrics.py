"""PSNR and Bjontegaard delta-rate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PSNR_CAP = 99.99


class DimensionMismatch(ValueError):
    pass


class NoOverlap(ValueError):
    pass


def _mse(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None) -> float:
    d = (np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)) ** 2
    if mask is not None:
        d = d[..., mask]
        if d.size == 0:
            return 0.0
    return float(d.mean())


def psnr(a, b, mask: np.ndarray | None = None) -> float:
    """PSNR in dB over a plane or a sequence of planes (pooled MSE).

    ``mask`` restricts the measurement to a region of every plane.
    Identical inputs report ``PSNR_CAP``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    if mask is not None and np.shape(mask) != a.shape[-2:]:
        raise DimensionMismatch("mask does not match plane dimensions")
    mse = _mse(a, b, mask)
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(255.0 ** 2 / mse))


@dataclass(frozen=True)
class RdPoint:
    rate: float  # kbit
    psnr: float
    qp: int | None = None


@dataclass
class RdCurve:
    points: list[RdPoint] = field(default_factory=list)

    def __post_init__(self):
        if any(p.rate <= 0 for p in self.points):
            raise ValueError("rates must be strictly positive")
        self.points.sort(key=lambda p: p.rate)

    @classmethod
    def from_arrays(cls, rates: Sequence[float], psnrs: Sequence[float]) -> "RdCurve":
        return cls([RdPoint(float(r), float(q)) for r, q in zip(rates, psnrs)])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def to_list(self) -> list[dict]:
        return [{"rate": p.rate, "psnr": p.psnr, "qp": p.qp} for p in self.points]


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Average rate difference of ``test`` against ``anchor`` at equal PSNR, in percent.

    Cubic fit of log10(rate) as a function of PSNR for each curve, integrated
    analytically over the shared PSNR interval. Negative means ``test`` saves
    rate.
    """
    if len(anchor.points) < 4 or len(test.points) < 4:
        raise ValueError("bd_rate needs at least four points per curve")
    pa, pt = anchor.psnrs, test.psnrs
    lo = max(pa.min(), pt.min())
    hi = min(pa.max(), pt.max())
    if hi <= lo:
        raise NoOverlap(f"PSNR ranges do not overlap ({pa.min():.2f}-{pa.max():.2f} vs "
                        f"{pt.min():.2f}-{pt.max():.2f})")
    fa = np.polyint(np.polyfit(pa, np.log10(anchor.rates), 3))
    ft = np.polyint(np.polyfit(pt, np.log10(test.rates), 3))
    avg = ((np.polyval(ft, hi) - np.polyval(ft, lo))
           - (np.polyval(fa, hi) - np.polyval(fa, lo))) / (hi - lo)
    return float((10.0 ** avg - 1.0) * 100.0)
