"""PSNR, rate-distortion curves and Bjontegaard deltas."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatchError

PEAK = 255.0


def mse(a, b) -> float:
    a = a.luma if hasattr(a, "luma") else np.asarray(a)
    b = b.luma if hasattr(b, "luma") else np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot compare {a.shape} with {b.shape}")
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.mean(d * d))


def psnr(a, b) -> float:
    """Luma PSNR in dB; ``math.inf`` for identical pictures."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / err)


@dataclass(frozen=True)
class RdPoint:
    qp: int
    frames: int
    bits: int
    bpp: float
    psnr: float

    @classmethod
    def from_run(cls, qp, bits, width, height, frames, psnr_db):
        return cls(qp, frames, bits, bits / (width * height * frames), psnr_db)


class RdCurve:
    """At least four points, sorted by bpp; bpp and PSNR strictly increasing."""

    def __init__(self, points: Sequence[RdPoint]):
        pts = sorted(points, key=lambda p: p.bpp)
        if len(pts) < 4:
            raise ValueError(f"an RD curve needs at least 4 points, got {len(pts)}")
        if len({p.qp for p in pts}) != len(pts):
            raise ValueError("RD curve QPs must be distinct")
        rates = np.array([p.bpp for p in pts])
        quals = np.array([p.psnr for p in pts])
        if not np.all(np.isfinite(quals)):
            raise ValueError("RD curve contains an infinite PSNR point")
        if np.any(rates <= 0):
            raise ValueError("RD curve rates must be positive")
        if np.any(np.diff(rates) <= 0) or np.any(np.diff(quals) <= 0):
            raise ValueError("RD curve is not strictly monotone")
        self.points = tuple(pts)

    @classmethod
    def from_arrays(cls, bpp, psnr_db, qps=None):
        qps = qps if qps is not None else range(len(bpp))
        return cls([RdPoint(q, 1, 0, float(r), float(d)) for q, r, d in zip(qps, bpp, psnr_db)])

    @property
    def log_rate(self):
        return np.log10([p.bpp for p in self.points])

    @property
    def quality(self):
        return np.array([p.psnr for p in self.points])

    def __len__(self):
        return len(self.points)


def _overlap(a, b):
    lo = max(a.min(), b.min())
    hi = min(a.max(), b.max())
    if hi <= lo:
        raise ValueError("RD curves do not overlap")
    return lo, hi


def _mean_gap(x_a, y_a, x_b, y_b):
    """Mean of ``fit_b - fit_a`` over the shared x range, cubic fits."""
    lo, hi = _overlap(x_a, x_b)
    pa = np.polyint(np.polyfit(x_a, y_a, 3))
    pb = np.polyint(np.polyfit(x_b, y_b, 3))
    ia = np.polyval(pa, hi) - np.polyval(pa, lo)
    ib = np.polyval(pb, hi) - np.polyval(pb, lo)
    return (ib - ia) / (hi - lo)


def bd_psnr(anchor: RdCurve, test: RdCurve) -> float:
    """Average PSNR difference (test - anchor) in dB at equal rate."""
    return float(_mean_gap(anchor.log_rate, anchor.quality, test.log_rate, test.quality))


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Average rate difference in percent at equal quality; negative is a saving."""
    gap = _mean_gap(anchor.quality, anchor.log_rate, test.quality, test.log_rate)
    return float((10.0 ** gap - 1.0) * 100.0)


@dataclass(frozen=True)
class RunLog:
    """Per-frame luma PSNR and coded bits of one encode."""

    psnr: tuple
    bits: tuple

    def __post_init__(self):
        if len(self.psnr) != len(self.bits):
            raise ValueError("psnr and bits logs differ in length")

    @classmethod
    def from_frames(cls, originals, decoded, bits):
        if len(originals) != len(decoded):
            raise DimensionMismatchError("original and decoded sequences differ in length")
        return cls(tuple(psnr(o, d) for o, d in zip(originals, decoded)), tuple(bits))


@dataclass(frozen=True)
class GainRow:
    t: int
    psnr_a: float
    psnr_b: float
    delta_psnr: float
    bits_a: int
    bits_b: int


@dataclass(frozen=True)
class GainTable:
    rows: tuple

    @property
    def avg_delta_psnr(self):
        return float(np.mean([r.delta_psnr for r in self.rows]))

    @property
    def avg_bit_saving(self):
        """Percent of ``a``'s bits saved by ``b`` over the whole run."""
        total_a = sum(r.bits_a for r in self.rows)
        total_b = sum(r.bits_b for r in self.rows)
        return 100.0 * (total_a - total_b) / total_a if total_a else 0.0

    @property
    def avg_frame_bit_saving(self):
        """Mean over frames of the per-frame percent saving."""
        return float(np.mean([
            100.0 * (r.bits_a - r.bits_b) / r.bits_a if r.bits_a else 0.0 for r in self.rows
        ]))


def _delta(a, b):
    if a == b:
        return 0.0
    return b - a


def per_frame_gain(run_a: RunLog, run_b: RunLog) -> GainTable:
    """Per-frame ``b - a`` PSNR deltas and bit counts; ``t`` is 1-based."""
    if len(run_a.psnr) != len(run_b.psnr):
        raise DimensionMismatchError(
            f"runs have {len(run_a.psnr)} and {len(run_b.psnr)} frames"
        )
    rows = tuple(
        GainRow(t + 1, pa, pb, _delta(pa, pb), ba, bb)
        for t, (pa, pb, ba, bb) in enumerate(zip(run_a.psnr, run_b.psnr, run_a.bits, run_b.bits))
    )
    return GainTable(rows)


RD_FIELDS = ("qp", "frames", "total_bits", "bpp", "psnr")
GAIN_FIELDS = ("t", "psnr_a", "psnr_b", "delta_psnr", "bits_a", "bits_b")


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6f}"
    return str(v)


def write_rd_csv(fh, points, mode_column=None):
    """Write RD rows; ``mode_column`` is a per-point label list, if any."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow((("mode",) if mode_column is not None else ()) + RD_FIELDS)
    for i, p in enumerate(points):
        row = (p.qp, p.frames, p.bits, p.bpp, p.psnr)
        prefix = (mode_column[i],) if mode_column is not None else ()
        w.writerow(prefix + tuple(_fmt(v) for v in row))


def write_gain_csv(fh, table: GainTable):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(GAIN_FIELDS)
    for r in table.rows:
        w.writerow(tuple(_fmt(v) for v in (r.t, r.psnr_a, r.psnr_b, r.delta_psnr, r.bits_a, r.bits_b)))
