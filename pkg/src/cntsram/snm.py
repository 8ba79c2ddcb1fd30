"""Butterfly curves and maximal-square noise margins."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Mode(enum.Enum):
    HOLD = "hold"
    READ = "read"
    WRITE = "write"


@dataclass
class ButterflyCurve:
    """Two voltage-transfer curves of a cross-coupled pair.

    ``forward`` is QB as a function of Q; ``mirrored`` is Q as a function of
    QB.  Plotted together on (Q, QB) axes they form the butterfly.
    """

    forward_in: np.ndarray
    forward_out: np.ndarray
    mirrored_in: np.ndarray
    mirrored_out: np.ndarray
    mode: Mode = Mode.HOLD
    vdd: float = 0.9

    def points(self):
        """((x, y) of the forward curve, (x, y) of the mirrored curve) on Q/QB axes."""
        return ((self.forward_in, self.forward_out), (self.mirrored_out, self.mirrored_in))


@dataclass
class SnmReport:
    snm: float
    lobe_high: float       # lobe around the Q-high state
    lobe_low: float        # lobe around the Q-low state
    mode: Mode
    cell: str = ""
    intersections: int = 0
    degenerate_eye: bool = False
    monostable: bool | None = None    # set for write margins

    def as_row(self) -> dict:
        return {"cell": self.cell, "mode": self.mode.value, "snm": self.snm,
                "lobe_high": self.lobe_high, "lobe_low": self.lobe_low,
                "intersections": self.intersections,
                "monostable": "" if self.monostable is None else self.monostable}


def diagonal_separation(curve: ButterflyCurve):
    """Signed square side along each 45-degree line y = x + c.

    Returns ``(c, d)`` where ``d > 0`` inside the Q-high lobe and ``d < 0``
    inside the Q-low lobe.  Both curves are piecewise linear in c, so the
    extremes of ``d`` lie on the returned breakpoints.
    """
    xa = np.asarray(curve.forward_in, float)
    ya = np.asarray(curve.forward_out, float)
    yb = np.asarray(curve.mirrored_in, float)
    xb = np.asarray(curve.mirrored_out, float)

    ca = ya - xa
    order = np.argsort(ca)
    ca, xa_c = ca[order], xa[order]
    cb = yb - xb
    order = np.argsort(cb)
    cb, xb_c = cb[order], xb[order]

    lo = max(ca[0], cb[0])
    hi = min(ca[-1], cb[-1])
    if hi <= lo:
        return np.array([]), np.array([])
    c = np.unique(np.concatenate([ca, cb, [lo, hi]]))
    c = c[(c >= lo) & (c <= hi)]
    d = np.interp(c, cb, xb_c) - np.interp(c, ca, xa_c)
    return c, d


def _segments(d: np.ndarray, tol: float):
    """Split sample indices at the roots of ``d``.

    Returns (number of roots, list of (sign, indices) for the segments that lie
    between two roots).
    """
    s = np.sign(np.where(np.abs(d) <= tol, 0.0, d)).astype(int)
    roots = 0
    bounded = []
    current, cur_sign, seen_root = [], 0, False
    prev = None
    for i, si in enumerate(s):
        if si == 0:
            if prev != 0:
                roots += 1
                if current and seen_root:
                    bounded.append((cur_sign, current))
                current, cur_sign, seen_root = [], 0, True
        else:
            if prev not in (None, 0) and si != prev:
                roots += 1
                if current and seen_root:
                    bounded.append((cur_sign, current))
                current, seen_root = [], True
            current.append(i)
            cur_sign = si
        prev = si
    return roots, bounded


def count_intersections(d: np.ndarray, tol: float = 1e-6) -> int:
    return _segments(d, tol)[0]


def snm_max_square(curve: ButterflyCurve, cell: str = "", tol: float = 1e-6) -> SnmReport:
    """Largest square in each lobe of the butterfly; the SNM is the smaller one.

    Lobes are the regions enclosed between consecutive intersections of the two
    curves.  A lobe that does not exist has size 0; if neither exists the eye
    is degenerate.
    """
    c, d = diagonal_separation(curve)
    if d.size == 0:
        return SnmReport(0.0, 0.0, 0.0, curve.mode, cell, 0, True)
    roots, segments = _segments(d, tol)
    lobe_high = max([float(np.max(d[idx])) for sg, idx in segments if sg > 0], default=0.0)
    lobe_low = max([float(np.max(-d[idx])) for sg, idx in segments if sg < 0], default=0.0)
    snm = min(lobe_high, lobe_low)
    return SnmReport(snm, lobe_high, lobe_low, curve.mode, cell, roots,
                     degenerate_eye=snm == 0.0)


def write_square(curve: ButterflyCurve, written: int = 0, cell: str = "",
                 tol: float = 1e-6) -> SnmReport:
    """Write margin from a write-biased butterfly.

    The write succeeds when the curves intersect exactly once.  The margin is
    then the largest square in the open region on the written state's side;
    a failed write has margin 0.
    """
    c, d = diagonal_separation(curve)
    if d.size == 0:
        return SnmReport(0.0, 0.0, 0.0, curve.mode, cell, 0, True, monostable=False)
    roots, _ = _segments(d, tol)
    lobe_high = max(float(np.max(d)), 0.0)
    lobe_low = max(float(np.max(-d)), 0.0)
    monostable = roots == 1
    side = lobe_high if written else lobe_low
    margin = side if monostable else 0.0
    return SnmReport(margin, lobe_high, lobe_low, curve.mode, cell, roots,
                     degenerate_eye=margin == 0.0, monostable=monostable)


def ideal_step_curve(vdd: float = 0.9, step: float = 1e-3, trip: float | None = None,
                     mode: Mode = Mode.HOLD) -> ButterflyCurve:
    """Two ideal inverters switching abruptly at ``trip`` (default vdd/2)."""
    trip = vdd / 2 if trip is None else trip
    below = np.round(np.arange(0.0, trip + step / 2, step), 12)
    below = below[below < trip]
    above = np.round(np.arange(trip + step, vdd + step / 2, step), 12)
    vin = np.concatenate([below, [trip, trip], above])
    vout = np.concatenate([np.full(below.size, vdd), [vdd, 0.0], np.zeros(above.size)])
    return ButterflyCurve(vin, vout, vin.copy(), vout.copy(), mode, vdd)
