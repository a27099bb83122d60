"""Zero-voltage-switching conditions of the four half-bridges.

Switching instants are expressed as angles ``theta = ws*t`` of the switching
waveforms: the primary pulse occupies ``[alpha1/2, pi - alpha1/2]`` and the
secondary pulse ``[delta + alpha2/2, delta + pi - alpha2/2]`` with
``alpha = pi - d``. A winding current at such an angle is
``real(I e^{j theta})`` where ``I`` is the stored phasor rotated into the
waveform frame, ``I = I_qd * e^{-j pi/2}``.

Conditions, with the thresholds ``I1min``/``I2min`` of the parameters::

    HB1: I1(pi - alpha1/2) >  I1min
    HB2: I1(alpha1/2)      < -I1min
    HB3: I2(delta - alpha2/2) > I2min
    HB4: I2(delta + alpha2/2) > I2min
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .model import PHASOR_FRAME_SHIFT, ConverterParams
from . import tables

__all__ = [
    "HALF_BRIDGES",
    "ZVS_COLUMNS",
    "ZvsReport",
    "ZvsMap",
    "instantaneous_current",
    "zvs_check",
    "zvs_map",
    "regions",
    "calibrate_thresholds",
    "zvs_from_waveforms",
]

HALF_BRIDGES = ("HB1", "HB2", "HB3", "HB4")

ZVS_COLUMNS = ("P_target_W", "I1_at_pi_minus_a1half_A", "I1_at_a1half_A",
               "I2_at_delta_minus_a2half_A", "I2_at_delta_plus_a2half_A",
               "hb1_pass", "hb2_pass", "hb3_pass", "hb4_pass")

_TO_WAVEFORM_FRAME = cmath.exp(-1j * PHASOR_FRAME_SHIFT)


def instantaneous_current(I_qd: complex, theta):
    """``real(I_qd * e^{j theta})``; ``theta`` may be an array."""
    if np.ndim(theta) == 0:
        return (complex(I_qd) * cmath.exp(1j * float(theta))).real
    return np.real(complex(I_qd) * np.exp(1j * np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class ZvsReport:
    """Switching-instant currents and verdicts for one operating point.

    ``I_qd1``/``I_qd2`` are the winding phasors in the waveform frame and
    ``angles`` the four switching angles, so that
    ``currents[k] == instantaneous_current(I_qd, angles[k])``.
    """

    P_target: float
    alpha1: float
    alpha2: float
    delta: float
    I_qd1: complex
    I_qd2: complex
    angles: tuple
    currents: tuple
    thresholds: tuple
    passes: tuple

    def as_row(self) -> dict:
        c, ok = self.currents, self.passes
        return {
            "P_target_W": self.P_target,
            "I1_at_pi_minus_a1half_A": c[0], "I1_at_a1half_A": c[1],
            "I2_at_delta_minus_a2half_A": c[2], "I2_at_delta_plus_a2half_A": c[3],
            "hb1_pass": ok[0], "hb2_pass": ok[1], "hb3_pass": ok[2], "hb4_pass": ok[3],
        }


def _verdicts(currents, I1min: float, I2min: float):
    i1a, i1b, i2a, i2b = currents
    return (i1a > I1min, i1b < -I1min, i2a > I2min, i2b > I2min)


def zvs_check(op, p: ConverterParams) -> ZvsReport:
    """Evaluate the four half-bridge conditions at a solved operating point."""
    d1, d2, delta = op.control.d1, op.control.d2, op.control.delta
    a1 = math.pi - d1
    a2 = math.pi - d2
    I1 = complex(op.I_qd1) * _TO_WAVEFORM_FRAME
    I2 = complex(op.I_qd2) * _TO_WAVEFORM_FRAME
    angles = (math.pi - a1 / 2, a1 / 2, delta - a2 / 2, delta + a2 / 2)
    currents = (
        instantaneous_current(I1, angles[0]),
        instantaneous_current(I1, angles[1]),
        instantaneous_current(I2, angles[2]),
        instantaneous_current(I2, angles[3]),
    )
    return ZvsReport(
        P_target=op.P_target, alpha1=a1, alpha2=a2, delta=delta,
        I_qd1=I1, I_qd2=I2, angles=angles, currents=currents,
        thresholds=(p.I1min, p.I1min, p.I2min, p.I2min),
        passes=_verdicts(currents, p.I1min, p.I2min),
    )


def regions(powers, flags):
    """Contiguous runs of ``True`` in ``flags`` as ``(lo, hi)`` power intervals.

    Interior boundaries sit midway between the neighbouring grid powers;
    a run touching the end of the grid is closed by that grid power.
    """
    P = np.asarray(powers, dtype=float)
    f = np.asarray(flags, dtype=bool)
    out = []
    k = 0
    while k < len(f):
        if not f[k]:
            k += 1
            continue
        j = k
        while j + 1 < len(f) and f[j + 1]:
            j += 1
        lo = P[k] if k == 0 else 0.5 * (P[k - 1] + P[k])
        hi = P[j] if j == len(f) - 1 else 0.5 * (P[j] + P[j + 1])
        out.append((float(lo), float(hi)))
        k = j + 1
    return out


@dataclass
class ZvsMap:
    reports: list
    failed_powers: list = field(default_factory=list)

    @property
    def P(self) -> np.ndarray:
        return np.array([r.P_target for r in self.reports])

    def passes(self, hb: str) -> np.ndarray:
        k = HALF_BRIDGES.index(hb)
        return np.array([r.passes[k] for r in self.reports], dtype=bool)

    def currents(self, hb: str) -> np.ndarray:
        k = HALF_BRIDGES.index(hb)
        return np.array([r.currents[k] for r in self.reports])

    def traces(self):
        """The two primary-current traces: ``(P, I1(pi - alpha1/2), I1(alpha1/2))``."""
        return self.P, self.currents("HB1"), self.currents("HB2")

    def summary(self) -> dict:
        out = {}
        for hb in HALF_BRIDGES:
            ok = self.passes(hb)
            out[hb] = {
                "pass_regions": regions(self.P, ok),
                "fail_regions": regions(self.P, ~ok),
                "n_pass": int(ok.sum()),
                "n_points": int(ok.size),
            }
        out["failed_powers"] = list(self.failed_powers)
        return out

    def to_csv(self, path) -> None:
        tables.write_csv(path, ZVS_COLUMNS, (r.as_row() for r in self.reports))


def zvs_map(table, p: ConverterParams) -> ZvsMap:
    """Reports for every converged row of a sweep; unconverged powers are listed."""
    reports, failed = [], []
    for op in table:
        if op.converged:
            reports.append(zvs_check(op, p))
        else:
            failed.append(op.P_target)
    return ZvsMap(reports, failed)


def _boundary_error(powers, flags, which: str, target: float) -> float:
    runs = regions(powers, flags)
    if not runs:
        return math.inf
    if which == "pass_lo":
        return min(abs(lo - target) for lo, _ in runs)
    if which == "fail_hi":
        runs = regions(powers, ~np.asarray(flags, dtype=bool))
        return min((abs(hi - target) for _, hi in runs), default=math.inf)
    raise ValueError(which)


def calibrate_thresholds(table, p: ConverterParams, hb3_pass_from: float = 850.0,
                         hb4_fail_until: float = 250.0, resolution: float = 0.05):
    """Fit ``(I1min, I2min)`` to the published ZVS boundaries.

    ``I1min`` is the smallest multiple of ``resolution`` for which HB1 fails
    at every sweep point. ``I2min`` minimizes the larger of two boundary
    errors: the start of the HB3 pass region (``hb3_pass_from``) and the end
    of the HB4 fail window (``hb4_fail_until``); ties resolve to the middle of
    the optimal interval, snapped to ``resolution``.
    """
    zmap = zvs_map(table, p)
    hb1 = zmap.currents("HB1")
    I1min = resolution * math.ceil(max(0.0, float(hb1.max())) / resolution + 1e-12)
    if I1min <= hb1.max():
        I1min += resolution

    P = zmap.P
    i3, i4 = zmap.currents("HB3"), zmap.currents("HB4")
    top = max(float(i3.max()), float(i4.max()), resolution)
    cands = np.arange(0.0, top + resolution, resolution / 10)
    errs = np.array([
        max(_boundary_error(P, i3 > c, "pass_lo", hb3_pass_from),
            _boundary_error(P, i4 > c, "fail_hi", hb4_fail_until))
        for c in cands
    ])
    best = np.flatnonzero(errs <= errs.min() + 1e-9)
    I2min = resolution * round(0.5 * (cands[best[0]] + cands[best[-1]]) / resolution)
    return round(float(I1min), 10), round(float(I2min), 10)


def zvs_from_waveforms(w, p: ConverterParams) -> ZvsReport:
    """Re-evaluate the conditions on the final period of a switched simulation.

    Diagnostic only: currents are linearly interpolated from the simulated
    samples at the switching angles, which places them on the discontinuity
    of the winding-current slope.
    """
    from .simulate import steady_metrics

    ctrl = w.control
    a1, a2, delta = math.pi - ctrl.d1, math.pi - ctrl.d2, ctrl.delta
    sl = w.final_cycle()
    X = w.x[sl]
    theta = np.arange(X.shape[0]) * (2 * math.pi / w.steps_per_cycle)
    angles = (math.pi - a1 / 2, a1 / 2, delta - a2 / 2, delta + a2 / 2)

    def at(col, ang):
        return float(np.interp(math.fmod(ang, 2 * math.pi) % (2 * math.pi), theta, X[:, col]))

    currents = (at(2, angles[0]), at(2, angles[1]), at(3, angles[2]), at(3, angles[3]))
    m = steady_metrics(w, p)
    return ZvsReport(
        P_target=m.Pout_avg, alpha1=a1, alpha2=a2, delta=delta,
        I_qd1=m.I_qd1_hat * _TO_WAVEFORM_FRAME, I_qd2=m.I_qd2_hat * _TO_WAVEFORM_FRAME,
        angles=angles, currents=currents,
        thresholds=(p.I1min, p.I1min, p.I2min, p.I2min),
        passes=_verdicts(currents, p.I1min, p.I2min),
    )
