"""Full-order switched simulation and first-harmonic cross-validation.

Integration is fixed-step RK4. Every switching edge of both bridges is
inserted into the step grid, so no step straddles a discontinuity; states
are reported on the uniform grid of ``steps_per_cycle`` samples per period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, IntegrationBlowupError
from .model import (
    PHASOR_FRAME_SHIFT,
    ConstantCurrent,
    ControlVector,
    ConverterParams,
    FullState,
    full_order_matrices,
    fundamental_phasors,
    switching_waveform,
)
from .numerics import rk4_step
from . import tables

__all__ = [
    "WAVEFORM_COLUMNS",
    "Waveforms",
    "SteadyMetrics",
    "edge_angles",
    "run_switched",
    "periodic_state",
    "steady_metrics",
    "fundamental_phasor",
    "load_for_voltage",
    "ValidationRow",
    "validate_operating_point",
    "validate_square_drive",
]

WAVEFORM_COLUMNS = ("t_s", "Id_A", "Vc1_V", "I1_A", "I2_A", "Vc2_V", "s1", "s2")

STATE_BOUND = 1e7
SETTLE_TOL = 1e-3


@dataclass(frozen=True)
class Waveforms:
    """Uniformly sampled trajectory; ``x`` has one row per sample in state order."""

    t: np.ndarray
    x: np.ndarray
    s1: np.ndarray
    s2: np.ndarray
    sample_rate: float
    duration: float
    steps_per_cycle: int
    control: ControlVector
    load: object

    @property
    def cycles(self) -> int:
        return (len(self.t) - 1) // self.steps_per_cycle

    def final_cycle(self) -> slice:
        n = self.steps_per_cycle
        return slice(len(self.t) - 1 - n, len(self.t))

    def to_csv(self, path) -> None:
        rows = ({"t_s": float(t), "Id_A": float(x[0]), "Vc1_V": float(x[1]),
                 "I1_A": float(x[2]), "I2_A": float(x[3]), "Vc2_V": float(x[4]),
                 "s1": float(a), "s2": float(b)}
                for t, x, a, b in zip(self.t, self.x, self.s1, self.s2))
        tables.write_csv(path, WAVEFORM_COLUMNS, rows)


def edge_angles(ctrl: ControlVector) -> np.ndarray:
    """Switching edges of both bridges within one period, sorted in ``[0, 2*pi)``."""
    a1 = math.pi - ctrl.d1
    a2 = math.pi - ctrl.d2
    dl = ctrl.delta
    edges = [a1 / 2, math.pi - a1 / 2, math.pi + a1 / 2, 2 * math.pi - a1 / 2,
             dl + a2 / 2, dl + math.pi - a2 / 2, dl + math.pi + a2 / 2, dl - a2 / 2]
    return np.unique(np.mod(edges, 2 * math.pi))


def _cycle_segments(ctrl: ControlVector, steps_per_cycle: int):
    """Integration break points of one period and the uniform-sample mask."""
    two_pi = 2 * math.pi
    uniform = np.linspace(0.0, two_pi, steps_per_cycle + 1)
    spacing = two_pi / steps_per_cycle
    extra = []
    for e in edge_angles(ctrl):
        k = e / spacing
        if abs(k - round(k)) * spacing > 1e-12:
            extra.append(e)
    pts = np.sort(np.concatenate([uniform, extra]))
    is_sample = np.zeros(pts.size, dtype=bool)
    is_sample[np.searchsorted(pts, uniform)] = True
    mids = 0.5 * (pts[:-1] + pts[1:])
    s1 = switching_waveform(ctrl.d1, 0.0, mids)
    s2 = switching_waveform(ctrl.d2, ctrl.delta, mids)
    return pts, is_sample, s1, s2


class _SwitchedRhs:
    """Right-hand sides with the system matrices cached per switch state."""

    def __init__(self, load, p: ConverterParams):
        self.load = load
        self.p = p
        self._cache = {}

    def matrices(self, s1, s2):
        key = (float(s1), float(s2))
        if key not in self._cache:
            self._cache[key] = full_order_matrices(s1, s2, self.p)
        return self._cache[key]

    def state(self, s1, s2):
        A, b = self.matrices(s1, s2)
        load, C2 = self.load, self.p.C2

        def rhs(t, x):
            dx = A @ x + b
            dx[4] -= load.current(x[4]) / C2
            return dx
        return rhs

    def joint(self, s1, s2):
        """RHS for ``[x | X]`` with ``X`` the sensitivity of ``x`` to the initial state."""
        A, b = self.matrices(s1, s2)
        load, C2 = self.load, self.p.C2

        def rhs(t, Z):
            x = Z[:, 0]
            dx = A @ x + b
            dx[4] -= load.current(x[4]) / C2
            J = A.copy()
            J[4, 4] -= load.conductance(x[4]) / C2
            return np.column_stack([dx, J @ Z[:, 1:]])
        return rhs


def _check_steps(steps_per_cycle: int):
    if steps_per_cycle < 200 or steps_per_cycle % 2:
        raise DomainError("steps_per_cycle must be even and >= 200")


def run_switched(ctrl: ControlVector, load, p: ConverterParams, cycles: int = 200,
                 steps_per_cycle: int = 1000, x0=None, early_exit_tol=None) -> Waveforms:
    """Integrate the switched model for ``cycles`` switching periods.

    ``x0`` defaults to ``Vc1 = V1``, ``Vc2 = Vc2_ref`` with zero currents.
    With ``early_exit_tol`` set, stops after the first period whose
    end-to-end relative state change is below the tolerance.

    Raises :class:`IntegrationBlowupError` (carrying the partial trace) if the
    state norm exceeds ``STATE_BOUND``.
    """
    _check_steps(steps_per_cycle)
    if cycles < 1:
        raise DomainError("cycles must be >= 1")
    if x0 is None:
        x = np.array([0.0, p.V1, 0.0, 0.0, p.Vc2_ref])
    elif isinstance(x0, FullState):
        x = x0.as_array()
    else:
        x = np.asarray(x0, dtype=float).copy()

    pts, is_sample, s1_seg, s2_seg = _cycle_segments(ctrl, steps_per_cycle)
    dts = np.diff(pts) / p.ws
    funcs = _SwitchedRhs(load, p)
    rhs_seg = [funcs.state(a, b) for a, b in zip(s1_seg, s2_seg)]
    # switch state reported at a sample is the one of the step that follows it
    sample_idx = np.flatnonzero(is_sample)
    s1_samples = np.append(s1_seg, s1_seg[0])[sample_idx]
    s2_samples = np.append(s2_seg, s2_seg[0])[sample_idx]

    T = 1.0 / p.fs
    out = [x.copy()]
    done = 0
    for c in range(cycles):
        start = x.copy()
        t = c * T
        for k, dt in enumerate(dts):
            try:
                x = rk4_step(rhs_seg[k], x, t, dt)
            except IntegrationBlowupError as exc:
                exc.partial = _pack(out, done, ctrl, load, p, steps_per_cycle,
                                    s1_samples, s2_samples)
                raise
            t += dt
            if is_sample[k + 1]:
                out.append(x.copy())
            if not np.max(np.abs(x)) < STATE_BOUND:
                raise IntegrationBlowupError(
                    f"state norm exceeded {STATE_BOUND:g} at t={t:.6g} s",
                    partial=_pack(out, done, ctrl, load, p, steps_per_cycle,
                                  s1_samples, s2_samples))
        done += 1
        if early_exit_tol is not None and done >= 2:
            scale = np.maximum(np.abs(x), 1.0)
            if np.max(np.abs(x - start) / scale) < early_exit_tol:
                break
    return _pack(out, done, ctrl, load, p, steps_per_cycle, s1_samples, s2_samples)


def _pack(out, done, ctrl, load, p, steps_per_cycle, s1_samples, s2_samples) -> Waveforms:
    X = np.array(out)
    idx = np.arange(X.shape[0]) % steps_per_cycle
    t = np.arange(X.shape[0]) * (2 * math.pi / steps_per_cycle) / p.ws
    return Waveforms(t=t, x=X, s1=s1_samples[idx], s2=s2_samples[idx],
                     sample_rate=steps_per_cycle * p.fs, duration=float(t[-1]),
                     steps_per_cycle=steps_per_cycle, control=ctrl, load=load)


def periodic_state(ctrl: ControlVector, load, p: ConverterParams,
                   steps_per_cycle: int = 1000, x0=None, tol: float = 1e-11,
                   max_iter: int = 20) -> np.ndarray:
    """Initial state of the periodic orbit, found by Newton shooting.

    The period map and its Jacobian come from one RK4 pass over the joint
    state/sensitivity system, so the fixed point is exact for the discrete
    integrator. Converges in one step for a constant-current load. When the
    orbit is not unique the one nearest ``x0`` is returned.
    """
    _check_steps(steps_per_cycle)
    x = (np.array([0.0, p.V1, 0.0, 0.0, p.Vc2_ref]) if x0 is None
         else np.asarray(x0, dtype=float).copy())
    pts, _, s1_seg, s2_seg = _cycle_segments(ctrl, steps_per_cycle)
    dts = np.diff(pts) / p.ws
    funcs = _SwitchedRhs(load, p)
    rhs_seg = [funcs.joint(a, b) for a, b in zip(s1_seg, s2_seg)]
    for _ in range(max_iter):
        Z = np.column_stack([x, np.eye(5)])
        t = 0.0
        for k, dt in enumerate(dts):
            Z = rk4_step(rhs_seg[k], Z, t, dt)
            t += dt
        F = Z[:, 0] - x
        # minimum-norm step: neutral directions (an idle output stage, say)
        # keep their initial value
        step = np.linalg.lstsq(Z[:, 1:] - np.eye(5), -F, rcond=1e-13)[0]
        x = x + step
        if np.max(np.abs(step)) < tol * max(float(np.max(np.abs(x))), 1.0):
            return x
    raise IntegrationBlowupError("periodic orbit search did not converge")


def load_for_voltage(ctrl: ControlVector, p: ConverterParams, Vc2: float = None,
                     steps_per_cycle: int = 1000) -> ConstantCurrent:
    """Constant-current load whose periodic orbit averages ``Vc2`` volts.

    For a current load the orbit is affine in ``Io``, so two periodic solves
    determine it. Defaults to ``p.Vc2_ref``.
    """
    target = p.Vc2_ref if Vc2 is None else float(Vc2)
    avg = []
    for Io in (0.0, 1.0):
        load = ConstantCurrent(Io)
        x0 = periodic_state(ctrl, load, p, steps_per_cycle)
        w = run_switched(ctrl, load, p, 1, steps_per_cycle, x0=x0)
        avg.append(float(np.mean(w.x[:-1, 4])))
    slope = avg[1] - avg[0]
    if slope == 0:
        raise DomainError("output voltage does not depend on the load current")
    return ConstantCurrent((target - avg[0]) / slope)


def fundamental_phasor(theta, samples) -> complex:
    """Single-bin Fourier projection of one uniformly sampled period.

    ``theta`` and ``samples`` cover exactly one period without the closing
    sample. The result ``I`` satisfies ``samples ~ real(I e^{j(theta - pi/2)})``.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(samples, dtype=float)
    return complex(2.0 / y.size * np.sum(y * np.exp(-1j * (theta - PHASOR_FRAME_SHIFT))))


@dataclass(frozen=True)
class SteadyMetrics:
    Vc1_avg: float
    Vc2_avg: float
    Id_avg: float
    Pin_avg: float
    Pout_avg: float
    losses: float
    I_qd1_hat: complex
    I_qd2_hat: complex
    periodicity_error: float
    settled: bool


def steady_metrics(w: Waveforms, p: ConverterParams) -> SteadyMetrics:
    """Averages and fundamental phasors over the final simulated period.

    ``settled`` is ``False`` when the state changed by more than 0.1 %
    (relative) across that period.
    """
    sl = w.final_cycle()
    X = w.x[sl]
    body = X[:-1]
    theta = np.arange(body.shape[0]) * (2 * math.pi / w.steps_per_cycle)
    scale = np.maximum(np.max(np.abs(X), axis=0), 1.0)
    per_err = float(np.max(np.abs(X[-1] - X[0]) / scale))
    Io = np.array([w.load.current(v) for v in body[:, 4]])
    Id, I1, I2 = body[:, 0], body[:, 2], body[:, 3]
    losses = p.r * np.mean(Id ** 2) + p.R1 * np.mean(I1 ** 2) + p.R2 * np.mean(I2 ** 2)
    return SteadyMetrics(
        Vc1_avg=float(np.mean(body[:, 1])),
        Vc2_avg=float(np.mean(body[:, 4])),
        Id_avg=float(np.mean(Id)),
        Pin_avg=float(p.V1 * np.mean(Id)),
        Pout_avg=float(np.mean(body[:, 4] * Io)),
        losses=float(losses),
        I_qd1_hat=fundamental_phasor(theta, I1),
        I_qd2_hat=fundamental_phasor(theta, I2),
        periodicity_error=per_err,
        settled=per_err < SETTLE_TOL,
    )


# -- first-harmonic versus switched ------------------------------------------

@dataclass(frozen=True)
class ValidationRow:
    P_target: float
    fha_I_qd1: complex
    fha_I_qd2: complex
    sim_I_qd1: complex
    sim_I_qd2: complex
    sim_Pout: float
    sim_Vc2: float
    power_error: float
    I1_error: float
    I2_error: float
    settled: bool

    def as_dict(self):
        return {
            "P_target_W": self.P_target,
            "fha_Iqd1_abs_A": abs(self.fha_I_qd1), "fha_Iqd2_abs_A": abs(self.fha_I_qd2),
            "sim_Iqd1_abs_A": abs(self.sim_I_qd1), "sim_Iqd2_abs_A": abs(self.sim_I_qd2),
            "sim_Pout_W": self.sim_Pout, "sim_Vc2_V": self.sim_Vc2,
            "power_rel_err": self.power_error, "Iqd1_rel_err": self.I1_error,
            "Iqd2_rel_err": self.I2_error, "settled": self.settled,
        }


VALIDATION_COLUMNS = ("P_target_W", "fha_Iqd1_abs_A", "fha_Iqd2_abs_A", "sim_Iqd1_abs_A",
                      "sim_Iqd2_abs_A", "sim_Pout_W", "sim_Vc2_V", "power_rel_err",
                      "Iqd1_rel_err", "Iqd2_rel_err", "settled")


def _rel(a: float, b: float) -> float:
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return abs(a - b) / abs(b)


def validate_operating_point(op, p: ConverterParams, steps_per_cycle: int = 1000,
                             cycles: int = 2) -> ValidationRow:
    """Drive the switched model open loop with an operating point's controls.

    The converter feeds a constant-current load ``op.Io`` and is started on
    its periodic orbit. Output power and winding-current fundamentals of the
    final period are compared with the first-harmonic solution.
    """
    load = ConstantCurrent(op.Io)
    if op.P_target == 0.0:
        return ValidationRow(0.0, 0j, 0j, 0j, 0j, 0.0, p.Vc2_ref, 0.0, 0.0, 0.0, True)
    x0 = periodic_state(op.control, load, p, steps_per_cycle)
    w = run_switched(op.control, load, p, cycles, steps_per_cycle, x0=x0)
    m = steady_metrics(w, p)
    return ValidationRow(
        P_target=op.P_target,
        fha_I_qd1=op.I_qd1, fha_I_qd2=op.I_qd2,
        sim_I_qd1=m.I_qd1_hat, sim_I_qd2=m.I_qd2_hat,
        sim_Pout=m.Pout_avg, sim_Vc2=m.Vc2_avg,
        power_error=_rel(m.Pout_avg, op.P_target),
        I1_error=_rel(abs(m.I_qd1_hat), abs(op.I_qd1)),
        I2_error=_rel(abs(m.I_qd2_hat), abs(op.I_qd2)),
        settled=m.settled,
    )


def validate_square_drive(delta: float, p: ConverterParams, steps_per_cycle: int = 1000,
                          cycles: int = 2) -> ValidationRow:
    """Square-wave drive of both bridges at outer shift ``delta``.

    The load current is the first-harmonic prediction at ``Vc1 = V1``,
    ``Vc2 = Vc2_ref``. The simulated current fundamentals are compared with
    the first-harmonic currents evaluated at the simulated average voltages.
    """
    from .optsolve import solve_currents

    ctrl = ControlVector.from_delta(math.pi, math.pi, delta)
    S1, S2 = fundamental_phasors(math.pi, math.pi, delta)
    _, I2 = solve_currents(S1, S2, p.V1, p.Vc2_ref, p)
    Io = 0.5 * p.n * (S2 * I2.conjugate()).real
    load = ConstantCurrent(Io)
    x0 = periodic_state(ctrl, load, p, steps_per_cycle)
    w = run_switched(ctrl, load, p, cycles, steps_per_cycle, x0=x0)
    m = steady_metrics(w, p)
    f1, f2 = solve_currents(S1, S2, m.Vc1_avg, m.Vc2_avg, p)
    P_fha = m.Vc2_avg * 0.5 * p.n * (S2 * f2.conjugate()).real
    return ValidationRow(
        P_target=P_fha,
        fha_I_qd1=f1, fha_I_qd2=f2,
        sim_I_qd1=m.I_qd1_hat, sim_I_qd2=m.I_qd2_hat,
        sim_Pout=m.Pout_avg, sim_Vc2=m.Vc2_avg,
        power_error=_rel(m.Pout_avg, P_fha),
        I1_error=_rel(abs(m.I_qd1_hat), abs(f1)),
        I2_error=_rel(abs(m.I_qd2_hat), abs(f2)),
        settled=m.settled,
    )
